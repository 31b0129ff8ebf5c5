#include "tripletlm/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include "tripletlm/checkpoint.hpp"
#include "tripletlm/data.hpp"
#include "tripletlm/errors.hpp"
#include "tripletlm/evaluation.hpp"
#include "tripletlm/inference.hpp"
#include "tripletlm/io.hpp"
#include "tripletlm/trainer.hpp"

namespace tripletlm::cli {
namespace {

namespace fs = std::filesystem;

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& message) : Error("usage", message) {}
};

std::string one_line(std::string text) {
  for (char& c : text) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return text;
}

void require_file(const std::string& path, const char* flag) {
  if (!fs::is_regular_file(path)) {
    throw UsageError(std::string(flag) + ": no such file '" + path + "'");
  }
}

fs::path metrics_path_for(const fs::path& checkpoint) {
  fs::path p = checkpoint;
  p += ".metrics.csv";
  return p;
}

std::string to_text(const auto& writer) {
  std::ostringstream ss;
  writer(ss);
  return ss.str();
}

// The `# seed=N` line a rankings file starts with, if any.
std::optional<std::string> seed_comment(const std::string& text) {
  const std::string first = text.substr(0, text.find('\n'));
  if (first.rfind("# seed=", 0) == 0) return first;
  return std::nullopt;
}

// Catalog implied by a rankings file: every id that appears in it.
Catalog catalog_from_rankings(const Rankings& rankings) {
  std::set<std::string> ids;
  for (const auto& [source, list] : rankings) {
    ids.insert(source);
    for (const auto& c : list) ids.insert(c.item_id);
  }
  Catalog catalog;
  for (const auto& id : ids) catalog.push_back({id, id, id});
  return catalog;
}

SyntheticSpec load_synthetic_spec(const fs::path& path) {
  SyntheticSpec spec;
  for (const auto& [key, value] : load_key_values(path)) {
    try {
      if (key == "n_clusters") {
        spec.n_clusters = std::stoi(value);
      } else if (key == "items_per_cluster") {
        spec.items_per_cluster = std::stoi(value);
      } else if (key == "words_per_cluster") {
        spec.words_per_cluster = std::stoi(value);
      } else if (key == "shared_words") {
        spec.shared_words = std::stoi(value);
      } else if (key == "shared_fraction") {
        spec.shared_fraction = std::stod(value);
      } else if (key == "name_words") {
        spec.name_words = std::stoi(value);
      } else if (key == "title_words") {
        spec.title_words = std::stoi(value);
      } else if (key == "description_words") {
        spec.description_words = std::stoi(value);
      } else if (key == "seed") {
        spec.seed = std::stoull(value);
      } else {
        throw ConfigError("unknown synthetic spec key '" + key + "'");
      }
    } catch (const std::logic_error&) {
      throw ConfigError("invalid value '" + value + "' for key '" + key + "'");
    }
  }
  spec.validate();
  return spec;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Triplet/MLM text metric learning: train, embed, rank, evaluate"};
  app.require_subcommand(1, 1);

  std::string config, data, out_path, checkpoint, embeddings, source,
      rankings, annotations, spec_path, out_data, out_annotations;
  std::optional<std::uint64_t> seed;
  bool all = false;
  std::vector<int> ks = {10, 100};

  auto* train_cmd = app.add_subcommand("train", "train an encoder");
  train_cmd->add_option("--config", config, "key = value config")->required();
  train_cmd->add_option("--data", data, "catalog file")->required();
  train_cmd->add_option("--out", out_path, "checkpoint path")->required();
  train_cmd->add_option("--seed", seed, "overrides the config seed");

  auto* embed_cmd = app.add_subcommand("embed", "embed a catalog");
  embed_cmd->add_option("--checkpoint", checkpoint)->required();
  embed_cmd->add_option("--data", data)->required();
  embed_cmd->add_option("--out", out_path)->required();

  auto* rank_cmd = app.add_subcommand("rank", "rank candidates per source");
  rank_cmd->add_option("--embeddings", embeddings)->required();
  auto* source_opt = rank_cmd->add_option("--source", source);
  auto* all_opt = rank_cmd->add_flag("--all", all);
  source_opt->excludes(all_opt);
  rank_cmd->add_option("--out", out_path)->required();

  auto* eval_cmd = app.add_subcommand("eval", "MPR/MRR/HR@k of rankings");
  eval_cmd->add_option("--rankings", rankings)->required();
  eval_cmd->add_option("--annotations", annotations)->required();
  eval_cmd->add_option("--k", ks)->delimiter(',');

  auto* ablate_cmd = app.add_subcommand("ablate", "train and score all variants");
  ablate_cmd->add_option("--config", config)->required();
  ablate_cmd->add_option("--data", data)->required();
  ablate_cmd->add_option("--annotations", annotations)->required();
  ablate_cmd->add_option("--out", out_path)->required();

  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic corpus");
  synth_cmd->add_option("--spec", spec_path)->required();
  synth_cmd->add_option("--out-data", out_data)->required();
  synth_cmd->add_option("--out-annotations", out_annotations)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << one_line(e.what()) << '\n';
    return kExitUsage;
  }

  try {
    if (train_cmd->parsed()) {
      require_file(config, "--config");
      require_file(data, "--data");
      TrainConfig cfg = TrainConfig::load(config);
      if (seed) cfg.seed = *seed;
      const Catalog catalog = load_catalog(data);
      const TrainReport report = train(catalog, cfg);
      save_checkpoint(out_path, report.checkpoint);
      write_file_atomic(metrics_path_for(out_path),
                        metrics_csv(report, cfg.seed));
    } else if (embed_cmd->parsed()) {
      require_file(checkpoint, "--checkpoint");
      require_file(data, "--data");
      const Checkpoint ckpt = load_checkpoint(checkpoint);
      const CatalogEmbeddings emb = embed_catalog(load_catalog(data), ckpt);
      write_file_atomic(out_path, to_text([&](std::ostream& s) {
                          write_embeddings(s, emb);
                        }));
      if (emb.truncated_texts > 0) {
        err << "warning: truncated " << emb.truncated_texts
            << " texts to max_seq_len\n";
      }
    } else if (rank_cmd->parsed()) {
      require_file(embeddings, "--embeddings");
      if (source.empty() && !all) {
        throw UsageError("rank needs --source <id> or --all");
      }
      std::ifstream in(embeddings);
      const CatalogEmbeddings emb = parse_embeddings(in, embeddings);
      Rankings result;
      if (all) {
        result = rank_all(emb.items);
      } else {
        result[source] = rank(source, emb.items);
      }
      write_file_atomic(out_path, rankings_csv(result, emb.seed));
    } else if (eval_cmd->parsed()) {
      require_file(rankings, "--rankings");
      require_file(annotations, "--annotations");
      for (int k : ks) {
        if (k < 1) throw UsageError("--k values must be >= 1");
      }
      const std::string text = read_file(rankings);
      std::istringstream in(text);
      const Rankings parsed = parse_rankings_csv(in, rankings);
      const AnnotationSet set =
          load_annotations(annotations, catalog_from_rankings(parsed));
      const std::string report =
          metric_report_csv(evaluate(parsed, set, ks), ks);
      if (const auto seed_line = seed_comment(text)) out << *seed_line << '\n';
      out << report;
    } else if (ablate_cmd->parsed()) {
      require_file(config, "--config");
      require_file(data, "--data");
      require_file(annotations, "--annotations");
      const TrainConfig cfg = TrainConfig::load(config);
      const Catalog catalog = load_catalog(data);
      const AnnotationSet set = load_annotations(annotations, catalog);
      if (set.empty()) throw EvaluationError("annotation set is empty");
      const auto rows =
          compare_variants(catalog, set, ablation_configs(cfg));
      for (const auto& row : rows) {
        if (!row.error.empty()) {
          err << "warning: variant " << row.variant
              << " failed: " << one_line(row.error) << '\n';
        }
      }
      write_file_atomic(out_path, variant_table_csv(rows, cfg.seed));
    } else if (synth_cmd->parsed()) {
      require_file(spec_path, "--spec");
      const SyntheticCorpus corpus =
          generate_synthetic(load_synthetic_spec(spec_path));
      write_file_atomic(out_data, to_text([&](std::ostream& s) {
                          write_catalog(s, corpus.catalog);
                        }));
      write_file_atomic(out_annotations, to_text([&](std::ostream& s) {
                          write_annotations(s, corpus.annotations);
                        }));
    }
  } catch (const UsageError& e) {
    err << "error: usage: " << one_line(e.what()) << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: usage: " << one_line(e.what()) << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.kind() << ": " << one_line(e.what()) << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: internal: " << one_line(e.what()) << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace tripletlm::cli
