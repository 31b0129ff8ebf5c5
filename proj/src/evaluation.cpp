#include "tripletlm/evaluation.hpp"

#include <algorithm>
#include <limits>
#include <unordered_map>

#include "tripletlm/errors.hpp"
#include "tripletlm/io.hpp"

namespace tripletlm {
namespace {

// 1-based ranks of the annotated items of one source, plus the list size.
struct SourceRanks {
  std::vector<int> ranks;
  int candidates = 0;
};

std::vector<SourceRanks> collect_ranks(const Rankings& rankings,
                                       const AnnotationSet& annotations) {
  if (annotations.empty()) {
    throw EvaluationError("annotation set is empty; nothing to evaluate");
  }
  std::vector<SourceRanks> out;
  out.reserve(annotations.size());
  for (const AnnotationEntry& entry : annotations.entries) {
    const auto it = rankings.find(entry.source_id);
    if (it == rankings.end()) {
      throw EvaluationError("no ranking for annotated source '" +
                            entry.source_id + "'");
    }
    const auto& list = it->second;
    if (list.size() < 2) {
      throw EvaluationError("ranking for '" + entry.source_id +
                            "' has fewer than 2 candidates");
    }
    std::unordered_map<std::string, int> position;
    for (std::size_t i = 0; i < list.size(); ++i) {
      position.emplace(list[i].item_id, static_cast<int>(i + 1));
    }
    SourceRanks sr;
    sr.candidates = static_cast<int>(list.size());
    for (const std::string& id : entry.similar_ids) {
      const auto pos = position.find(id);
      if (pos == position.end()) {
        throw EvaluationError("annotated id '" + id +
                              "' missing from the ranking of '" +
                              entry.source_id + "'");
      }
      sr.ranks.push_back(pos->second);
    }
    out.push_back(std::move(sr));
  }
  return out;
}

}  // namespace

double mean_percentile_rank(const Rankings& rankings,
                            const AnnotationSet& annotations) {
  double sum = 0.0;
  std::size_t pairs = 0;
  for (const SourceRanks& sr : collect_ranks(rankings, annotations)) {
    const double m = sr.candidates;
    for (int r : sr.ranks) {
      sum += (m - r) / (m - 1.0);
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

double mean_reciprocal_rank(const Rankings& rankings,
                            const AnnotationSet& annotations) {
  const auto all = collect_ranks(rankings, annotations);
  double sum = 0.0;
  for (const SourceRanks& sr : all) {
    sum += 1.0 / *std::min_element(sr.ranks.begin(), sr.ranks.end());
  }
  return sum / static_cast<double>(all.size());
}

double hit_ratio_at_k(const Rankings& rankings,
                      const AnnotationSet& annotations, int k) {
  if (k < 1) throw ContractViolation("k must be >= 1");
  std::size_t hits = 0;
  std::size_t pairs = 0;
  for (const SourceRanks& sr : collect_ranks(rankings, annotations)) {
    for (int r : sr.ranks) {
      hits += r <= k ? 1 : 0;
      ++pairs;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(pairs);
}

MetricReport evaluate(const Rankings& rankings,
                      const AnnotationSet& annotations,
                      const std::vector<int>& ks) {
  MetricReport report;
  report.mpr = mean_percentile_rank(rankings, annotations);
  report.mrr = mean_reciprocal_rank(rankings, annotations);
  for (int k : ks) report.hr_at[k] = hit_ratio_at_k(rankings, annotations, k);
  report.n_sources = annotations.size();
  for (const auto& e : annotations.entries) report.n_pairs += e.similar_ids.size();
  return report;
}

std::string metric_report_csv(const MetricReport& report,
                              const std::vector<int>& ks) {
  std::string header = "mpr,mrr";
  std::string row = format_fixed(report.mpr) + "," + format_fixed(report.mrr);
  for (int k : ks) {
    header += ",hr" + std::to_string(k);
    row += "," + format_fixed(report.hr_at.at(k));
  }
  return header + "\n" + row + "\n";
}

VariantRun run_variant(const Catalog& catalog, const AnnotationSet& annotations,
                       const TrainConfig& cfg, const std::vector<int>& ks) {
  VariantRun run;
  run.training = train(catalog, cfg);
  run.embeddings = embed_catalog(catalog, run.training.checkpoint);
  for (const AnnotationEntry& e : annotations.entries) {
    run.rankings[e.source_id] = rank(e.source_id, run.embeddings.items);
  }
  run.metrics = evaluate(run.rankings, annotations, ks);
  return run;
}

std::vector<VariantRow> compare_variants(
    const Catalog& catalog, const AnnotationSet& annotations,
    const std::vector<TrainConfig>& configs) {
  std::vector<VariantRow> rows;
  rows.reserve(configs.size());
  for (const TrainConfig& cfg : configs) {
    VariantRow row{std::string(to_string(cfg.loss_variant)), std::nullopt, {}};
    try {
      row.metrics = run_variant(catalog, annotations, cfg).metrics;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<TrainConfig> ablation_configs(const TrainConfig& cfg) {
  std::vector<TrainConfig> out;
  for (LossVariant v : all_loss_variants()) {
    TrainConfig c = cfg;
    c.loss_variant = v;
    out.push_back(c);
  }
  return out;
}

std::string variant_table_csv(const std::vector<VariantRow>& rows,
                              std::uint64_t seed) {
  std::string out = "# seed=" + std::to_string(seed) + "\n";
  out += "variant,mpr,mrr,hr10,hr100\n";
  for (const VariantRow& row : rows) {
    out += row.variant;
    if (row.metrics) {
      const MetricReport& m = *row.metrics;
      auto hr = [&](int k) {
        const auto it = m.hr_at.find(k);
        return it == m.hr_at.end() ? std::string("nan") : format_fixed(it->second);
      };
      out += "," + format_fixed(m.mpr) + "," + format_fixed(m.mrr) + "," +
             hr(10) + "," + hr(100);
    } else {
      out += ",nan,nan,nan,nan";
    }
    out += "\n";
  }
  return out;
}

}  // namespace tripletlm
