// Acceptance suite: one PASS/FAIL line per criterion, exit status = number of
// failed criteria. `--report <path>` also writes the report to a file;
// `--only 1,2,...` restricts the run to the listed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "test_support.hpp"
#include "tripletlm/cli.hpp"
#include "tripletlm/evaluation.hpp"
#include "tripletlm/io.hpp"
#include "tripletlm/losses.hpp"
#include "tripletlm/mining.hpp"
#include "tripletlm/trainer.hpp"

using namespace tripletlm;
using tripletlm::testing::central_difference;
using tripletlm::testing::random_vector;
using tripletlm::testing::reference_cosine;
using tripletlm::testing::relative_error;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

struct Verdict {
  bool pass = false;
  std::string summary;
  std::vector<std::string> details;
};

double reference_angular(const Vector& u, const Vector& v) {
  return std::acos(std::clamp(reference_cosine(u, v), -1.0, 1.0)) / std::numbers::pi;
}

// ---------------------------------------------------------------------------
// 1. Gradient suites

double encoder_instance_error(Rng& rng) {
  EncoderConfig cfg;
  cfg.vocab_size = 11;
  cfg.d_model = 4;
  cfg.n_layers = 1;
  cfg.n_heads = 2;
  cfg.max_seq_len = 3;
  cfg.seed = rng.next_u64();
  EncoderParams params = initialize_params(cfg);
  params.for_each([&](const std::string&, std::span<double> v, const auto&) {
    for (double& x : v) x += 0.3 * rng.normal();
  });
  Encoder enc(cfg, params);

  std::vector<int> ids(3);
  for (int& id : ids) id = kNumSpecialTokens + static_cast<int>(rng.uniform_index(8));
  TokenSequence seq = TokenSequence::unmasked(ids);
  for (int pos = 0; pos < 3; ++pos) {
    if (rng.bernoulli(0.5)) {
      seq.mask_positions.push_back(pos);
      seq.original_ids.push_back(ids[pos]);
      seq.token_ids[pos] = kMaskId;
    }
  }
  EncoderUpstream up{random_vector(rng, 4), Matrix(seq.mask_positions.size(), 11)};
  for (double& x : up.mlm_scores.data) x = rng.normal();

  auto probe = [&] {
    const EncoderOutput out = enc.encode(seq);
    double total = 0.0;
    for (std::size_t i = 0; i < 4; ++i) total += up.pooled[i] * out.pooled[i];
    for (std::size_t i = 0; i < out.mlm_scores.data.size(); ++i) {
      total += up.mlm_scores.data[i] * out.mlm_scores.data[i];
    }
    return total;
  };
  const EncoderParams analytic = enc.backward(seq, up);
  std::map<std::string, std::vector<double>> fd;
  const double h = 1e-4;
  enc.mutable_params().for_each([&](const std::string& name, std::span<double> v, const auto&) {
    for (double& x : v) {
      const double saved = x;
      x = saved + h;
      const double hi = probe();
      x = saved - h;
      const double lo = probe();
      x = saved;
      fd[name].push_back((hi - lo) / (2 * h));
    }
  });
  // Relative to each tensor's gradient scale; tensors whose gradient
  // vanishes identically (e.g. the key bias) are held to an absolute floor.
  double worst = 0.0;
  analytic.for_each([&](const std::string& name, std::span<const double> v, const auto&) {
    const auto& ref = fd.at(name);
    double scale = 0.0, diff = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      scale = std::max(scale, std::abs(ref[i]));
      diff = std::max(diff, std::abs(v[i] - ref[i]));
    }
    worst = std::max(worst, scale > 1e-8 ? diff / scale : diff / 1e-8 * 1e-4);
  });
  return worst;
}

Verdict criterion_gradients() {
  const auto start = Clock::now();
  Rng rng(101);
  const int pairs = 1000, triplets = 500, encoders = 500;
  double cos_err = 0, ang_err = 0, trip_err = 0, enc_err = 0;
  for (int k = 0; k < pairs; ++k) {
    Vector u, v;
    do {
      u = random_vector(rng, 8);
      v = random_vector(rng, 8);
    } while (std::abs(reference_cosine(u, v)) > 0.99);
    cos_err = std::max(cos_err, relative_error(cosine_gradient(u, v),
                                               central_difference([&](const Vector& x) {
                                                 return reference_cosine(x, v);
                                               }, u, 1e-5)));
    ang_err = std::max(ang_err, relative_error(angular_gradient(u, v),
                                               central_difference([&](const Vector& x) {
                                                 return reference_angular(x, v);
                                               }, u, 1e-5)));
  }
  const TripletLossConfig tcfg{0.1};
  for (int k = 0; k < triplets;) {
    const Vector a = random_vector(rng, 8), p = random_vector(rng, 8), n = random_vector(rng, 8);
    if (std::max({std::abs(reference_cosine(a, p)), std::abs(reference_cosine(a, n))}) > 0.99) continue;
    if (tcfg.margin + reference_angular(a, p) - reference_angular(a, n) < 1e-3) continue;
    auto hinge = [&](const Vector& aa, const Vector& pp, const Vector& nn) {
      return std::max(0.0, tcfg.margin + reference_angular(aa, pp) - reference_angular(aa, nn));
    };
    const TripletLossResult r = triplet_loss_with_gradients(a, p, n, tcfg);
    trip_err = std::max({trip_err,
                         relative_error(r.grad_anchor, central_difference(
                             [&](const Vector& x) { return hinge(x, p, n); }, a, 1e-5)),
                         relative_error(r.grad_positive, central_difference(
                             [&](const Vector& x) { return hinge(a, x, n); }, p, 1e-5)),
                         relative_error(r.grad_negative, central_difference(
                             [&](const Vector& x) { return hinge(a, p, x); }, n, 1e-5))});
    ++k;
  }
  for (int k = 0; k < encoders; ++k) enc_err = std::max(enc_err, encoder_instance_error(rng));
  const double elapsed = seconds_since(start);

  Verdict v;
  v.pass = cos_err < 1e-5 && ang_err < 1e-5 && trip_err < 1e-5 && enc_err < 1e-4 && elapsed < 60.0;
  v.summary = fmt("gradient suites: worst relative error cosine %.2e, angular %.2e, triplet %.2e "
                  "(limit 1e-5), encoder %.2e (limit 1e-4); %.1f s (limit 60 s)",
                  cos_err, ang_err, trip_err, enc_err, elapsed);
  v.details.push_back(fmt("instances: %d cosine, %d angular, %d triplet, %d toy encoders "
                          "(d_model 4, 1 layer, vocab 11, 3 tokens, every parameter)",
                          pairs, pairs, triplets, encoders));
  return v;
}

// ---------------------------------------------------------------------------
// 2. Mining oracle

Verdict criterion_mining() {
  Rng rng(202);
  int agree = 0;
  const int batches = 100;
  for (int b = 0; b < batches; ++b) {
    const std::size_t n = 2 + rng.uniform_index(15);
    BatchEmbeddings batch;
    for (std::size_t i = 0; i < n; ++i) {
      batch.anchors.push_back(random_vector(rng, 6));
      batch.positives.push_back(random_vector(rng, 6));
      batch.item_ids.push_back(std::to_string(i));
    }
    std::vector<NegativeRef> expected;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      NegativeRef pick;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        for (ElementRole role : {ElementRole::anchor, ElementRole::positive}) {
          const NegativeRef ref{j, role};
          const double d = reference_angular(batch.anchors[i], batch.element(ref));
          if (d < best) {
            best = d;
            pick = ref;
          }
        }
      }
      expected.push_back(pick);
    }
    if (mine_hard_negatives(batch) == expected) ++agree;
  }
  return {agree == batches,
          fmt("mining oracle: %d/%d random batches (size 2..16) agree with brute force", agree,
              batches),
          {}};
}

// ---------------------------------------------------------------------------
// 3. Ranking oracle

Verdict criterion_ranking() {
  Rng rng(303);
  int agree = 0, invariant = 0;
  const int catalogs = 20;
  for (int c = 0; c < catalogs; ++c) {
    const std::size_t n = 2 + rng.uniform_index(49);
    std::vector<ItemEmbedding> items, scaled;
    for (std::size_t i = 0; i < n; ++i) {
      items.push_back({"it" + std::to_string(1000 + rng.uniform_index(9000)) + "_" +
                           std::to_string(i),
                       random_vector(rng, 8), random_vector(rng, 8)});
    }
    for (const auto& it : items) {
      ItemEmbedding s = it;
      const double a = std::exp(3 * rng.normal()), b = std::exp(3 * rng.normal());
      for (double& x : s.title_vec) x *= a;
      for (double& x : s.desc_vec) x *= b;
      scaled.push_back(s);
    }
    bool ok = true, inv = true;
    for (const auto& source : items) {
      std::vector<std::pair<double, std::string>> table;
      for (const auto& cand : items) {
        if (cand.item_id == source.item_id) continue;
        table.emplace_back(reference_angular(source.title_vec, cand.title_vec) +
                               reference_angular(source.desc_vec, cand.desc_vec),
                           cand.item_id);
      }
      std::sort(table.begin(), table.end());
      const auto r = rank(source.item_id, items);
      const auto rs = rank(source.item_id, scaled);
      for (std::size_t k = 0; k < table.size(); ++k) {
        ok = ok && r[k].item_id == table[k].second && r[k].rank == static_cast<int>(k + 1);
        inv = inv && rs[k].item_id == r[k].item_id;
      }
    }
    agree += ok;
    invariant += inv;
  }
  return {agree == catalogs && invariant == catalogs,
          fmt("ranking oracle: %d/%d catalogs (<= 50 items) match brute-force sort, "
              "%d/%d unchanged under positive rescaling",
              agree, catalogs, invariant, catalogs),
          {}};
}

// ---------------------------------------------------------------------------
// 4. Metric oracles

Verdict criterion_metrics() {
  Rng rng(404);
  int agree = 0;
  const int fixtures = 50;
  auto shuffled = [&](int m) {
    std::vector<std::string> ids;
    for (int i = 0; i < m; ++i) ids.push_back("c" + std::to_string(i));
    for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rng.uniform_index(i)]);
    return ids;
  };
  auto as_ranking = [](const std::vector<std::string>& ids) {
    std::vector<RankedCandidate> r;
    for (std::size_t i = 0; i < ids.size(); ++i) r.push_back({ids[i], static_cast<int>(i + 1), 0.0});
    return r;
  };
  for (int f = 0; f < fixtures; ++f) {
    const int m = 2 + static_cast<int>(rng.uniform_index(40));
    const int sources = 1 + static_cast<int>(rng.uniform_index(12));
    Rankings rankings;
    AnnotationSet ann;
    double pr_sum = 0, rr_sum = 0;
    int pairs = 0;
    const int k = 1 + static_cast<int>(rng.uniform_index(m));
    int hits = 0;
    for (int s = 0; s < sources; ++s) {
      const auto order = shuffled(m);
      const std::string src = "s" + std::to_string(s);
      rankings[src] = as_ranking(order);
      const auto pool = shuffled(m);
      const int n_rel = 1 + static_cast<int>(rng.uniform_index(std::min(m, 6)));
      AnnotationEntry e{src, {pool.begin(), pool.begin() + n_rel}};
      int first = m + 1;
      for (const auto& id : e.similar_ids) {
        const int r = static_cast<int>(std::find(order.begin(), order.end(), id) - order.begin()) + 1;
        pr_sum += static_cast<double>(m - r) / (m - 1);
        hits += r <= k;
        first = std::min(first, r);
        ++pairs;
      }
      rr_sum += 1.0 / first;
      ann.entries.push_back(e);
    }
    const bool ok = std::abs(mean_percentile_rank(rankings, ann) - pr_sum / pairs) < 1e-12 &&
                    std::abs(mean_reciprocal_rank(rankings, ann) - rr_sum / sources) < 1e-12 &&
                    std::abs(hit_ratio_at_k(rankings, ann, k) - static_cast<double>(hits) / pairs) < 1e-12;
    agree += ok;
  }
  // Uniformly random rankings.
  Rankings rankings;
  AnnotationSet ann;
  std::size_t pairs = 0;
  for (int s = 0; s < 200; ++s) {
    const std::string src = "s" + std::to_string(s);
    rankings[src] = as_ranking(shuffled(50));
    const auto pool = shuffled(50);
    ann.entries.push_back({src, {pool.begin(), pool.begin() + 6}});
    pairs += 6;
  }
  const double mpr = mean_percentile_rank(rankings, ann);
  return {agree == fixtures && std::abs(mpr - 0.5) <= 0.05,
          fmt("metric oracles: %d/%d fixtures match hand computation (MPR, MRR, HR@k); "
              "random rankings MPR %.4f over %zu pairs (target 0.5 +/- 0.05)",
              agree, fixtures, mpr, pairs),
          {}};
}

// ---------------------------------------------------------------------------
// 5 and 6. Ablation directions and collapse

double median_pairwise_cosine(const CatalogEmbeddings& emb) {
  std::vector<Vector> vecs;
  for (const auto& it : emb.items) {
    vecs.push_back(it.title_vec);
    vecs.push_back(it.desc_vec);
  }
  std::vector<double> cos;
  for (std::size_t i = 0; i < vecs.size(); ++i) {
    for (std::size_t j = i + 1; j < vecs.size(); ++j) cos.push_back(cosine_similarity(vecs[i], vecs[j]));
  }
  std::nth_element(cos.begin(), cos.begin() + cos.size() / 2, cos.end());
  return cos[cos.size() / 2];
}

struct AblationResults {
  std::vector<std::uint64_t> seeds;
  std::map<LossVariant, std::vector<double>> mpr;
  std::map<LossVariant, std::vector<double>> median_cos;
  double training_seconds = 0.0;
};

const AblationResults& ablation_results() {
  static const AblationResults results = [] {
    AblationResults r;
    const SyntheticCorpus corpus = generate_synthetic(SyntheticSpec{});
    r.seeds = {kDefaultSeed, kDefaultSeed + 1, kDefaultSeed + 2};
    for (std::uint64_t seed : r.seeds) {
      TrainConfig base;
      base.seed = seed;
      for (const TrainConfig& cfg : ablation_configs(base)) {
        const VariantRun run = run_variant(corpus.catalog, corpus.annotations, cfg);
        r.mpr[cfg.loss_variant].push_back(run.metrics.mpr);
        r.median_cos[cfg.loss_variant].push_back(median_pairwise_cosine(run.embeddings));
        r.training_seconds += run.training.seconds;
        std::cerr << fmt("  [ablation] seed %llu %-22s mpr %.4f median cos %.4f (%.1f s)\n",
                         static_cast<unsigned long long>(seed),
                         std::string(to_string(cfg.loss_variant)).c_str(), run.metrics.mpr,
                         r.median_cos[cfg.loss_variant].back(), run.training.seconds);
      }
    }
    return r;
  }();
  return results;
}

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

Verdict criterion_ablation() {
  const AblationResults& r = ablation_results();
  const double full = mean(r.mpr.at(LossVariant::triplet_hard));
  Verdict v;
  v.pass = r.training_seconds <= 600.0;
  std::string failures;
  for (LossVariant variant : all_loss_variants()) {
    const double m = mean(r.mpr.at(variant));
    std::string row = fmt("%-22s mean MPR %.4f (seeds:", std::string(to_string(variant)).c_str(), m);
    for (double x : r.mpr.at(variant)) row += fmt(" %.4f", x);
    row += ")";
    if (variant == LossVariant::triplet_hard) {
      v.details.push_back(row);
      continue;
    }
    bool ok = full >= m - 0.02;
    std::string need = "full >= variant - 0.02";
    if (variant == LossVariant::triplet_no_mlm || variant == LossVariant::triplet_cosine_metric) {
      ok = ok && full - m >= 0.03;
      need += " and full - variant >= 0.03";
    }
    row += fmt("  full - variant = %+.4f  [%s] %s", full - m, need.c_str(), ok ? "ok" : "VIOLATED");
    v.details.push_back(row);
    if (!ok) failures += std::string(failures.empty() ? "" : ", ") + std::string(to_string(variant));
    v.pass = v.pass && ok;
  }
  v.summary = fmt("directional ablation over 3 seeds: full method mean MPR %.4f; training %.0f s "
                  "(limit 600 s)",
                  full, r.training_seconds);
  if (!failures.empty()) v.summary += "; violated for " + failures;
  return v;
}

Verdict criterion_collapse() {
  const AblationResults& r = ablation_results();
  const auto& cosine = r.median_cos.at(LossVariant::triplet_cosine_metric);
  const auto& full = r.median_cos.at(LossVariant::triplet_hard);
  bool pass = true;
  std::string per_seed;
  for (std::size_t i = 0; i < r.seeds.size(); ++i) {
    pass = pass && cosine[i] > 0.99 && full[i] < 0.9;
    per_seed += fmt(" seed %llu: %.4f vs %.4f;", static_cast<unsigned long long>(r.seeds[i]),
                    cosine[i], full[i]);
  }
  return {pass,
          fmt("collapse: median pairwise cosine, cosine-metric variant (need > 0.99) vs full "
              "method (need < 0.9):%s",
              per_seed.c_str()),
          {}};
}

// ---------------------------------------------------------------------------
// 7. Pair-variant equivalence

Verdict criterion_pair_equivalence() {
  const SyntheticCorpus corpus = generate_synthetic(SyntheticSpec{});
  TrainConfig cfg;
  cfg.steps = 200;
  cfg.encoder.init = InitMode::positive_orthant;
  cfg.loss_variant = LossVariant::contrastive_pair;
  const TrainReport contrastive = train(corpus.catalog, cfg);
  cfg.loss_variant = LossVariant::cosine_pair;
  const TrainReport cosine = train(corpus.catalog, cfg);

  // The cosine margins (1, -1) add exactly m_neg(contrastive) - m_neg(cosine)
  // to every active negative hinge; with s_n >= 0 every hinge is active.
  const double offset = PairLossConfig::contrastive().m_neg - PairLossConfig::cosine().m_neg;
  double worst_mlm = 0, worst_metric = 0, worst_total = 0, raw_total = 0;
  const std::size_t steps = contrastive.series.size();
  bool same_length = steps == cosine.series.size() && steps == 200;
  for (std::size_t i = 0; same_length && i < steps; ++i) {
    const auto& a = contrastive.series[i];
    const auto& b = cosine.series[i];
    worst_mlm = std::max(worst_mlm, std::abs(a.mlm - b.mlm));
    worst_metric = std::max(worst_metric, std::abs((b.metric - a.metric) - offset));
    worst_total = std::max(worst_total, std::abs((b.total - a.total) - cfg.lambda * offset));
    raw_total = std::max(raw_total, std::abs(b.total - a.total));
  }
  const bool same_params = contrastive.checkpoint.params == cosine.checkpoint.params;
  Verdict v;
  v.pass = same_length && worst_mlm <= 1e-12 && worst_metric <= 1e-12 && worst_total <= 1e-12 &&
           same_params;
  v.summary = fmt("pair-variant equivalence, 200 steps, positive-orthant init: max |mlm diff| %.1e, "
                  "max |metric diff - %.1f| %.1e, max |total diff - %.1f| %.1e (limit 1e-12); "
                  "final parameters %s",
                  worst_mlm, offset, worst_metric, offset, worst_total,
                  same_params ? "bit-identical" : "DIFFER");
  v.details.push_back(fmt("raw per-step total-loss difference is the constant margin offset "
                          "(max %.6f); losses are compared net of it",
                          raw_total));
  return v;
}

// ---------------------------------------------------------------------------
// 8. Determinism through the command-line pipeline

std::map<std::string, std::string> cli_pipeline(const tripletlm::testing::TempDir& dir) {
  const auto p = [&](const char* name) { return (dir / name).string(); };
  std::ofstream(dir / "spec.txt") << "seed = 1234\n";
  std::ofstream(dir / "config.txt") << "steps = 300\nseed = 1234\n";
  std::map<std::string, std::string> out;
  auto run = [&](std::vector<std::string> args, const std::string& label) {
    args.insert(args.begin(), "tripletlm");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream o, e;
    const int code = tripletlm::cli::run(static_cast<int>(argv.size()), argv.data(), o, e);
    if (code != 0) throw std::runtime_error(label + " failed: " + e.str());
    return o.str();
  };
  run({"synth", "--spec", p("spec.txt"), "--out-data", p("data.jsonl"), "--out-annotations",
       p("ann.jsonl")}, "synth");
  run({"train", "--config", p("config.txt"), "--data", p("data.jsonl"), "--out", p("model.ckpt")},
      "train");
  run({"embed", "--checkpoint", p("model.ckpt"), "--data", p("data.jsonl"), "--out",
       p("emb.jsonl")}, "embed");
  run({"rank", "--embeddings", p("emb.jsonl"), "--all", "--out", p("ranks.csv")}, "rank");
  out["eval"] = run({"eval", "--rankings", p("ranks.csv"), "--annotations", p("ann.jsonl")}, "eval");
  for (const char* f : {"model.ckpt", "model.ckpt.metrics.csv", "emb.jsonl", "ranks.csv"}) {
    out[f] = read_file(dir / f);
  }
  return out;
}

Verdict criterion_determinism() {
  tripletlm::testing::TempDir first, second;
  const auto a = cli_pipeline(first);
  const auto b = cli_pipeline(second);
  std::string mismatched;
  for (const auto& [name, bytes] : a) {
    if (b.at(name) != bytes) mismatched += " " + name;
  }
  Verdict v;
  v.pass = mismatched.empty();
  v.summary = v.pass ? "determinism: checkpoint, training metrics CSV, embeddings, rankings CSV "
                       "and evaluation CSV byte-identical across two runs"
                     : "determinism: outputs differ:" + mismatched;
  v.details.push_back(fmt("checkpoint %zu bytes, rankings %zu bytes; evaluation: %s",
                          a.at("model.ckpt").size(), a.at("ranks.csv").size(),
                          a.at("eval").substr(a.at("eval").rfind('\n', a.at("eval").size() - 2) + 1,
                                              std::string::npos).c_str()));
  if (!v.details.back().empty() && v.details.back().back() == '\n') v.details.back().pop_back();
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  std::string report_path;
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--report" && i + 1 < argc) {
      report_path = argv[++i];
    } else if (arg == "--only" && i + 1 < argc) {
      std::stringstream list(argv[++i]);
      for (std::string item; std::getline(list, item, ',');) only.insert(std::stoi(item));
    } else {
      std::cerr << "usage: acceptance [--report PATH] [--only 1,2,...]\n";
      return 64;
    }
  }

  const std::vector<std::pair<int, std::function<Verdict()>>> criteria{
      {1, criterion_gradients},   {2, criterion_mining},
      {3, criterion_ranking},     {4, criterion_metrics},
      {5, criterion_ablation},    {6, criterion_collapse},
      {7, criterion_pair_equivalence}, {8, criterion_determinism}};

  std::ostringstream report;
  int failed = 0;
  for (const auto& [id, check] : criteria) {
    if (!only.empty() && !only.count(id)) continue;
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("harness error: ") + e.what(), {}};
    }
    failed += v.pass ? 0 : 1;
    const std::string line = fmt("criterion %d: %s  ", id, v.pass ? "PASS" : "FAIL") + v.summary;
    std::cout << line << '\n';
    report << line << '\n';
    for (const auto& d : v.details) {
      std::cout << "    " << d << '\n';
      report << "    " << d << '\n';
    }
    std::cout.flush();
  }
  std::cout << (failed == 0 ? "acceptance: all criteria passed" : fmt("acceptance: %d criteria failed", failed))
            << '\n';
  if (!report_path.empty()) write_file_atomic(report_path, report.str());
  return failed;
}
