#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tripletlm/data.hpp"
#include "tripletlm/inference.hpp"
#include "tripletlm/trainer.hpp"

namespace tripletlm {

/// Percentile of a relevant item at 1-based rank r among M candidates is
/// (M - r)/(M - 1), averaged over all (source, relevant) pairs. 1 is perfect,
/// 0.5 is what a random order gives.
double mean_percentile_rank(const Rankings& rankings,
                            const AnnotationSet& annotations);

/// Mean over sources of 1/(rank of the first relevant candidate).
double mean_reciprocal_rank(const Rankings& rankings,
                            const AnnotationSet& annotations);

/// Fraction of (source, relevant) pairs ranked within the top k.
double hit_ratio_at_k(const Rankings& rankings,
                      const AnnotationSet& annotations, int k);

struct MetricReport {
  double mpr = 0.0;
  double mrr = 0.0;
  std::map<int, double> hr_at;
  std::size_t n_sources = 0;
  std::size_t n_pairs = 0;
  bool operator==(const MetricReport&) const = default;
};

MetricReport evaluate(const Rankings& rankings,
                      const AnnotationSet& annotations,
                      const std::vector<int>& ks = {10, 100});

/// Header "mpr,mrr,hr<k>..." and one row.
std::string metric_report_csv(const MetricReport& report,
                              const std::vector<int>& ks);

/// Training, embedding, ranking and evaluation of one configuration.
struct VariantRun {
  TrainReport training;
  CatalogEmbeddings embeddings;
  Rankings rankings;
  MetricReport metrics;
};

VariantRun run_variant(const Catalog& catalog,
                       const AnnotationSet& annotations,
                       const TrainConfig& cfg,
                       const std::vector<int>& ks = {10, 100});

struct VariantRow {
  std::string variant;
  std::optional<MetricReport> metrics;
  std::string error;  // set when the row failed
};

/// One row per config; a failing row records its error and the rest run.
std::vector<VariantRow> compare_variants(const Catalog& catalog,
                                         const AnnotationSet& annotations,
                                         const std::vector<TrainConfig>& configs);

/// `cfg` once per loss variant, full method first.
std::vector<TrainConfig> ablation_configs(const TrainConfig& cfg);

/// variant,mpr,mrr,hr10,hr100 with `nan` fields for failed rows.
std::string variant_table_csv(const std::vector<VariantRow>& rows,
                              std::uint64_t seed);

}  // namespace tripletlm
