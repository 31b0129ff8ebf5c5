#include "tripletlm/mining.hpp"

#include <limits>

#include "tripletlm/errors.hpp"

namespace tripletlm {
namespace {

void require_minable(std::size_t n) {
  if (n < 2) {
    throw MiningError("negative mining needs a batch of at least 2 items, got " +
                      std::to_string(n));
  }
}

}  // namespace

void BatchEmbeddings::validate() const {
  if (positives.size() != anchors.size() ||
      (!item_ids.empty() && item_ids.size() != anchors.size())) {
    throw ContractViolation("batch embedding lists differ in length");
  }
  require_minable(anchors.size());
}

std::vector<NegativeRef> mine_hard_negatives(const BatchEmbeddings& batch,
                                             DistanceKind kind) {
  batch.validate();
  const std::size_t n = batch.size();
  std::vector<NegativeRef> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    NegativeRef best;
    double best_distance = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      for (ElementRole role : {ElementRole::anchor, ElementRole::positive}) {
        const NegativeRef candidate{j, role};
        const double dist =
            distance(batch.anchors[i], batch.element(candidate), kind);
        if (dist < best_distance) {
          best_distance = dist;
          best = candidate;
        }
      }
    }
    out.push_back(best);
  }
  return out;
}

std::vector<NegativeRef> sample_random_negatives(std::size_t batch_size,
                                                 Rng& rng) {
  require_minable(batch_size);
  std::vector<NegativeRef> out;
  out.reserve(batch_size);
  const std::uint64_t choices = 2 * (batch_size - 1);
  for (std::size_t i = 0; i < batch_size; ++i) {
    const std::uint64_t k = rng.uniform_index(choices);
    std::size_t item = static_cast<std::size_t>(k / 2);
    if (item >= i) ++item;
    out.push_back(
        {item, k % 2 == 0 ? ElementRole::anchor : ElementRole::positive});
  }
  return out;
}

std::vector<NegativeRef> sample_random_negatives(const BatchEmbeddings& batch,
                                                 Rng& rng) {
  batch.validate();
  return sample_random_negatives(batch.size(), rng);
}

std::vector<std::size_t> item_indices(const std::vector<NegativeRef>& refs) {
  std::vector<std::size_t> out;
  out.reserve(refs.size());
  for (const auto& r : refs) out.push_back(r.item);
  return out;
}

}  // namespace tripletlm
