#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tripletlm/geometry.hpp"
#include "tripletlm/losses.hpp"
#include "tripletlm/rng.hpp"

namespace tripletlm {

enum class ElementRole { anchor, positive };

/// A negative drawn from the batch: the element `role` of item `item`.
struct NegativeRef {
  std::size_t item = 0;
  ElementRole role = ElementRole::anchor;
  bool operator==(const NegativeRef&) const = default;
};

/// Pooled embeddings of one batch. anchors[i] and positives[i] are the two
/// textual elements of item i.
struct BatchEmbeddings {
  std::vector<Vector> anchors;
  std::vector<Vector> positives;
  std::vector<std::string> item_ids;

  std::size_t size() const { return anchors.size(); }
  void validate() const;
  const Vector& element(const NegativeRef& ref) const {
    return ref.role == ElementRole::anchor ? anchors[ref.item]
                                           : positives[ref.item];
  }
};

/// For every anchor i, the element of another item nearest to anchors[i].
/// Both elements of every other item are candidates; ties go to the lowest
/// item index, anchor before positive. Throws MiningError for batches < 2.
std::vector<NegativeRef> mine_hard_negatives(
    const BatchEmbeddings& batch, DistanceKind kind = DistanceKind::angular);

/// Uniform over the elements of items other than i, reproducible from `rng`.
std::vector<NegativeRef> sample_random_negatives(std::size_t batch_size,
                                                 Rng& rng);
std::vector<NegativeRef> sample_random_negatives(const BatchEmbeddings& batch,
                                                 Rng& rng);

std::vector<std::size_t> item_indices(const std::vector<NegativeRef>& refs);

}  // namespace tripletlm
