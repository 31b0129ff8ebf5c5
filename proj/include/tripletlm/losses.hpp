#pragma once

#include <span>

#include "tripletlm/geometry.hpp"
#include "tripletlm/matrix.hpp"

namespace tripletlm {

/// Distance plugged into the triplet hinge and into mining. `cosine` is the
/// (1 - C)/2 substitute used by the cosine-metric ablation; both lie in [0, 1].
enum class DistanceKind { angular, cosine };

double distance(VectorView u, VectorView v, DistanceKind kind);
// Gradient of distance(u, v) with respect to u.
Vector distance_gradient(VectorView u, VectorView v, DistanceKind kind);

struct TripletLossConfig {
  double margin = 0.1;  // angular-distance units, in [0, 1]
  void validate() const;
};

struct TripletLossResult {
  double loss = 0.0;
  bool active = false;
  Vector grad_anchor;
  Vector grad_positive;
  Vector grad_negative;
};

/// max(0, m + d(a, p) - d(a, n)).
double triplet_loss(VectorView anchor, VectorView positive, VectorView negative,
                    const TripletLossConfig& cfg,
                    DistanceKind kind = DistanceKind::angular);

/// Loss plus gradients for all three embeddings. When the hinge is inactive
/// (argument <= 0) every gradient is exactly zero.
TripletLossResult triplet_loss_with_gradients(
    VectorView anchor, VectorView positive, VectorView negative,
    const TripletLossConfig& cfg, DistanceKind kind = DistanceKind::angular);

/// Margins for the pair objective [m_pos - s_p]_+ + [s_n - m_neg]_+ over
/// cosine similarities.
struct PairLossConfig {
  double m_pos = 1.0;
  double m_neg = 0.0;

  static PairLossConfig contrastive() { return {1.0, 0.0}; }
  static PairLossConfig cosine() { return {1.0, -1.0}; }
  void validate() const;
};

struct PairLossResult {
  double loss = 0.0;
  double d_positive = 0.0;  // dL/ds_p
  double d_negative = 0.0;  // dL/ds_n
};

double pair_loss(double s_p, double s_n, const PairLossConfig& cfg);
PairLossResult pair_loss_with_gradients(double s_p, double s_n,
                                        const PairLossConfig& cfg);

struct CrossEntropyResult {
  double loss_sum = 0.0;
  Matrix grad;  // d(loss_sum)/d(scores)
};

/// Softmax cross-entropy summed over rows of `scores` against `targets`.
CrossEntropyResult cross_entropy_sum(const Matrix& scores,
                                     std::span<const int> targets);

/// Mean softmax cross-entropy over masked positions; 0 when there are none.
double mlm_loss(const Matrix& scores, std::span<const int> targets);

struct LossBreakdown {
  double mlm = 0.0;
  double metric = 0.0;
  double total = 0.0;
  double lambda = 1.0;
};

/// total = mlm + lambda * metric.
LossBreakdown total_loss(double mlm, double metric, double lambda);

}  // namespace tripletlm
