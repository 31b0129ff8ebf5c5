#include "tripletlm/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tripletlm/errors.hpp"

namespace tripletlm {

double distance(VectorView u, VectorView v, DistanceKind kind) {
  if (kind == DistanceKind::angular) return angular_distance(u, v);
  return 0.5 * (1.0 - cosine_similarity(u, v));
}

Vector distance_gradient(VectorView u, VectorView v, DistanceKind kind) {
  if (kind == DistanceKind::angular) return angular_gradient(u, v);
  Vector g = cosine_gradient(u, v);
  for (double& x : g) x *= -0.5;
  return g;
}

void TripletLossConfig::validate() const {
  if (!(margin >= 0.0 && margin <= 1.0)) {
    throw ConfigError("triplet margin must lie in [0, 1], got " +
                      std::to_string(margin));
  }
}

double triplet_loss(VectorView anchor, VectorView positive, VectorView negative,
                    const TripletLossConfig& cfg, DistanceKind kind) {
  const double arg = cfg.margin + distance(anchor, positive, kind) -
                     distance(anchor, negative, kind);
  return std::max(0.0, arg);
}

TripletLossResult triplet_loss_with_gradients(VectorView anchor,
                                              VectorView positive,
                                              VectorView negative,
                                              const TripletLossConfig& cfg,
                                              DistanceKind kind) {
  TripletLossResult out;
  const std::size_t dim = anchor.size();
  const double arg = cfg.margin + distance(anchor, positive, kind) -
                     distance(anchor, negative, kind);
  if (!(arg > 0.0)) {
    out.grad_anchor.assign(dim, 0.0);
    out.grad_positive.assign(positive.size(), 0.0);
    out.grad_negative.assign(negative.size(), 0.0);
    return out;
  }
  out.loss = arg;
  out.active = true;
  out.grad_anchor = distance_gradient(anchor, positive, kind);
  const Vector away = distance_gradient(anchor, negative, kind);
  for (std::size_t i = 0; i < dim; ++i) out.grad_anchor[i] -= away[i];
  out.grad_positive = distance_gradient(positive, anchor, kind);
  out.grad_negative = distance_gradient(negative, anchor, kind);
  for (double& g : out.grad_negative) g = -g;
  return out;
}

void PairLossConfig::validate() const {
  const bool in_range =
      m_pos >= -1.0 && m_pos <= 1.0 && m_neg >= -1.0 && m_neg <= 1.0;
  if (!in_range || !(m_pos > m_neg)) {
    throw ConfigError("pair margins need -1 <= m_neg < m_pos <= 1");
  }
}

double pair_loss(double s_p, double s_n, const PairLossConfig& cfg) {
  return pair_loss_with_gradients(s_p, s_n, cfg).loss;
}

PairLossResult pair_loss_with_gradients(double s_p, double s_n,
                                        const PairLossConfig& cfg) {
  PairLossResult out;
  const double pos = cfg.m_pos - s_p;
  const double neg = s_n - cfg.m_neg;
  if (pos > 0.0) {
    out.loss += pos;
    out.d_positive = -1.0;
  }
  if (neg > 0.0) {
    out.loss += neg;
    out.d_negative = 1.0;
  }
  return out;
}

CrossEntropyResult cross_entropy_sum(const Matrix& scores,
                                     std::span<const int> targets) {
  if (scores.rows != targets.size()) {
    throw ContractViolation("mlm score rows (" + std::to_string(scores.rows) +
                            ") != masked targets (" +
                            std::to_string(targets.size()) + ")");
  }
  CrossEntropyResult out;
  out.grad = Matrix(scores.rows, scores.cols);
  for (std::size_t r = 0; r < scores.rows; ++r) {
    const auto row = scores.row(r);
    const int target = targets[r];
    if (target < 0 || static_cast<std::size_t>(target) >= scores.cols) {
      throw ContractViolation("mlm target id " + std::to_string(target) +
                              " outside vocabulary of size " +
                              std::to_string(scores.cols));
    }
    const double peak = *std::max_element(row.begin(), row.end());
    double denom = 0.0;
    for (double s : row) denom += std::exp(s - peak);
    const double log_z = peak + std::log(denom);
    out.loss_sum += log_z - row[target];
    auto g = out.grad.row(r);
    for (std::size_t c = 0; c < scores.cols; ++c) {
      g[c] = std::exp(row[c] - log_z);
    }
    g[target] -= 1.0;
  }
  return out;
}

double mlm_loss(const Matrix& scores, std::span<const int> targets) {
  if (targets.empty() && scores.rows == 0) return 0.0;
  const CrossEntropyResult ce = cross_entropy_sum(scores, targets);
  return ce.loss_sum / static_cast<double>(targets.size());
}

LossBreakdown total_loss(double mlm, double metric, double lambda) {
  if (!(mlm >= 0.0) || !(metric >= 0.0) || !(lambda >= 0.0)) {
    throw ContractViolation("loss components and lambda must be >= 0");
  }
  return {mlm, metric, mlm + lambda * metric, lambda};
}

}  // namespace tripletlm
