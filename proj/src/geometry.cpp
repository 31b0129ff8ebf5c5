#include "tripletlm/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "tripletlm/errors.hpp"

namespace tripletlm {
namespace {

void check_pair(VectorView u, VectorView v) {
  if (u.size() != v.size()) {
    throw ContractViolation("vector dimension mismatch: " +
                            std::to_string(u.size()) + " vs " +
                            std::to_string(v.size()));
  }
  if (u.empty()) throw ContractViolation("vectors must have dimension > 0");
}

double checked_norm(VectorView u) {
  const double n = l2_norm(u);
  if (!(n > 0.0)) {
    throw DegenerateVectorError(
        "zero-norm vector in cosine/angular computation");
  }
  return n;
}

}  // namespace

double dot(VectorView u, VectorView v) {
  double sum = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) sum += u[i] * v[i];
  return sum;
}

double l2_norm(VectorView u) { return std::sqrt(dot(u, u)); }

double cosine_similarity(VectorView u, VectorView v) {
  check_pair(u, v);
  const double nu = checked_norm(u);
  const double nv = checked_norm(v);
  return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

double angular_distance(VectorView u, VectorView v) {
  return std::acos(cosine_similarity(u, v)) / std::numbers::pi;
}

Vector cosine_gradient(VectorView u, VectorView v) {
  check_pair(u, v);
  const double nu = checked_norm(u);
  const double nv = checked_norm(v);
  const double c = std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
  Vector grad(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    grad[i] = v[i] / (nu * nv) - c * u[i] / (nu * nu);
  }
  return grad;
}

double angular_gradient_scale(double cosine) {
  const double limit = 1.0 - kSingularityEpsilon;
  const double c = std::clamp(cosine, -limit, limit);
  return -1.0 / (std::numbers::pi * std::sqrt(1.0 - c * c));
}

Vector angular_gradient(VectorView u, VectorView v) {
  Vector grad = cosine_gradient(u, v);
  const double scale = angular_gradient_scale(cosine_similarity(u, v));
  for (double& g : grad) g *= scale;
  return grad;
}

}  // namespace tripletlm
