#pragma once

#include <span>
#include <vector>

namespace tripletlm {

/// Embedding vectors are plain dense rows of doubles; functions take spans so
/// rows of larger buffers can be passed without copies.
using Vector = std::vector<double>;
using VectorView = std::span<const double>;

/// |C| is clamped to 1 - kSingularityEpsilon before the angular-gradient
/// scale 1/(pi*sqrt(1-C^2)) is evaluated.
inline constexpr double kSingularityEpsilon = 1e-7;

double dot(VectorView u, VectorView v);
double l2_norm(VectorView u);

/// u.v / (|u||v|), clamped into [-1, 1]. Throws DegenerateVectorError for a
/// zero-norm input and ContractViolation on dimension mismatch.
double cosine_similarity(VectorView u, VectorView v);

/// arccos(C(u, v)) / pi: 0 for the same direction, 1 for opposite.
double angular_distance(VectorView u, VectorView v);

/// dC/du = v/(|u||v|) - C(u,v) u/|u|^2. The gradient with respect to v is
/// cosine_gradient(v, u).
Vector cosine_gradient(VectorView u, VectorView v);

/// dd/du = -1/(pi sqrt(1 - C^2)) dC/du, with C clamped away from +-1.
Vector angular_gradient(VectorView u, VectorView v);

/// Multiplier applied to dC/du by angular_gradient for a given cosine.
double angular_gradient_scale(double cosine);

}  // namespace tripletlm
