#pragma once

#include <cstdint>
#include <random>

namespace tripletlm {

/// Seeded generator with platform-independent sampling helpers.
///
/// The standard distributions are implementation-defined, so every draw used
/// by training, masking, mining and synthetic data goes through these helpers
/// to keep runs byte-identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n);
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Derives independent stream seeds from a run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace tripletlm
