#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tripletlm/checkpoint.hpp"
#include "tripletlm/data.hpp"
#include "tripletlm/encoder.hpp"
#include "tripletlm/errors.hpp"
#include "tripletlm/losses.hpp"
#include "tripletlm/mining.hpp"
#include "tripletlm/rng.hpp"

namespace tripletlm {

inline constexpr std::uint64_t kDefaultSeed = 1234;

/// The full method and its five ablations.
enum class LossVariant {
  triplet_hard,           // angular triplet loss, hard mining, MLM
  triplet_random,         // (i) random in-batch negatives
  contrastive_pair,       // (ii) pair hinge, margins (1, 0)
  cosine_pair,            // (iii) pair hinge, margins (1, -1)
  triplet_cosine_metric,  // (iv) (1 - C)/2 replaces angular distance
  triplet_no_mlm          // (v) metric objective only
};

std::string_view to_string(LossVariant v);
LossVariant loss_variant_from_string(std::string_view name);
const std::vector<LossVariant>& all_loss_variants();

struct TrainConfig {
  int batch_size = 8;
  int steps = 2000;
  double learning_rate = 1e-3;
  double lambda = 1.0;
  double margin = 0.1;
  LossVariant loss_variant = LossVariant::triplet_hard;
  double mask_rate = 0.15;
  std::uint64_t seed = kDefaultSeed;
  // Architecture; encoder.seed is overwritten by `seed`.
  EncoderConfig encoder;

  void validate() const;

  bool uses_mlm() const { return loss_variant != LossVariant::triplet_no_mlm; }
  bool uses_hard_mining() const {
    return loss_variant != LossVariant::triplet_random;
  }
  bool uses_pair_loss() const {
    return loss_variant == LossVariant::contrastive_pair ||
           loss_variant == LossVariant::cosine_pair;
  }
  DistanceKind distance_kind() const {
    return loss_variant == LossVariant::triplet_cosine_metric
               ? DistanceKind::cosine
               : DistanceKind::angular;
  }
  PairLossConfig pair_config() const {
    return loss_variant == LossVariant::cosine_pair
               ? PairLossConfig::cosine()
               : PairLossConfig::contrastive();
  }
  double effective_mask_rate() const { return uses_mlm() ? mask_rate : 0.0; }
  EncoderConfig encoder_config() const;

  /// Keys mirror the field names (encoder fields unprefixed); unknown keys
  /// are ConfigErrors.
  static TrainConfig from_key_values(
      const std::map<std::string, std::string>& values);
  static TrainConfig load(const std::filesystem::path& path);
  std::string to_key_values() const;
};

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
};

/// Adaptive-moment optimizer with decoupled weight decay.
class AdamW {
 public:
  AdamW(const EncoderConfig& shape, AdamWConfig cfg = {});
  void step(EncoderParams& params, const EncoderParams& grads, double lr);
  long steps_taken() const { return t_; }

 private:
  AdamWConfig cfg_;
  EncoderParams first_moment_;
  EncoderParams second_moment_;
  long t_ = 0;
};

enum class NegativeProvenance { deferred, mined, random };

struct Triplet {
  std::size_t item = 0;  // index within the batch
  TokenSequence anchor;
  TokenSequence positive;
  std::optional<NegativeRef> negative;
  NegativeProvenance provenance = NegativeProvenance::deferred;
};

/// Tokenizes (truncating to max_seq_len) and masks both elements of every
/// item. Negatives are left for mining under hard-mining variants and drawn
/// with sample_random_negatives otherwise.
std::vector<Triplet> build_triplets(std::span<const Item> items,
                                    const Vocabulary& vocab, Rng& rng,
                                    const TrainConfig& cfg);

struct BatchGradients {
  LossBreakdown loss;
  EncoderParams grads;
  std::vector<NegativeRef> negatives;
  BatchEmbeddings embeddings;
};

/// One forward pass per element, negative selection, loss assembly and
/// backward into a fresh gradient set. Does not touch the parameters.
BatchGradients compute_batch_gradients(std::vector<Triplet>& triplets,
                                       const Encoder& encoder,
                                       const TrainConfig& cfg);

class TrainingDivergence : public Error {
 public:
  TrainingDivergence(long step, const LossBreakdown& loss);
  long step() const { return step_; }
  const LossBreakdown& loss() const { return loss_; }

 private:
  long step_;
  LossBreakdown loss_;
};

/// Builds triplets, computes gradients and applies one optimizer update.
LossBreakdown train_step(std::span<const Item> batch, Encoder& encoder,
                         AdamW& optimizer, const Vocabulary& vocab,
                         const TrainConfig& cfg, Rng& rng, long step_index);

struct TrainReport {
  std::vector<LossBreakdown> series;  // one entry per step
  Checkpoint checkpoint;
  double seconds = 0.0;
};

/// Shuffled-epoch training over `dataset`. Deterministic given cfg.seed.
TrainReport train(const Catalog& dataset, const TrainConfig& cfg);

/// CSV with header step,mlm,metric,total preceded by a seed comment line.
std::string metrics_csv(const TrainReport& report, std::uint64_t seed);

}  // namespace tripletlm
