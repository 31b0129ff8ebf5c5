#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tripletlm/geometry.hpp"
#include "tripletlm/matrix.hpp"
#include "tripletlm/rng.hpp"

namespace tripletlm {

// Reserved token ids. None of them is ever selected for masking.
inline constexpr int kPadId = 0;
inline constexpr int kMaskId = 1;
inline constexpr int kUnknownId = 2;
inline constexpr int kNumSpecialTokens = 3;

enum class InitMode {
  normal,           // N(0, 0.02) everywhere
  positive_orthant  // embeddings offset into the positive orthant
};

std::string_view to_string(InitMode mode);
InitMode init_mode_from_string(std::string_view name);

struct EncoderConfig {
  int vocab_size = 512;
  int d_model = 32;
  int n_layers = 2;
  int n_heads = 4;
  int max_seq_len = 64;
  std::uint64_t seed = 1234;
  InitMode init = InitMode::normal;

  void validate() const;
  int d_head() const { return d_model / n_heads; }
  int d_ff() const { return 4 * d_model; }
  bool operator==(const EncoderConfig&) const = default;
};

/// Tokenized input with masking bookkeeping. `mask_positions` is sorted and
/// `original_ids[i]` is the id that stood at `mask_positions[i]` before
/// replacement.
struct TokenSequence {
  std::vector<int> token_ids;
  std::vector<int> mask_positions;
  std::vector<int> original_ids;
  int attention_length = 0;

  static TokenSequence unmasked(std::vector<int> ids);
  void validate(const EncoderConfig& cfg) const;
  bool operator==(const TokenSequence&) const = default;
};

struct EncoderOutput {
  Matrix token_states;  // attention_length x d_model
  Vector pooled;        // mean of token_states rows
  Matrix mlm_scores;    // one vocabulary row per mask position
  bool operator==(const EncoderOutput&) const = default;
};

struct LayerParams {
  Vector ln1_gain, ln1_bias;
  Matrix w_query, w_key, w_value, w_out;  // d x d, applied as x * W
  Vector b_query, b_key, b_value, b_out;
  Vector ln2_gain, ln2_bias;
  Matrix w_ff1;  // d x 4d
  Vector b_ff1;
  Matrix w_ff2;  // 4d x d
  Vector b_ff2;
};

/// Every trainable array of the encoder. Gradients use the same type.
struct EncoderParams {
  Matrix token_embedding;     // vocab x d
  Matrix position_embedding;  // max_seq_len x d
  std::vector<LayerParams> layers;
  Vector head_ln_gain, head_ln_bias;
  Matrix head_decoder;  // vocab x d
  Vector head_bias;     // vocab

  static EncoderParams zeros(const EncoderConfig& cfg);

  /// Visits every array as (name, values, shape) in a fixed order. The order
  /// defines the checkpoint layout and the optimizer-state layout.
  template <typename F>
  void for_each(F&& fn);
  template <typename F>
  void for_each(F&& fn) const;

  std::size_t parameter_count() const;
  void set_zero();
  // this += other, array by array.
  void add(const EncoderParams& other);
  bool operator==(const EncoderParams& other) const;
};

struct LayerNormCache {
  Matrix normalized;
  Vector inv_std;
  Matrix out;
};

struct LayerTrace {
  Matrix input;
  LayerNormCache ln1;
  Matrix query, key, value;
  std::vector<Matrix> attention;  // per head, L x L probabilities
  Matrix context;                 // concatenated head outputs
  Matrix hidden;                  // input + attention block
  LayerNormCache ln2;
  Matrix ff_pre;  // before GELU
  Matrix ff_act;
};

/// Forward activations retained for backward().
struct EncoderTrace {
  TokenSequence sequence;
  std::vector<LayerTrace> layers;
  LayerNormCache head_ln;  // rows = mask positions
  EncoderOutput output;
};

/// Upstream gradients on the encoder outputs: d/d(pooled) and
/// d/d(mlm_scores). An empty `mlm_scores` is accepted when nothing is masked.
struct EncoderUpstream {
  Vector pooled;
  Matrix mlm_scores;
};

/// Pre-norm transformer encoder with mean pooling and a masked-token head.
class Encoder {
 public:
  explicit Encoder(const EncoderConfig& cfg);
  Encoder(const EncoderConfig& cfg, EncoderParams params);

  const EncoderConfig& config() const { return config_; }
  const EncoderParams& params() const { return params_; }
  EncoderParams& mutable_params() { return params_; }

  EncoderTrace forward(const TokenSequence& seq) const;
  EncoderOutput encode(const TokenSequence& seq) const;

  /// Accumulates parameter gradients for one traced sequence into `grads`.
  void backward(const EncoderTrace& trace, const EncoderUpstream& upstream,
                EncoderParams& grads) const;
  EncoderParams backward(const TokenSequence& seq,
                         const EncoderUpstream& upstream) const;

 private:
  EncoderConfig config_;
  EncoderParams params_;
};

EncoderParams initialize_params(const EncoderConfig& cfg);

struct MaskingRule {
  double to_mask = 0.8;
  double to_random = 0.1;
  double keep = 0.1;
};

/// Selects each non-special position with probability `mask_rate`; selected
/// positions become the mask token, a random vocabulary token, or stay as
/// they are according to `rule`.
TokenSequence apply_masking(std::span<const int> token_ids, double mask_rate,
                            Rng& rng, int vocab_size,
                            const MaskingRule& rule = {});

// ---------------------------------------------------------------------------

template <typename Self, typename F>
void visit_params(Self& p, F&& fn) {
  auto mat = [&](const std::string& name, auto& m) {
    fn(name, std::span(m.data), std::vector<std::size_t>{m.rows, m.cols});
  };
  auto vec = [&](const std::string& name, auto& v) {
    fn(name, std::span(v), std::vector<std::size_t>{v.size()});
  };
  mat("token_embedding", p.token_embedding);
  mat("position_embedding", p.position_embedding);
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    auto& l = p.layers[i];
    const std::string pre = "layer" + std::to_string(i) + ".";
    vec(pre + "ln1_gain", l.ln1_gain);
    vec(pre + "ln1_bias", l.ln1_bias);
    mat(pre + "w_query", l.w_query);
    vec(pre + "b_query", l.b_query);
    mat(pre + "w_key", l.w_key);
    vec(pre + "b_key", l.b_key);
    mat(pre + "w_value", l.w_value);
    vec(pre + "b_value", l.b_value);
    mat(pre + "w_out", l.w_out);
    vec(pre + "b_out", l.b_out);
    vec(pre + "ln2_gain", l.ln2_gain);
    vec(pre + "ln2_bias", l.ln2_bias);
    mat(pre + "w_ff1", l.w_ff1);
    vec(pre + "b_ff1", l.b_ff1);
    mat(pre + "w_ff2", l.w_ff2);
    vec(pre + "b_ff2", l.b_ff2);
  }
  vec("head_ln_gain", p.head_ln_gain);
  vec("head_ln_bias", p.head_ln_bias);
  mat("head_decoder", p.head_decoder);
  vec("head_bias", p.head_bias);
}

template <typename F>
void EncoderParams::for_each(F&& fn) {
  visit_params(*this, std::forward<F>(fn));
}

template <typename F>
void EncoderParams::for_each(F&& fn) const {
  visit_params(*this, std::forward<F>(fn));
}

}  // namespace tripletlm
