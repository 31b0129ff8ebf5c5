#include "tripletlm/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "tripletlm/errors.hpp"

namespace tripletlm {
namespace {

constexpr double kInitStd = 0.02;
constexpr double kOrthantOffset = 0.5;
constexpr double kLayerNormEps = 1e-12;

// out = a * b
Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* brow = &b.data[k * b.cols];
      double* orow = &out.data[i * out.cols];
      for (std::size_t j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

// out += a^T * b
void add_matmul_at_b(const Matrix& a, const Matrix& b, Matrix& out) {
  for (std::size_t k = 0; k < a.rows; ++k) {
    for (std::size_t i = 0; i < a.cols; ++i) {
      const double aki = a(k, i);
      if (aki == 0.0) continue;
      const double* brow = &b.data[k * b.cols];
      double* orow = &out.data[i * out.cols];
      for (std::size_t j = 0; j < b.cols; ++j) orow[j] += aki * brow[j];
    }
  }
}

// out = a * b^T
Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < b.rows; ++j) {
      double sum = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) sum += a(i, k) * b(j, k);
      out(i, j) = sum;
    }
  }
  return out;
}

void add_bias(Matrix& m, const Vector& bias) {
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) m(r, c) += bias[c];
  }
}

void add_column_sums(const Matrix& m, Vector& out) {
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) out[c] += m(r, c);
  }
}

Matrix affine(const Matrix& x, const Matrix& w, const Vector& b) {
  Matrix out = matmul(x, w);
  add_bias(out, b);
  return out;
}

LayerNormCache layer_norm(const Matrix& x, const Vector& gain,
                          const Vector& bias) {
  LayerNormCache cache{Matrix(x.rows, x.cols), Vector(x.rows),
                       Matrix(x.rows, x.cols)};
  const double n = static_cast<double>(x.cols);
  for (std::size_t r = 0; r < x.rows; ++r) {
    const auto row = x.row(r);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= n;
    const double inv_std = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.inv_std[r] = inv_std;
    for (std::size_t c = 0; c < x.cols; ++c) {
      const double xhat = (row[c] - mean) * inv_std;
      cache.normalized(r, c) = xhat;
      cache.out(r, c) = gain[c] * xhat + bias[c];
    }
  }
  return cache;
}

// Returns d/dx and accumulates gain/bias gradients.
Matrix layer_norm_backward(const LayerNormCache& cache, const Matrix& d_out,
                           const Vector& gain, Vector& d_gain,
                           Vector& d_bias) {
  const std::size_t cols = d_out.cols;
  const double n = static_cast<double>(cols);
  Matrix dx(d_out.rows, cols);
  Vector d_norm(cols);
  for (std::size_t r = 0; r < d_out.rows; ++r) {
    double mean_d = 0.0;
    double mean_dx = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double g = d_out(r, c);
      d_gain[c] += g * cache.normalized(r, c);
      d_bias[c] += g;
      d_norm[c] = g * gain[c];
      mean_d += d_norm[c];
      mean_dx += d_norm[c] * cache.normalized(r, c);
    }
    mean_d /= n;
    mean_dx /= n;
    for (std::size_t c = 0; c < cols; ++c) {
      dx(r, c) = cache.inv_std[r] *
                 (d_norm[c] - mean_d - cache.normalized(r, c) * mean_dx);
    }
  }
  return dx;
}

double gelu(double x) {
  return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2));
}

double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf =
      std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

void add_into(Matrix& dst, const Matrix& src) {
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

// Copies columns [offset, offset + width) into a new matrix.
Matrix column_slice(const Matrix& m, std::size_t offset, std::size_t width) {
  Matrix out(m.rows, width);
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < width; ++c) out(r, c) = m(r, offset + c);
  }
  return out;
}

void add_column_slice(Matrix& m, std::size_t offset, const Matrix& src) {
  for (std::size_t r = 0; r < src.rows; ++r) {
    for (std::size_t c = 0; c < src.cols; ++c) m(r, offset + c) += src(r, c);
  }
}

void fill_normal(Matrix& m, Rng& rng) {
  for (double& v : m.data) v = kInitStd * rng.normal();
}

}  // namespace

std::string_view to_string(InitMode mode) {
  return mode == InitMode::normal ? "normal" : "positive_orthant";
}

InitMode init_mode_from_string(std::string_view name) {
  if (name == "normal") return InitMode::normal;
  if (name == "positive_orthant") return InitMode::positive_orthant;
  throw ConfigError("unknown init mode '" + std::string(name) + "'");
}

void EncoderConfig::validate() const {
  if (vocab_size <= kNumSpecialTokens) {
    throw ConfigError("vocab_size must exceed the " +
                      std::to_string(kNumSpecialTokens) + " special tokens");
  }
  if (d_model <= 0 || n_layers <= 0 || n_heads <= 0 || max_seq_len <= 0) {
    throw ConfigError("encoder dimensions must be positive");
  }
  if (d_model % n_heads != 0) {
    throw ConfigError("d_model (" + std::to_string(d_model) +
                      ") must be divisible by n_heads (" +
                      std::to_string(n_heads) + ")");
  }
}

TokenSequence TokenSequence::unmasked(std::vector<int> ids) {
  TokenSequence seq;
  seq.attention_length = static_cast<int>(ids.size());
  seq.token_ids = std::move(ids);
  return seq;
}

void TokenSequence::validate(const EncoderConfig& cfg) const {
  if (attention_length <= 0 ||
      attention_length > static_cast<int>(token_ids.size())) {
    throw ContractViolation("attention_length " +
                            std::to_string(attention_length) +
                            " outside (0, " +
                            std::to_string(token_ids.size()) + "]");
  }
  if (attention_length > cfg.max_seq_len) {
    throw ContractViolation("sequence length " +
                            std::to_string(attention_length) +
                            " exceeds max_seq_len " +
                            std::to_string(cfg.max_seq_len));
  }
  for (int id : token_ids) {
    if (id < 0 || id >= cfg.vocab_size) {
      throw ContractViolation("token id " + std::to_string(id) +
                              " outside vocabulary of size " +
                              std::to_string(cfg.vocab_size));
    }
  }
  if (mask_positions.size() != original_ids.size()) {
    throw ContractViolation("mask positions and original ids differ in size");
  }
  for (std::size_t i = 0; i < mask_positions.size(); ++i) {
    if (mask_positions[i] < 0 || mask_positions[i] >= attention_length) {
      throw ContractViolation("mask position " +
                              std::to_string(mask_positions[i]) +
                              " outside attended prefix");
    }
    if (i > 0 && mask_positions[i] <= mask_positions[i - 1]) {
      throw ContractViolation("mask positions must be strictly increasing");
    }
    if (original_ids[i] < 0 || original_ids[i] >= cfg.vocab_size) {
      throw ContractViolation("original id outside vocabulary");
    }
  }
}

EncoderParams EncoderParams::zeros(const EncoderConfig& cfg) {
  const auto v = static_cast<std::size_t>(cfg.vocab_size);
  const auto d = static_cast<std::size_t>(cfg.d_model);
  const auto ff = static_cast<std::size_t>(cfg.d_ff());
  EncoderParams p;
  p.token_embedding = Matrix(v, d);
  p.position_embedding = Matrix(static_cast<std::size_t>(cfg.max_seq_len), d);
  p.layers.resize(static_cast<std::size_t>(cfg.n_layers));
  for (auto& l : p.layers) {
    l.ln1_gain.assign(d, 0.0);
    l.ln1_bias.assign(d, 0.0);
    l.w_query = l.w_key = l.w_value = l.w_out = Matrix(d, d);
    l.b_query.assign(d, 0.0);
    l.b_key.assign(d, 0.0);
    l.b_value.assign(d, 0.0);
    l.b_out.assign(d, 0.0);
    l.ln2_gain.assign(d, 0.0);
    l.ln2_bias.assign(d, 0.0);
    l.w_ff1 = Matrix(d, ff);
    l.b_ff1.assign(ff, 0.0);
    l.w_ff2 = Matrix(ff, d);
    l.b_ff2.assign(d, 0.0);
  }
  p.head_ln_gain.assign(d, 0.0);
  p.head_ln_bias.assign(d, 0.0);
  p.head_decoder = Matrix(v, d);
  p.head_bias.assign(v, 0.0);
  return p;
}

std::size_t EncoderParams::parameter_count() const {
  std::size_t n = 0;
  for_each([&](const std::string&, auto values, const auto&) {
    n += values.size();
  });
  return n;
}

void EncoderParams::set_zero() {
  for_each([](const std::string&, std::span<double> values, const auto&) {
    std::fill(values.begin(), values.end(), 0.0);
  });
}

void EncoderParams::add(const EncoderParams& other) {
  std::vector<std::span<const double>> src;
  other.for_each([&](const std::string&, std::span<const double> values,
                     const auto&) { src.push_back(values); });
  std::size_t i = 0;
  for_each([&](const std::string&, std::span<double> values, const auto&) {
    const auto s = src.at(i++);
    if (s.size() != values.size()) {
      throw ContractViolation("parameter shape mismatch in add()");
    }
    for (std::size_t k = 0; k < values.size(); ++k) values[k] += s[k];
  });
}

bool EncoderParams::operator==(const EncoderParams& other) const {
  std::vector<std::span<const double>> mine;
  for_each([&](const std::string&, std::span<const double> values,
               const auto&) { mine.push_back(values); });
  std::size_t i = 0;
  bool equal = true;
  other.for_each([&](const std::string&, std::span<const double> values,
                     const auto&) {
    if (i >= mine.size() || !std::equal(values.begin(), values.end(),
                                        mine[i].begin(), mine[i].end())) {
      equal = false;
    }
    ++i;
  });
  return equal && i == mine.size();
}

EncoderParams initialize_params(const EncoderConfig& cfg) {
  cfg.validate();
  EncoderParams p = EncoderParams::zeros(cfg);
  Rng rng(derive_seed(cfg.seed, 0));
  fill_normal(p.token_embedding, rng);
  fill_normal(p.position_embedding, rng);
  if (cfg.init == InitMode::positive_orthant) {
    for (double& v : p.token_embedding.data) v = kOrthantOffset + std::abs(v);
    for (double& v : p.position_embedding.data) v = std::abs(v);
  }
  for (auto& l : p.layers) {
    std::fill(l.ln1_gain.begin(), l.ln1_gain.end(), 1.0);
    std::fill(l.ln2_gain.begin(), l.ln2_gain.end(), 1.0);
    fill_normal(l.w_query, rng);
    fill_normal(l.w_key, rng);
    fill_normal(l.w_value, rng);
    fill_normal(l.w_out, rng);
    fill_normal(l.w_ff1, rng);
    fill_normal(l.w_ff2, rng);
  }
  std::fill(p.head_ln_gain.begin(), p.head_ln_gain.end(), 1.0);
  fill_normal(p.head_decoder, rng);
  return p;
}

Encoder::Encoder(const EncoderConfig& cfg)
    : config_(cfg), params_(initialize_params(cfg)) {}

Encoder::Encoder(const EncoderConfig& cfg, EncoderParams params)
    : config_(cfg), params_(std::move(params)) {
  config_.validate();
  const EncoderParams expected = EncoderParams::zeros(config_);
  std::vector<std::vector<std::size_t>> shapes;
  expected.for_each([&](const std::string&, auto, const auto& shape) {
    shapes.push_back(shape);
  });
  std::size_t i = 0;
  params_.for_each([&](const std::string& name, auto, const auto& shape) {
    if (i >= shapes.size() || shapes[i] != shape) {
      throw ContractViolation("parameter '" + name +
                              "' does not match the encoder config");
    }
    ++i;
  });
  if (i != shapes.size()) {
    throw ContractViolation("parameter set does not match the encoder config");
  }
}

EncoderTrace Encoder::forward(const TokenSequence& seq) const {
  seq.validate(config_);
  const auto len = static_cast<std::size_t>(seq.attention_length);
  const auto d = static_cast<std::size_t>(config_.d_model);
  const auto heads = static_cast<std::size_t>(config_.n_heads);
  const auto dh = static_cast<std::size_t>(config_.d_head());
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  EncoderTrace trace;
  trace.sequence = seq;
  Matrix x(len, d);
  for (std::size_t t = 0; t < len; ++t) {
    const auto tok = params_.token_embedding.row(
        static_cast<std::size_t>(seq.token_ids[t]));
    const auto pos = params_.position_embedding.row(t);
    for (std::size_t c = 0; c < d; ++c) x(t, c) = tok[c] + pos[c];
  }

  trace.layers.reserve(params_.layers.size());
  for (const LayerParams& lp : params_.layers) {
    LayerTrace lt;
    lt.input = x;
    lt.ln1 = layer_norm(x, lp.ln1_gain, lp.ln1_bias);
    lt.query = affine(lt.ln1.out, lp.w_query, lp.b_query);
    lt.key = affine(lt.ln1.out, lp.w_key, lp.b_key);
    lt.value = affine(lt.ln1.out, lp.w_value, lp.b_value);
    lt.context = Matrix(len, d);
    lt.attention.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
      const Matrix q = column_slice(lt.query, h * dh, dh);
      const Matrix k = column_slice(lt.key, h * dh, dh);
      const Matrix v = column_slice(lt.value, h * dh, dh);
      Matrix probs = matmul_a_bt(q, k);
      for (std::size_t r = 0; r < len; ++r) {
        auto row = probs.row(r);
        double peak = -INFINITY;
        for (double& s : row) {
          s *= scale;
          peak = std::max(peak, s);
        }
        double sum = 0.0;
        for (double& s : row) {
          s = std::exp(s - peak);
          sum += s;
        }
        for (double& s : row) s /= sum;
      }
      add_column_slice(lt.context, h * dh, matmul(probs, v));
      lt.attention.push_back(std::move(probs));
    }
    lt.hidden = affine(lt.context, lp.w_out, lp.b_out);
    add_into(lt.hidden, x);
    lt.ln2 = layer_norm(lt.hidden, lp.ln2_gain, lp.ln2_bias);
    lt.ff_pre = affine(lt.ln2.out, lp.w_ff1, lp.b_ff1);
    lt.ff_act = lt.ff_pre;
    for (double& v : lt.ff_act.data) v = gelu(v);
    x = affine(lt.ff_act, lp.w_ff2, lp.b_ff2);
    add_into(x, lt.hidden);
    trace.layers.push_back(std::move(lt));
  }

  EncoderOutput& out = trace.output;
  out.pooled.assign(d, 0.0);
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t c = 0; c < d; ++c) out.pooled[c] += x(t, c);
  }
  for (double& v : out.pooled) v /= static_cast<double>(len);

  const std::size_t n_masks = seq.mask_positions.size();
  Matrix masked(n_masks, d);
  for (std::size_t i = 0; i < n_masks; ++i) {
    const auto src = x.row(static_cast<std::size_t>(seq.mask_positions[i]));
    std::copy(src.begin(), src.end(), masked.row(i).begin());
  }
  trace.head_ln = layer_norm(masked, params_.head_ln_gain, params_.head_ln_bias);
  out.mlm_scores = matmul_a_bt(trace.head_ln.out, params_.head_decoder);
  add_bias(out.mlm_scores, params_.head_bias);
  out.token_states = std::move(x);
  return trace;
}

EncoderOutput Encoder::encode(const TokenSequence& seq) const {
  return forward(seq).output;
}

void Encoder::backward(const EncoderTrace& trace,
                       const EncoderUpstream& upstream,
                       EncoderParams& grads) const {
  const TokenSequence& seq = trace.sequence;
  const auto len = static_cast<std::size_t>(seq.attention_length);
  const auto d = static_cast<std::size_t>(config_.d_model);
  const auto v = static_cast<std::size_t>(config_.vocab_size);
  const auto heads = static_cast<std::size_t>(config_.n_heads);
  const auto dh = static_cast<std::size_t>(config_.d_head());
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const std::size_t n_masks = seq.mask_positions.size();

  if (upstream.pooled.size() != d) {
    throw ContractViolation("pooled gradient has dimension " +
                            std::to_string(upstream.pooled.size()) +
                            ", expected " + std::to_string(d));
  }
  const bool no_mlm_grad = upstream.mlm_scores.rows == 0 &&
                           upstream.mlm_scores.data.empty();
  if (!no_mlm_grad &&
      (upstream.mlm_scores.rows != n_masks || upstream.mlm_scores.cols != v)) {
    throw ContractViolation("mlm score gradient shape mismatch");
  }

  Matrix dx(len, d);
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t c = 0; c < d; ++c) {
      dx(t, c) = upstream.pooled[c] / static_cast<double>(len);
    }
  }

  if (!no_mlm_grad && n_masks > 0) {
    const Matrix& ds = upstream.mlm_scores;
    add_matmul_at_b(ds, trace.head_ln.out, grads.head_decoder);
    add_column_sums(ds, grads.head_bias);
    const Matrix dz = matmul(ds, params_.head_decoder);
    const Matrix dmasked =
        layer_norm_backward(trace.head_ln, dz, params_.head_ln_gain,
                            grads.head_ln_gain, grads.head_ln_bias);
    for (std::size_t i = 0; i < n_masks; ++i) {
      auto dst = dx.row(static_cast<std::size_t>(seq.mask_positions[i]));
      const auto src = dmasked.row(i);
      for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
    }
  }

  for (std::size_t li = params_.layers.size(); li-- > 0;) {
    const LayerParams& lp = params_.layers[li];
    LayerParams& lg = grads.layers[li];
    const LayerTrace& lt = trace.layers[li];

    // x_out = hidden + ff
    Matrix d_hidden = dx;
    add_matmul_at_b(lt.ff_act, dx, lg.w_ff2);
    add_column_sums(dx, lg.b_ff2);
    Matrix d_ff = matmul_a_bt(dx, lp.w_ff2);
    for (std::size_t i = 0; i < d_ff.data.size(); ++i) {
      d_ff.data[i] *= gelu_derivative(lt.ff_pre.data[i]);
    }
    add_matmul_at_b(lt.ln2.out, d_ff, lg.w_ff1);
    add_column_sums(d_ff, lg.b_ff1);
    const Matrix d_ln2 = matmul_a_bt(d_ff, lp.w_ff1);
    add_into(d_hidden, layer_norm_backward(lt.ln2, d_ln2, lp.ln2_gain,
                                           lg.ln2_gain, lg.ln2_bias));

    // hidden = input + context * w_out + b_out
    Matrix d_input = d_hidden;
    add_matmul_at_b(lt.context, d_hidden, lg.w_out);
    add_column_sums(d_hidden, lg.b_out);
    const Matrix d_context = matmul_a_bt(d_hidden, lp.w_out);

    Matrix d_query(len, d), d_key(len, d), d_value(len, d);
    for (std::size_t h = 0; h < heads; ++h) {
      const Matrix q = column_slice(lt.query, h * dh, dh);
      const Matrix k = column_slice(lt.key, h * dh, dh);
      const Matrix val = column_slice(lt.value, h * dh, dh);
      const Matrix d_out_h = column_slice(d_context, h * dh, dh);
      const Matrix& probs = lt.attention[h];

      Matrix d_probs = matmul_a_bt(d_out_h, val);
      Matrix d_val(len, dh);
      add_matmul_at_b(probs, d_out_h, d_val);
      Matrix d_scores(len, len);
      for (std::size_t r = 0; r < len; ++r) {
        double inner = 0.0;
        for (std::size_t c = 0; c < len; ++c) {
          inner += d_probs(r, c) * probs(r, c);
        }
        for (std::size_t c = 0; c < len; ++c) {
          d_scores(r, c) = probs(r, c) * (d_probs(r, c) - inner) * scale;
        }
      }
      add_column_slice(d_query, h * dh, matmul(d_scores, k));
      Matrix d_k(len, dh);
      add_matmul_at_b(d_scores, q, d_k);
      add_column_slice(d_key, h * dh, d_k);
      add_column_slice(d_value, h * dh, d_val);
    }

    const Matrix& z1 = lt.ln1.out;
    add_matmul_at_b(z1, d_query, lg.w_query);
    add_column_sums(d_query, lg.b_query);
    add_matmul_at_b(z1, d_key, lg.w_key);
    add_column_sums(d_key, lg.b_key);
    add_matmul_at_b(z1, d_value, lg.w_value);
    add_column_sums(d_value, lg.b_value);
    Matrix d_z1 = matmul_a_bt(d_query, lp.w_query);
    add_into(d_z1, matmul_a_bt(d_key, lp.w_key));
    add_into(d_z1, matmul_a_bt(d_value, lp.w_value));
    add_into(d_input, layer_norm_backward(lt.ln1, d_z1, lp.ln1_gain,
                                          lg.ln1_gain, lg.ln1_bias));
    dx = std::move(d_input);
  }

  for (std::size_t t = 0; t < len; ++t) {
    auto tok = grads.token_embedding.row(
        static_cast<std::size_t>(seq.token_ids[t]));
    auto pos = grads.position_embedding.row(t);
    for (std::size_t c = 0; c < d; ++c) {
      tok[c] += dx(t, c);
      pos[c] += dx(t, c);
    }
  }
}

EncoderParams Encoder::backward(const TokenSequence& seq,
                                const EncoderUpstream& upstream) const {
  EncoderParams grads = EncoderParams::zeros(config_);
  backward(forward(seq), upstream, grads);
  return grads;
}

TokenSequence apply_masking(std::span<const int> token_ids, double mask_rate,
                            Rng& rng, int vocab_size, const MaskingRule& rule) {
  if (!(mask_rate >= 0.0 && mask_rate <= 1.0)) {
    throw ContractViolation("mask_rate must lie in [0, 1]");
  }
  TokenSequence seq =
      TokenSequence::unmasked({token_ids.begin(), token_ids.end()});
  if (mask_rate == 0.0) return seq;
  const int random_pool = vocab_size - kNumSpecialTokens;
  for (std::size_t i = 0; i < seq.token_ids.size(); ++i) {
    const int original = seq.token_ids[i];
    if (original < kNumSpecialTokens) continue;
    if (!rng.bernoulli(mask_rate)) continue;
    seq.mask_positions.push_back(static_cast<int>(i));
    seq.original_ids.push_back(original);
    const double u = rng.uniform();
    if (u < rule.to_mask) {
      seq.token_ids[i] = kMaskId;
    } else if (u < rule.to_mask + rule.to_random && random_pool > 0) {
      seq.token_ids[i] = kNumSpecialTokens +
                         static_cast<int>(rng.uniform_index(
                             static_cast<std::uint64_t>(random_pool)));
    }
  }
  return seq;
}

}  // namespace tripletlm
