#include "tripletlm/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "tripletlm/io.hpp"

namespace tripletlm {
namespace {

struct VariantName {
  LossVariant variant;
  std::string_view name;
};

constexpr VariantName kVariantNames[] = {
    {LossVariant::triplet_hard, "triplet_hard"},
    {LossVariant::triplet_random, "triplet_random"},
    {LossVariant::contrastive_pair, "contrastive_pair"},
    {LossVariant::cosine_pair, "cosine_pair"},
    {LossVariant::triplet_cosine_metric, "triplet_cosine_metric"},
    {LossVariant::triplet_no_mlm, "triplet_no_mlm"},
};

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("invalid value '" + text + "' for key '" + key + "'");
  }
  return value;
}

std::string round_trip(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<int> truncated_tokens(const Vocabulary& vocab,
                                  const std::string& text, int max_len) {
  std::vector<int> ids = vocab.tokenize(text);
  if (static_cast<int>(ids.size()) > max_len) ids.resize(max_len);
  return ids;
}

void add_scaled(Vector& dst, const Vector& src, double scale) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
}

}  // namespace

std::string_view to_string(LossVariant v) {
  for (const auto& [variant, name] : kVariantNames) {
    if (variant == v) return name;
  }
  return "unknown";
}

LossVariant loss_variant_from_string(std::string_view name) {
  for (const auto& [variant, n] : kVariantNames) {
    if (n == name) return variant;
  }
  throw ConfigError("unknown loss_variant '" + std::string(name) + "'");
}

const std::vector<LossVariant>& all_loss_variants() {
  static const std::vector<LossVariant> kAll = {
      LossVariant::triplet_hard,          LossVariant::triplet_random,
      LossVariant::contrastive_pair,      LossVariant::cosine_pair,
      LossVariant::triplet_cosine_metric, LossVariant::triplet_no_mlm};
  return kAll;
}

void TrainConfig::validate() const {
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
  if (steps < 0) throw ConfigError("steps must be >= 0");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be finite and >= 0");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ConfigError("lambda must be finite and >= 0");
  }
  TripletLossConfig{margin}.validate();
  if (!(mask_rate >= 0.0 && mask_rate <= 1.0)) {
    throw ConfigError("mask_rate must lie in [0, 1]");
  }
  encoder_config().validate();
}

EncoderConfig TrainConfig::encoder_config() const {
  EncoderConfig c = encoder;
  c.seed = seed;
  return c;
}

TrainConfig TrainConfig::from_key_values(
    const std::map<std::string, std::string>& values) {
  TrainConfig cfg;
  for (const auto& [key, value] : values) {
    if (key == "batch_size") {
      cfg.batch_size = parse_number<int>(key, value);
    } else if (key == "steps") {
      cfg.steps = parse_number<int>(key, value);
    } else if (key == "learning_rate") {
      cfg.learning_rate = parse_number<double>(key, value);
    } else if (key == "lambda") {
      cfg.lambda = parse_number<double>(key, value);
    } else if (key == "margin") {
      cfg.margin = parse_number<double>(key, value);
    } else if (key == "loss_variant") {
      cfg.loss_variant = loss_variant_from_string(value);
    } else if (key == "mask_rate") {
      cfg.mask_rate = parse_number<double>(key, value);
    } else if (key == "seed") {
      cfg.seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "vocab_size") {
      cfg.encoder.vocab_size = parse_number<int>(key, value);
    } else if (key == "d_model") {
      cfg.encoder.d_model = parse_number<int>(key, value);
    } else if (key == "n_layers") {
      cfg.encoder.n_layers = parse_number<int>(key, value);
    } else if (key == "n_heads") {
      cfg.encoder.n_heads = parse_number<int>(key, value);
    } else if (key == "max_seq_len") {
      cfg.encoder.max_seq_len = parse_number<int>(key, value);
    } else if (key == "init") {
      cfg.encoder.init = init_mode_from_string(value);
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  return from_key_values(load_key_values(path));
}

std::string TrainConfig::to_key_values() const {
  std::ostringstream out;
  out << "batch_size = " << batch_size << '\n'
      << "steps = " << steps << '\n'
      << "learning_rate = " << round_trip(learning_rate) << '\n'
      << "lambda = " << round_trip(lambda) << '\n'
      << "margin = " << round_trip(margin) << '\n'
      << "loss_variant = " << to_string(loss_variant) << '\n'
      << "mask_rate = " << round_trip(mask_rate) << '\n'
      << "seed = " << seed << '\n'
      << "vocab_size = " << encoder.vocab_size << '\n'
      << "d_model = " << encoder.d_model << '\n'
      << "n_layers = " << encoder.n_layers << '\n'
      << "n_heads = " << encoder.n_heads << '\n'
      << "max_seq_len = " << encoder.max_seq_len << '\n'
      << "init = " << to_string(encoder.init) << '\n';
  return out.str();
}

AdamW::AdamW(const EncoderConfig& shape, AdamWConfig cfg)
    : cfg_(cfg),
      first_moment_(EncoderParams::zeros(shape)),
      second_moment_(EncoderParams::zeros(shape)) {}

void AdamW::step(EncoderParams& params, const EncoderParams& grads, double lr) {
  ++t_;
  const double correction1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double correction2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));

  std::vector<std::span<const double>> g;
  std::vector<std::span<double>> m;
  std::vector<std::span<double>> v;
  grads.for_each([&](const std::string&, std::span<const double> s,
                     const auto&) { g.push_back(s); });
  first_moment_.for_each(
      [&](const std::string&, std::span<double> s, const auto&) {
        m.push_back(s);
      });
  second_moment_.for_each(
      [&](const std::string&, std::span<double> s, const auto&) {
        v.push_back(s);
      });
  std::size_t t = 0;
  params.for_each([&](const std::string&, std::span<double> p, const auto&) {
    const auto gt = g[t];
    auto mt = m[t];
    auto vt = v[t];
    for (std::size_t i = 0; i < p.size(); ++i) {
      mt[i] = cfg_.beta1 * mt[i] + (1.0 - cfg_.beta1) * gt[i];
      vt[i] = cfg_.beta2 * vt[i] + (1.0 - cfg_.beta2) * gt[i] * gt[i];
      const double m_hat = mt[i] / correction1;
      const double v_hat = vt[i] / correction2;
      p[i] -= lr * (m_hat / (std::sqrt(v_hat) + cfg_.epsilon) +
                    cfg_.weight_decay * p[i]);
    }
    ++t;
  });
}

std::vector<Triplet> build_triplets(std::span<const Item> items,
                                    const Vocabulary& vocab, Rng& rng,
                                    const TrainConfig& cfg) {
  if (items.size() < 2) {
    throw IngestionError("a training batch needs at least 2 items");
  }
  const double rate = cfg.effective_mask_rate();
  const int max_len = cfg.encoder.max_seq_len;
  std::vector<Triplet> triplets;
  triplets.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    const Item& item = items[i];
    const std::vector<int> title = truncated_tokens(vocab, item.title, max_len);
    const std::vector<int> desc =
        truncated_tokens(vocab, item.description, max_len);
    if (title.empty() || desc.empty()) {
      throw IngestionError("item '" + item.item_id +
                           "' is missing a textual element");
    }
    Triplet t;
    t.item = i;
    t.anchor = apply_masking(title, rate, rng, cfg.encoder.vocab_size);
    t.positive = apply_masking(desc, rate, rng, cfg.encoder.vocab_size);
    triplets.push_back(std::move(t));
  }
  if (!cfg.uses_hard_mining()) {
    const auto negatives = sample_random_negatives(items.size(), rng);
    for (std::size_t i = 0; i < triplets.size(); ++i) {
      triplets[i].negative = negatives[i];
      triplets[i].provenance = NegativeProvenance::random;
    }
  }
  return triplets;
}

BatchGradients compute_batch_gradients(std::vector<Triplet>& triplets,
                                       const Encoder& encoder,
                                       const TrainConfig& cfg) {
  const std::size_t n = triplets.size();
  const std::size_t d = static_cast<std::size_t>(encoder.config().d_model);
  BatchGradients out;
  out.grads = EncoderParams::zeros(encoder.config());

  // Element 2i is item i's anchor, 2i + 1 its positive.
  std::vector<EncoderTrace> traces;
  traces.reserve(2 * n);
  for (const Triplet& t : triplets) {
    traces.push_back(encoder.forward(t.anchor));
    traces.push_back(encoder.forward(t.positive));
  }
  BatchEmbeddings& emb = out.embeddings;
  for (std::size_t i = 0; i < n; ++i) {
    emb.anchors.push_back(traces[2 * i].output.pooled);
    emb.positives.push_back(traces[2 * i + 1].output.pooled);
    emb.item_ids.push_back(std::to_string(triplets[i].item));
  }

  if (cfg.uses_hard_mining()) {
    const DistanceKind mining_kind = cfg.distance_kind();
    out.negatives = mine_hard_negatives(emb, mining_kind);
    for (std::size_t i = 0; i < n; ++i) {
      triplets[i].negative = out.negatives[i];
      triplets[i].provenance = NegativeProvenance::mined;
    }
  } else {
    for (const Triplet& t : triplets) {
      if (!t.negative) {
        throw ContractViolation("random-negative triplet without a negative");
      }
      out.negatives.push_back(*t.negative);
    }
  }

  std::vector<Vector> pooled_grads(2 * n, Vector(d, 0.0));
  auto element_index = [](const NegativeRef& r) {
    return 2 * r.item + (r.role == ElementRole::positive ? 1 : 0);
  };
  const double metric_scale = cfg.lambda / static_cast<double>(n);
  double metric_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vector& a = emb.anchors[i];
    const Vector& p = emb.positives[i];
    const NegativeRef& neg = out.negatives[i];
    const Vector& nv = emb.element(neg);
    if (cfg.uses_pair_loss()) {
      const double s_p = cosine_similarity(a, p);
      const double s_n = cosine_similarity(a, nv);
      const PairLossResult r = pair_loss_with_gradients(s_p, s_n, cfg.pair_config());
      metric_sum += r.loss;
      if (r.d_positive != 0.0) {
        add_scaled(pooled_grads[2 * i], cosine_gradient(a, p),
                   metric_scale * r.d_positive);
        add_scaled(pooled_grads[2 * i + 1], cosine_gradient(p, a),
                   metric_scale * r.d_positive);
      }
      if (r.d_negative != 0.0) {
        add_scaled(pooled_grads[2 * i], cosine_gradient(a, nv),
                   metric_scale * r.d_negative);
        add_scaled(pooled_grads[element_index(neg)], cosine_gradient(nv, a),
                   metric_scale * r.d_negative);
      }
    } else {
      const TripletLossResult r = triplet_loss_with_gradients(
          a, p, nv, TripletLossConfig{cfg.margin}, cfg.distance_kind());
      metric_sum += r.loss;
      if (r.active) {
        add_scaled(pooled_grads[2 * i], r.grad_anchor, metric_scale);
        add_scaled(pooled_grads[2 * i + 1], r.grad_positive, metric_scale);
        add_scaled(pooled_grads[element_index(neg)], r.grad_negative,
                   metric_scale);
      }
    }
  }
  const double metric = metric_sum / static_cast<double>(n);

  std::size_t masked_total = 0;
  for (const EncoderTrace& t : traces) masked_total += t.output.mlm_scores.rows;
  double mlm = 0.0;
  std::vector<Matrix> score_grads(traces.size());
  if (cfg.uses_mlm() && masked_total > 0) {
    const double inv = 1.0 / static_cast<double>(masked_total);
    double ce_sum = 0.0;
    for (std::size_t e = 0; e < traces.size(); ++e) {
      if (traces[e].output.mlm_scores.rows == 0) continue;
      CrossEntropyResult ce = cross_entropy_sum(
          traces[e].output.mlm_scores, traces[e].sequence.original_ids);
      ce_sum += ce.loss_sum;
      for (double& g : ce.grad.data) g *= inv;
      score_grads[e] = std::move(ce.grad);
    }
    mlm = ce_sum * inv;
  }

  for (std::size_t e = 0; e < traces.size(); ++e) {
    encoder.backward(traces[e], {pooled_grads[e], score_grads[e]}, out.grads);
  }
  out.loss = {mlm, metric, mlm + cfg.lambda * metric, cfg.lambda};
  return out;
}

TrainingDivergence::TrainingDivergence(long step, const LossBreakdown& loss)
    : Error("training_divergence",
            "non-finite loss at step " + std::to_string(step) +
                " (mlm=" + std::to_string(loss.mlm) +
                ", metric=" + std::to_string(loss.metric) +
                ", total=" + std::to_string(loss.total) + ")"),
      step_(step),
      loss_(loss) {}

LossBreakdown train_step(std::span<const Item> batch, Encoder& encoder,
                         AdamW& optimizer, const Vocabulary& vocab,
                         const TrainConfig& cfg, Rng& rng, long step_index) {
  std::vector<Triplet> triplets = build_triplets(batch, vocab, rng, cfg);
  BatchGradients bg = compute_batch_gradients(triplets, encoder, cfg);
  const LossBreakdown& loss = bg.loss;
  if (!std::isfinite(loss.mlm) || !std::isfinite(loss.metric) ||
      !std::isfinite(loss.total)) {
    throw TrainingDivergence(step_index, loss);
  }
  optimizer.step(encoder.mutable_params(), bg.grads, cfg.learning_rate);
  return loss;
}

TrainReport train(const Catalog& dataset, const TrainConfig& cfg) {
  cfg.validate();
  if (dataset.empty()) throw IngestionError("training dataset is empty");
  if (dataset.size() < static_cast<std::size_t>(cfg.batch_size)) {
    throw IngestionError("training dataset has " +
                         std::to_string(dataset.size()) +
                         " items, fewer than batch_size " +
                         std::to_string(cfg.batch_size));
  }
  const auto start = std::chrono::steady_clock::now();
  const EncoderConfig enc_cfg = cfg.encoder_config();
  Vocabulary vocab = Vocabulary::build(dataset, enc_cfg.vocab_size);
  Encoder encoder(enc_cfg);
  AdamW optimizer(enc_cfg);
  Rng rng(derive_seed(cfg.seed, 1));

  TrainReport report;
  report.series.reserve(static_cast<std::size_t>(cfg.steps));
  std::vector<std::size_t> order(dataset.size());
  std::size_t cursor = order.size();  // forces a shuffle on the first step
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);
  std::vector<Item> batch;
  for (long step = 0; step < cfg.steps; ++step) {
    if (cursor + batch_size > order.size()) {
      std::iota(order.begin(), order.end(), 0);
      for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[rng.uniform_index(i)]);
      }
      cursor = 0;
    }
    batch.clear();
    for (std::size_t k = 0; k < batch_size; ++k) {
      batch.push_back(dataset[order[cursor + k]]);
    }
    cursor += batch_size;
    report.series.push_back(
        train_step(batch, encoder, optimizer, vocab, cfg, rng, step));
  }

  report.checkpoint = {enc_cfg, cfg.seed, std::move(vocab), encoder.params()};
  report.seconds = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - start)
                       .count();
  return report;
}

std::string metrics_csv(const TrainReport& report, std::uint64_t seed) {
  std::string out = "# seed=" + std::to_string(seed) + "\n";
  out += "step,mlm,metric,total\n";
  for (std::size_t i = 0; i < report.series.size(); ++i) {
    const LossBreakdown& l = report.series[i];
    out += std::to_string(i) + "," + format_fixed(l.mlm) + "," +
           format_fixed(l.metric) + "," + format_fixed(l.total) + "\n";
  }
  return out;
}

}  // namespace tripletlm
