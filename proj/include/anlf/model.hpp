#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "anlf/attention.hpp"
#include "anlf/random.hpp"
#include "anlf/recurrent.hpp"
#include "anlf/sample.hpp"
#include "anlf/tensor.hpp"

namespace anlf {

/// The full model and its neural ablations.
enum class Variant { anlf, e_attention, d_attention, ed_bilstm, ed_lstm };

inline constexpr std::array<Variant, 5> kAllVariants{Variant::anlf, Variant::e_attention, Variant::d_attention,
                                                     Variant::ed_bilstm, Variant::ed_lstm};

inline std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::anlf: return "ANLF";
    case Variant::e_attention: return "eAttention";
    case Variant::d_attention: return "dAttention";
    case Variant::ed_bilstm: return "EDBiLSTM";
    case Variant::ed_lstm: return "EDLSTM";
  }
  return "?";
}

inline Variant parse_variant(std::string_view name) {
  for (auto v : kAllVariants)
    if (variant_name(v) == name) return v;
  throw ConfigError("unknown model variant '" + std::string(name) +
                    "' (expected ANLF, eAttention, dAttention, EDBiLSTM or EDLSTM)");
}

inline bool has_encoder_attention(Variant v) { return v == Variant::anlf || v == Variant::e_attention; }
inline bool has_decoder_attention(Variant v) { return v == Variant::anlf || v == Variant::d_attention; }
inline bool is_bidirectional(Variant v) { return v != Variant::ed_lstm; }

struct ModelConfig {
  std::size_t history_days = 7;     // M
  std::size_t hours_per_day = 24;   // t_d
  std::size_t features = 45;        // n
  std::size_t hidden = 256;         // hs
  std::size_t attention_dim = 32;   // p
  std::size_t temporal_dim = 32;    // p'
  std::size_t head_dim = 128;       // p''
  Variant variant = Variant::anlf;
  std::uint64_t seed = 0;

  std::size_t history_len() const { return history_days * hours_per_day; }  // T_h
  std::size_t horizon() const { return hours_per_day; }                      // T_f
  /// Width of one encoder/decoder output state.
  std::size_t state_width() const { return 2 * hidden; }
  /// Hidden size of each recurrent direction.
  std::size_t direction_hidden() const { return is_bidirectional(variant) ? hidden : 2 * hidden; }

  void validate() const {
    const std::pair<const char*, std::size_t> dims[] = {
        {"history_days", history_days}, {"hours_per_day", hours_per_day}, {"features", features},
        {"hidden", hidden},             {"attention_dim", attention_dim}, {"temporal_dim", temporal_dim},
        {"head_dim", head_dim}};
    for (const auto& [name, value] : dims)
      if (value == 0) throw ConfigError(std::string("model.") + name + " must be positive");
  }

  bool operator==(const ModelConfig&) const = default;
};

struct ModelParams {
  std::optional<FeatureAttentionParams> feature_attention;
  LstmParams encoder_forward;
  std::optional<LstmParams> encoder_backward;
  std::optional<TemporalAttentionParams> temporal_attention;
  LstmParams decoder_forward;
  std::optional<LstmParams> decoder_backward;
  FeedForwardParams head;

  /// Calls f(name, tensor) for every parameter in a fixed order.
  template <class F>
  void visit(F&& f) {
    visit_all(*this, f);
  }
  template <class F>
  void visit(F&& f) const {
    visit_all(*this, f);
  }

  std::size_t parameter_count() const {
    std::size_t count = 0;
    visit([&](const std::string&, const Tensor& t) { count += t.size(); });
    return count;
  }

 private:
  template <class Self, class F>
  static void visit_all(Self& s, F& f) {
    auto prefixed = [&f](const std::string& prefix) {
      return [&f, prefix](std::string_view name, auto& t) { f(prefix + std::string(name), t); };
    };
    if (s.feature_attention) s.feature_attention->visit(prefixed("feature_attention."));
    s.encoder_forward.visit(prefixed("encoder.forward."));
    if (s.encoder_backward) s.encoder_backward->visit(prefixed("encoder.backward."));
    if (s.temporal_attention) s.temporal_attention->visit(prefixed("temporal_attention."));
    s.decoder_forward.visit(prefixed("decoder.forward."));
    if (s.decoder_backward) s.decoder_backward->visit(prefixed("decoder.backward."));
    s.head.visit(prefixed("head."));
  }
};

/// Applies `fn` to every tensor of a copy of `params`.
template <class Fn>
ModelParams map_params(ModelParams params, Fn&& fn) {
  params.visit([&](const std::string&, Tensor& t) { t = fn(t); });
  return params;
}

/// Registers every parameter as a leaf of `tape`.
inline ModelParams bind(Tape& tape, const ModelParams& params) {
  return map_params(params, [&](const Tensor& t) { return tape.parameter(t); });
}

inline ModelParams zeros_like(const ModelParams& params) {
  return map_params(params, [](const Tensor& t) { return Tensor::zeros(t.shape()); });
}

/// Uniform weights in ±1/sqrt(h) with h the owning block's hidden size,
/// deterministic in config.seed.
inline ModelParams init_params(const ModelConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const std::size_t n = config.features, hs = config.hidden, width = config.state_width();
  const std::size_t dir_hidden = config.direction_hidden();
  const double bound = 1.0 / std::sqrt(static_cast<double>(hs));
  const bool bi = is_bidirectional(config.variant);

  ModelParams p;
  if (has_encoder_attention(config.variant)) {
    p.feature_attention = FeatureAttentionParams{
        detail::random_tensor({n, config.attention_dim}, bound, rng),
        detail::random_tensor({config.attention_dim, width + n + 1}, bound, rng)};
  }
  p.encoder_forward = LstmParams::random(n + 1, dir_hidden, rng);
  if (bi) p.encoder_backward = LstmParams::random(n + 1, dir_hidden, rng);

  const bool temporal = has_decoder_attention(config.variant);
  if (temporal) {
    p.temporal_attention = TemporalAttentionParams{
        detail::random_tensor({config.history_len(), config.temporal_dim}, bound, rng),
        detail::random_tensor({config.temporal_dim, width + n}, bound, rng)};
  }
  const std::size_t decoder_input = temporal ? n + width : n;
  p.decoder_forward = LstmParams::random(decoder_input, dir_hidden, rng);
  if (bi) p.decoder_backward = LstmParams::random(decoder_input, dir_hidden, rng);

  p.head.w_y = detail::random_tensor({config.head_dim, config.horizon() * width}, bound, rng);
  p.head.v_y = detail::random_tensor({config.horizon(), config.head_dim}, bound, rng);
  return p;
}

struct Encoding {
  Tensor states;  // T_h × 2hs
  LstmState forward_final;
  std::optional<LstmState> backward_final;
  std::vector<Tensor> alphas;  // one per history step, encoder attention only
};

struct Forecast {
  Tensor values;               // T_f, standardized
  std::vector<Tensor> alphas;  // per history step
  std::vector<Tensor> betas;   // per forecast step, days × hours
  std::optional<SimilarDayWeights> gamma;
};

namespace detail {

inline void require_matrix(const char* what, const Tensor& t, std::size_t rows, std::size_t cols) {
  if (t.rank() != 2 || t.rows() != rows || t.cols() != cols) {
    throw DimensionError(std::string(what) + ": expected [" + std::to_string(rows) + "x" + std::to_string(cols) +
                         "], got " + shape_string(t.shape()));
  }
}

inline std::vector<Tensor> rows_of(const Tensor& m) {
  std::vector<Tensor> rows;
  rows.reserve(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) rows.push_back(m.row(r));
  return rows;
}

// Blocks the variant needs must be present; extra blocks are ignored.
inline void require_block(const char* name, bool needed, bool present) {
  if (needed && !present) throw ContractError(std::string("model parameters lack the ") + name + " block");
}

// Query for attention: the forward direction's (h, c) at the previous step.
inline Tensor attention_query(const LstmState& s) { return concat({s.h, s.c}); }

}  // namespace detail

/// Feature-selection attention feeding a bidirectional LSTM over the
/// history window. The recurrent input at each step is [α ⊙ x ; y].
inline Encoding encode(const ModelParams& params, const ModelConfig& config, const Tensor& x_hist,
                       const Tensor& y_hist) {
  const std::size_t steps = config.history_len();
  detail::require_matrix("encode: history features", x_hist, steps, config.features);
  if (y_hist.rank() != 1 || y_hist.size() != steps) {
    throw DimensionError("encode: history targets " + shape_string(y_hist.shape()) + ", expected [" +
                         std::to_string(steps) + "]");
  }
  Encoding out;
  const auto xs = detail::rows_of(x_hist);
  std::vector<Tensor> inputs;
  inputs.reserve(steps);
  std::vector<LstmState> fwd(steps);
  LstmState state = LstmState::zeros(config.direction_hidden());
  const bool attend = has_encoder_attention(config.variant);
  const bool bidirectional = is_bidirectional(config.variant);
  detail::require_block("feature_attention", attend, params.feature_attention.has_value());
  detail::require_block("encoder.backward", bidirectional, params.encoder_backward.has_value());
  for (std::size_t t = 0; t < steps; ++t) {
    const Tensor y = Tensor::vector({y_hist[t]});
    Tensor x = xs[t];
    if (attend) {
      auto attended = feature_attention(*params.feature_attention, detail::attention_query(state), x, y);
      out.alphas.push_back(std::move(attended.weights));
      x = std::move(attended.weighted);
    }
    inputs.push_back(concat({x, y}));
    state = lstm_cell_step(params.encoder_forward, state, inputs.back());
    fwd[t] = state;
  }
  out.forward_final = state;

  std::vector<Tensor> hidden;
  hidden.reserve(steps);
  if (bidirectional) {
    auto bwd = lstm_sequence(*params.encoder_backward, inputs, LstmState::zeros(config.direction_hidden()),
                             Direction::backward);
    for (std::size_t t = 0; t < steps; ++t) hidden.push_back(concat({fwd[t].h, bwd[t].h}));
    out.backward_final = bwd.front();
  } else {
    for (const auto& s : fwd) hidden.push_back(s.h);
  }
  out.states = reshape(concat(hidden), {steps, config.state_width()});
  return out;
}

/// Decoder over the forecast day. With temporal attention each step consumes
/// [x_t ; a_t], a_t = Σ γ_i β_ij H_ij, β_t driven by the forward direction;
/// the backward direction reuses the same inputs. Each decoder direction
/// starts from the terminal state of the matching encoder direction.
inline Forecast decode(const ModelParams& params, const ModelConfig& config, const Encoding& encoding,
                       const Tensor& x_future, std::span<const Tensor> x_days) {
  const std::size_t steps = config.horizon();
  detail::require_matrix("decode: future features", x_future, steps, config.features);
  detail::require_matrix("decode: encoder states", encoding.states, config.history_len(), config.state_width());

  Forecast out;
  const auto xs = detail::rows_of(x_future);
  std::vector<Tensor> inputs;
  inputs.reserve(steps);
  std::vector<LstmState> fwd(steps);
  LstmState state = encoding.forward_final;
  const bool attend = has_decoder_attention(config.variant);
  const bool bidirectional = is_bidirectional(config.variant);
  detail::require_block("temporal_attention", attend, params.temporal_attention.has_value());
  detail::require_block("decoder.backward", bidirectional, params.decoder_backward.has_value());

  if (attend) {
    if (x_days.size() != config.history_days) {
      throw DimensionError("decode: " + std::to_string(x_days.size()) + " historical day blocks, expected " +
                           std::to_string(config.history_days));
    }
    out.gamma = similar_day_weights(x_days, x_future);
  }
  for (std::size_t t = 0; t < steps; ++t) {
    if (attend) {
      Tensor beta = temporal_attention(*params.temporal_attention, detail::attention_query(state), xs[t],
                                       config.history_days, config.hours_per_day);
      inputs.push_back(concat({xs[t], context_vector(*out.gamma, beta, encoding.states)}));
      out.betas.push_back(std::move(beta));
    } else {
      inputs.push_back(xs[t]);
    }
    state = lstm_cell_step(params.decoder_forward, state, inputs.back());
    fwd[t] = state;
  }

  std::vector<Tensor> hidden;
  hidden.reserve(steps);
  if (bidirectional) {
    if (!encoding.backward_final) throw ContractError("decode: bidirectional decoder needs a backward encoder state");
    auto bwd = lstm_sequence(*params.decoder_backward, inputs, *encoding.backward_final, Direction::backward);
    for (std::size_t t = 0; t < steps; ++t) hidden.push_back(concat({fwd[t].h, bwd[t].h}));
  } else {
    for (const auto& s : fwd) hidden.push_back(s.h);
  }
  out.values = feedforward_relu(params.head, concat(hidden));
  return out;
}

inline Forecast forward(const ModelParams& params, const ModelConfig& config, const WindowSample& sample) {
  Encoding encoding = encode(params, config, sample.x_hist, sample.y_hist);
  Forecast out = decode(params, config, encoding, sample.x_future, sample.x_days);
  out.alphas = std::move(encoding.alphas);
  return out;
}

}  // namespace anlf
