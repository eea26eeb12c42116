#include <vector>

#include <gtest/gtest.h>

#include "anlf/gradcheck.hpp"
#include "anlf/model.hpp"
#include "anlf/reference.hpp"
#include "anlf/training.hpp"
#include "anlf/verify.hpp"

using namespace anlf;

namespace {

std::vector<double> vals(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

std::size_t lstm_count(std::size_t d, std::size_t h) { return 4 * (h * d + h * h + 2 * h); }

std::size_t expected_count(const ModelConfig& c) {
  const std::size_t n = c.features, hs = c.hidden, w = 2 * hs, dir = c.direction_hidden();
  const std::size_t dirs = is_bidirectional(c.variant) ? 2 : 1;
  std::size_t total = 0;
  if (has_encoder_attention(c.variant)) total += n * c.attention_dim + c.attention_dim * (w + n + 1);
  total += dirs * lstm_count(n + 1, dir);
  std::size_t dec_in = n;
  if (has_decoder_attention(c.variant)) {
    total += c.history_len() * c.temporal_dim + c.temporal_dim * (w + n);
    dec_in += w;
  }
  total += dirs * lstm_count(dec_in, dir);
  total += c.head_dim * c.horizon() * w + c.horizon() * c.head_dim;
  return total;
}

}  // namespace

TEST(Params, SameSeedIsBitIdentical) {
  const auto a = init_params(tiny_config(Variant::anlf, 42));
  const auto b = init_params(tiny_config(Variant::anlf, 42));
  const auto ta = named_tensors(a), tb = named_tensors(b);
  ASSERT_EQ(ta.size(), tb.size());
  for (std::size_t i = 0; i < ta.size(); ++i) {
    EXPECT_EQ(ta[i].name, tb[i].name);
    EXPECT_EQ(vals(ta[i].value), vals(tb[i].value));
  }
}

TEST(Params, PlainEncoderDecoderHasNoAttentionBlocks) {
  const auto p = init_params(tiny_config(Variant::ed_lstm));
  EXPECT_FALSE(p.feature_attention);
  EXPECT_FALSE(p.temporal_attention);
  EXPECT_FALSE(p.encoder_backward);
  EXPECT_FALSE(p.decoder_backward);
}

TEST(Params, TinyCountMatchesClosedForm) {
  // 2·3 + 2·12 | 2·4·(4·4+4·4+8) | 8·2 + 2·11 | 2·4·(4·11+4·4+8) | 2·32 + 4·2
  EXPECT_EQ(init_params(tiny_config(Variant::anlf)).parameter_count(), 1004u);
  for (Variant v : kAllVariants) {
    const auto c = tiny_config(v);
    EXPECT_EQ(init_params(c).parameter_count(), expected_count(c)) << variant_name(v);
  }
}

TEST(Params, VariantNamesRoundTrip) {
  for (Variant v : kAllVariants) EXPECT_EQ(parse_variant(variant_name(v)), v);
  EXPECT_THROW(parse_variant("RFAttention"), ConfigError);
}

TEST(Params, ZeroDimensionRejected) {
  auto c = tiny_config();
  c.head_dim = 0;
  EXPECT_THROW(init_params(c), ConfigError);
}

TEST(Encode, ZeroParamsGiveZeroStates) {
  for (Variant v : kAllVariants) {
    const auto c = tiny_config(v);
    const auto p = zeros_like(init_params(c));
    Rng rng(1);
    const auto w = random_window(c, rng);
    const auto e = encode(p, c, w.x_hist, w.y_hist);
    EXPECT_EQ(e.states.shape(), (Shape{c.history_len(), c.state_width()}));
    for (double x : e.states.values()) EXPECT_EQ(x, 0.0);
    const auto f = forward(p, c, w);
    for (double x : f.values.values()) EXPECT_EQ(x, 0.0);
  }
}

TEST(Encode, PlainBiLstmIgnoresFeatureAttentionWeights) {
  auto c = tiny_config(Variant::ed_bilstm, 3);
  auto p = init_params(c);
  Rng rng(2);
  const auto w = random_window(c, rng);
  const auto base = encode(p, c, w.x_hist, w.y_hist);
  p.feature_attention = init_params(tiny_config(Variant::anlf, 9)).feature_attention;
  const auto again = encode(p, c, w.x_hist, w.y_hist);
  EXPECT_EQ(vals(base.states), vals(again.states));
  EXPECT_TRUE(again.alphas.empty());
}

TEST(Forward, MatchesStraightLineImplementation) {
  for (Variant v : kAllVariants) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto c = tiny_config(v, seed);
      const auto p = init_params(c);
      Rng rng(100 + seed);
      const auto w = random_window(c, rng);
      const auto got = forward(p, c, w);
      const auto enc = encode(p, c, w.x_hist, w.y_hist);
      const auto want = reference::forward(p, c, w);

      for (std::size_t t = 0; t < c.history_len(); ++t)
        for (std::size_t k = 0; k < c.state_width(); ++k)
          ASSERT_NEAR(enc.states.at(t, k), want.encoder_states[t][k], 1e-12) << variant_name(v);
      ASSERT_EQ(got.values.size(), want.forecast.size());
      for (std::size_t i = 0; i < want.forecast.size(); ++i)
        ASSERT_NEAR(got.values[i], want.forecast[i], 1e-12) << variant_name(v);
      ASSERT_EQ(got.alphas.size(), want.alphas.size());
      for (std::size_t t = 0; t < got.alphas.size(); ++t)
        for (std::size_t k = 0; k < c.features; ++k) ASSERT_NEAR(got.alphas[t][k], want.alphas[t][k], 1e-12);
      ASSERT_EQ(got.betas.size(), want.betas.size());
      for (std::size_t t = 0; t < got.betas.size(); ++t)
        for (std::size_t k = 0; k < c.history_len(); ++k) ASSERT_NEAR(got.betas[t][k], want.betas[t][k], 1e-12);
    }
  }
}

TEST(Forward, SingleHistoryDayHasUnitGamma) {
  auto c = tiny_config(Variant::anlf, 4);
  c.history_days = 1;
  const auto p = init_params(c);
  Rng rng(3);
  const auto w = random_window(c, rng);
  const auto f = forward(p, c, w);
  ASSERT_TRUE(f.gamma);
  EXPECT_EQ(f.gamma->weights, (std::vector<double>{1.0}));

  // With γ = [1] the context is the β-weighted average of the encoder states.
  const auto enc = encode(p, c, w.x_hist, w.y_hist);
  const auto a = context_vector(*f.gamma, f.betas[0], enc.states);
  for (std::size_t k = 0; k < c.state_width(); ++k) {
    double want = 0.0;
    for (std::size_t t = 0; t < c.history_len(); ++t) want += f.betas[0][t] * enc.states.at(t, k);
    EXPECT_NEAR(a[k], want, 1e-12);
  }
}

TEST(Forward, DeterministicAndHorizonLength) {
  for (Variant v : kAllVariants) {
    const auto c = tiny_config(v, 6);
    const auto p = init_params(c);
    Rng rng(4);
    const auto w = random_window(c, rng);
    const auto a = forward(p, c, w), b = forward(p, c, w);
    EXPECT_EQ(a.values.size(), c.horizon());
    EXPECT_EQ(vals(a.values), vals(b.values));
  }
}

TEST(Forward, MissingBlockIsRejected) {
  const auto c = tiny_config(Variant::anlf);
  auto p = init_params(c);
  p.temporal_attention.reset();
  Rng rng(5);
  EXPECT_THROW(forward(p, c, random_window(c, rng)), ContractError);
}

TEST(Forward, WrongHistoryShapeThrows) {
  const auto c = tiny_config(Variant::anlf);
  const auto p = init_params(c);
  Rng rng(6);
  auto w = random_window(c, rng);
  w.x_hist = Tensor::zeros({c.history_len() - 1, c.features});
  EXPECT_THROW(forward(p, c, w), DimensionError);
}

TEST(Forward, GradientsMatchFiniteDifferences) {
  const auto g = check_model_gradients(Variant::anlf, 2);
  EXPECT_GE(g.checked, 1u);
  EXPECT_TRUE(g.passed) << g.worst << " " << g.max_rel_error;
}
