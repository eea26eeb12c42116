#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "anlf/attention.hpp"
#include "anlf/recurrent.hpp"

using namespace anlf;

namespace {

std::vector<double> vals(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

Tensor normal(Shape shape, Rng& rng) {
  std::vector<double> v(shape_size(shape));
  for (auto& x : v) x = rng.normal();
  return Tensor(std::move(shape), std::move(v));
}

// softmax(V · tanh(W · q)) written out with loops.
std::vector<double> direct_scores(const Tensor& v, const Tensor& w, const std::vector<double>& q) {
  std::vector<double> hidden(w.rows());
  for (std::size_t r = 0; r < w.rows(); ++r) {
    double z = 0.0;
    for (std::size_t c = 0; c < w.cols(); ++c) z += w.at(r, c) * q[c];
    hidden[r] = std::tanh(z);
  }
  std::vector<double> e(v.rows());
  double top = -1e300;
  for (std::size_t r = 0; r < v.rows(); ++r) {
    double z = 0.0;
    for (std::size_t c = 0; c < v.cols(); ++c) z += v.at(r, c) * hidden[c];
    e[r] = z;
    top = std::max(top, z);
  }
  double total = 0.0;
  for (auto& x : e) total += (x = std::exp(x - top));
  for (auto& x : e) x /= total;
  return e;
}

}  // namespace

TEST(FeatureAttention, ZeroScoresGiveUniformWeights) {
  Rng rng(1);
  FeatureAttentionParams p{Tensor::zeros({4, 3}), normal({3, 2 * 2 + 4 + 1}, rng)};
  const auto x = Tensor::vector({1, -2, 3, 8});
  const auto r = feature_attention(p, normal({4}, rng), x, Tensor::vector({0.5}));
  for (double a : r.weights.values()) EXPECT_EQ(a, 0.25);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(r.weighted[i], x[i] / 4.0);
}

TEST(FeatureAttention, SingleFeatureWeightIsOne) {
  Rng rng(2);
  FeatureAttentionParams p{normal({1, 2}, rng), normal({2, 2 + 1 + 1}, rng)};
  const auto r = feature_attention(p, normal({2}, rng), Tensor::vector({3.5}), Tensor::vector({1}));
  EXPECT_EQ(r.weights[0], 1.0);
  EXPECT_EQ(r.weighted[0], 3.5);
}

TEST(FeatureAttention, MatchesDirectEvaluation) {
  Rng rng(3);
  const std::size_t n = 5, p_dim = 3, hs = 2;
  FeatureAttentionParams p{normal({n, p_dim}, rng), normal({p_dim, 2 * hs + n + 1}, rng)};
  const auto h = normal({2 * hs}, rng);
  const auto x = normal({n}, rng);
  const double y = 0.7;
  auto q = vals(h);
  const auto xv = vals(x);
  q.insert(q.end(), xv.begin(), xv.end());
  q.push_back(y);
  const auto want = direct_scores(p.v_e, p.w_e, q);
  const auto got = feature_attention(p, h, x, Tensor::vector({y}));
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_NEAR(got.weights[i], want[i], 1e-12);
    EXPECT_NEAR(got.weighted[i], want[i] * xv[i], 1e-12);
  }
}

TEST(FeatureAttention, ShapeMismatchThrows) {
  FeatureAttentionParams p{Tensor::zeros({3, 2}), Tensor::zeros({2, 8})};
  EXPECT_THROW(feature_attention(p, Tensor::zeros({4}), Tensor::zeros({2}), Tensor::vector({1})), DimensionError);
  EXPECT_THROW(feature_attention(p, Tensor::zeros({3}), Tensor::zeros({3}), Tensor::vector({1})), DimensionError);
}

TEST(SimilarDay, SingleDayWeightIsOne) {
  const std::vector<Tensor> days{Tensor::matrix(2, 2, {1, 2, 3, 4})};
  const auto g = similar_day_weights(days, Tensor::matrix(2, 2, {0, 0, 0, 0}));
  ASSERT_EQ(g.days(), 1u);
  EXPECT_EQ(g.weights[0], 1.0);
}

TEST(SimilarDay, EquidistantDaysShareWeight) {
  const auto future = Tensor::matrix(2, 1, {0, 0});
  const std::vector<Tensor> days{Tensor::matrix(2, 1, {1, 0}), Tensor::matrix(2, 1, {0, -1})};
  const auto g = similar_day_weights(days, future);
  EXPECT_EQ(g.weights, (std::vector<double>{0.5, 0.5}));
}

TEST(SimilarDay, IdenticalDayDominates) {
  const auto future = Tensor::matrix(2, 2, {1, 2, 3, 4});
  const std::vector<Tensor> days{future, Tensor::matrix(2, 2, {5, 7, -1, 0})};
  const auto g = similar_day_weights(days, future);

  // Per-column Euclidean distances summed over columns, then softmax of
  // the clamped reciprocals.
  std::vector<double> inv;
  for (const auto& d : days) {
    double dist = 0.0;
    for (std::size_t k = 0; k < 2; ++k) {
      double sq = 0.0;
      for (std::size_t j = 0; j < 2; ++j) sq += (d.at(j, k) - future.at(j, k)) * (d.at(j, k) - future.at(j, k));
      dist += std::sqrt(sq);
    }
    inv.push_back(std::min(1.0 / (dist + 1e-8), 1e8));
  }
  const double top = std::max(inv[0], inv[1]);
  const double z0 = std::exp(inv[0] - top), z1 = std::exp(inv[1] - top);
  EXPECT_NEAR(g.weights[0], z0 / (z0 + z1), 1e-12);
  EXPECT_NEAR(g.weights[1], z1 / (z0 + z1), 1e-12);
  EXPECT_EQ(g.distances[0], 0.0);
  EXPECT_GT(g.weights[0], 1.0 - 1e-12);
}

TEST(SimilarDay, ShapeMismatchThrows) {
  const std::vector<Tensor> days{Tensor::matrix(2, 1, {1, 0})};
  EXPECT_THROW(similar_day_weights(days, Tensor::matrix(1, 2, {0, 0})), DimensionError);
  EXPECT_THROW(similar_day_weights({}, Tensor::matrix(1, 2, {0, 0})), DimensionError);
}

TEST(TemporalAttention, ZeroScoresGiveUniformWeights) {
  Rng rng(4);
  TemporalAttentionParams p{Tensor::zeros({6, 2}), normal({2, 4 + 3}, rng)};
  const auto beta = temporal_attention(p, normal({4}, rng), normal({3}, rng), 2, 3);
  EXPECT_EQ(beta.shape(), (Shape{2, 3}));
  for (double b : beta.values()) EXPECT_EQ(b, 1.0 / 6.0);
}

TEST(TemporalAttention, SingletonIsOne) {
  Rng rng(5);
  TemporalAttentionParams p{normal({1, 2}, rng), normal({2, 2 + 1}, rng)};
  const auto beta = temporal_attention(p, normal({2}, rng), normal({1}, rng), 1, 1);
  EXPECT_EQ(beta.shape(), (Shape{1, 1}));
  EXPECT_EQ(beta[0], 1.0);
}

TEST(TemporalAttention, MatchesDirectEvaluation) {
  Rng rng(6);
  const std::size_t days = 3, hours = 4, n = 2, hs = 3, pd = 5;
  TemporalAttentionParams p{normal({days * hours, pd}, rng), normal({pd, 2 * hs + n}, rng)};
  const auto h = normal({2 * hs}, rng);
  const auto x = normal({n}, rng);
  auto q = vals(h);
  const auto xv = vals(x);
  q.insert(q.end(), xv.begin(), xv.end());
  const auto want = direct_scores(p.v_d, p.w_d, q);
  const auto beta = temporal_attention(p, h, x, days, hours);
  for (std::size_t i = 0; i < days; ++i)
    for (std::size_t j = 0; j < hours; ++j) EXPECT_NEAR(beta.at(i, j), want[i * hours + j], 1e-12);
}

TEST(TemporalAttention, DayHourMismatchThrows) {
  TemporalAttentionParams p{Tensor::zeros({6, 2}), Tensor::zeros({2, 7})};
  EXPECT_THROW(temporal_attention(p, Tensor::zeros({4}), Tensor::zeros({3}), 2, 4), DimensionError);
}

TEST(Context, MatchesDoubleLoop) {
  Rng rng(7);
  const std::size_t days = 3, hours = 2, width = 4;
  const auto h = normal({days * hours, width}, rng);
  const std::vector<Tensor> day_blocks{normal({1, 1}, rng), normal({1, 1}, rng), normal({1, 1}, rng)};
  const auto gamma = similar_day_weights(day_blocks, Tensor::matrix(1, 1, {0.0}));
  const auto beta = stable_softmax(normal({days * hours}, rng));
  const auto a = context_vector(gamma, reshape(beta, {days, hours}), h);
  for (std::size_t k = 0; k < width; ++k) {
    double want = 0.0;
    for (std::size_t i = 0; i < days; ++i)
      for (std::size_t j = 0; j < hours; ++j) want += gamma.weights[i] * beta[i * hours + j] * h.at(i * hours + j, k);
    EXPECT_NEAR(a[k], want, 1e-12);
  }
}

TEST(Context, EqualStatesWithUniformWeights) {
  const std::size_t days = 2, hours = 3;
  std::vector<double> rows;
  for (std::size_t r = 0; r < days * hours; ++r) rows.insert(rows.end(), {1.5, -2.0});
  const SimilarDayWeights gamma{{0.5, 0.5}, {1, 1}};
  const auto beta = Tensor::filled({days, hours}, 1.0 / 6.0);
  const auto a = context_vector(gamma, beta, Tensor::matrix(days * hours, 2, rows));
  // Σ γ_i β_ij = 1/2 when β sums to one over all hours and γ to one over days.
  EXPECT_NEAR(a[0], 1.5 * 0.5, 1e-15);
  EXPECT_NEAR(a[1], -2.0 * 0.5, 1e-15);
}

TEST(Context, SingletonReturnsTheState) {
  const SimilarDayWeights gamma{{1.0}, {0.0}};
  const auto a = context_vector(gamma, Tensor::matrix(1, 1, {1.0}), Tensor::matrix(1, 3, {4, 5, 6}));
  EXPECT_EQ(vals(a), (std::vector<double>{4, 5, 6}));
}

TEST(Context, ZeroStatesGiveZero) {
  const SimilarDayWeights gamma{{0.3, 0.7}, {1, 2}};
  const auto a = context_vector(gamma, Tensor::filled({2, 2}, 0.25), Tensor::zeros({4, 3}));
  EXPECT_EQ(vals(a), (std::vector<double>{0, 0, 0}));
}

TEST(Context, ShapeMismatchThrows) {
  const SimilarDayWeights gamma{{0.5, 0.5}, {1, 1}};
  EXPECT_THROW(context_vector(gamma, Tensor::filled({2, 2}, 0.25), Tensor::zeros({3, 3})), DimensionError);
}
