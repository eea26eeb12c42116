#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "anlf/tensor.hpp"

namespace anlf {

/// Scores e = V_e · tanh(W_e · [h ; x ; y]).
struct FeatureAttentionParams {
  Tensor v_e;  // n×p
  Tensor w_e;  // p×(2hs+n+1)

  template <class F>
  void visit(F&& f) {
    f("v_e", v_e), f("w_e", w_e);
  }
  template <class F>
  void visit(F&& f) const {
    f("v_e", v_e), f("w_e", w_e);
  }
};

/// Scores d = V_d · tanh(W_d · [h ; x]) over every historical hour.
struct TemporalAttentionParams {
  Tensor v_d;  // T_h×p'
  Tensor w_d;  // p'×(2hs+n)

  template <class F>
  void visit(F&& f) {
    f("v_d", v_d), f("w_d", w_d);
  }
  template <class F>
  void visit(F&& f) const {
    f("v_d", v_d), f("w_d", w_d);
  }
};

/// Softmax weights over the historical days, by feature similarity to the
/// forecast day. Computed from data only, never differentiated.
struct SimilarDayWeights {
  std::vector<double> weights;
  std::vector<double> distances;

  std::size_t days() const noexcept { return weights.size(); }
};

struct FeatureAttentionResult {
  Tensor weights;   // α, sums to 1
  Tensor weighted;  // α ⊙ x
};

inline FeatureAttentionResult feature_attention(const FeatureAttentionParams& p, const Tensor& h_prev, const Tensor& x,
                                                const Tensor& y) {
  const std::size_t n = p.v_e.rows();
  if (x.rank() != 1 || x.size() != n || y.size() != 1 ||
      h_prev.size() + x.size() + 1 != p.w_e.cols()) {
    throw DimensionError("feature_attention: inputs h" + shape_string(h_prev.shape()) + " x" +
                         shape_string(x.shape()) + " y" + shape_string(y.shape()) + " do not fit W_e " +
                         shape_string(p.w_e.shape()) + " / V_e " + shape_string(p.v_e.shape()));
  }
  const Tensor query = concat({h_prev, x, reshape(y, {1})});
  const Tensor scores = matmul(p.v_e, tanh(matmul(p.w_e, query)));
  Tensor alpha = stable_softmax(scores);
  Tensor weighted = hadamard(alpha, x);
  return {std::move(alpha), std::move(weighted)};
}

/// Offset added to every day distance before taking the reciprocal.
inline constexpr double kDistanceFloor = 1e-8;
inline constexpr double kMaxInverseDistance = 1e8;

/// D_i = Σ_k ‖X_i[:,k] − X_f[:,k]‖₂ and γ = softmax(1 / (D + ε)).
inline SimilarDayWeights similar_day_weights(std::span<const Tensor> days, const Tensor& future) {
  if (days.empty()) throw DimensionError("similar_day_weights: no historical days");
  if (future.rank() != 2) throw DimensionError("similar_day_weights: future day must be a matrix");
  const std::size_t hours = future.rows(), features = future.cols();
  SimilarDayWeights out;
  std::vector<double> inverse;
  for (const auto& day : days) {
    if (day.shape() != future.shape()) {
      throw DimensionError("similar_day_weights: day " + shape_string(day.shape()) + " vs future " +
                           shape_string(future.shape()));
    }
    double distance = 0.0;
    for (std::size_t k = 0; k < features; ++k) {
      double sq = 0.0;
      for (std::size_t j = 0; j < hours; ++j) {
        const double diff = day.at(j, k) - future.at(j, k);
        sq += diff * diff;
      }
      distance += std::sqrt(sq);
    }
    out.distances.push_back(distance);
    inverse.push_back(std::min(1.0 / (distance + kDistanceFloor), kMaxInverseDistance));
  }
  const Tensor gamma = stable_softmax(Tensor::vector(std::move(inverse)));
  out.weights.assign(gamma.values().begin(), gamma.values().end());
  return out;
}

/// β as a days×hours matrix; β[i][j] is score i·hours + j of V_d's rows.
inline Tensor temporal_attention(const TemporalAttentionParams& p, const Tensor& h_prev, const Tensor& x,
                                 std::size_t days, std::size_t hours) {
  if (days * hours != p.v_d.rows()) {
    throw DimensionError("temporal_attention: " + std::to_string(days) + " days of " + std::to_string(hours) +
                         " hours do not match V_d " + shape_string(p.v_d.shape()));
  }
  if (x.rank() != 1 || h_prev.rank() != 1 || h_prev.size() + x.size() != p.w_d.cols()) {
    throw DimensionError("temporal_attention: inputs h" + shape_string(h_prev.shape()) + " x" +
                         shape_string(x.shape()) + " do not fit W_d " + shape_string(p.w_d.shape()));
  }
  const Tensor scores = matmul(p.v_d, tanh(matmul(p.w_d, concat({h_prev, x}))));
  return reshape(stable_softmax(scores), {days, hours});
}

/// a = Σ_i Σ_j γ_i β[i][j] H[i·hours + j]
inline Tensor context_vector(const SimilarDayWeights& gamma, const Tensor& beta, const Tensor& encoder_states) {
  const std::size_t days = gamma.days();
  if (beta.rank() != 2 || beta.rows() != days || encoder_states.rank() != 2 ||
      encoder_states.rows() != beta.size()) {
    throw DimensionError("context_vector: γ of " + std::to_string(days) + " days, β " + shape_string(beta.shape()) +
                         ", states " + shape_string(encoder_states.shape()));
  }
  const std::size_t hours = beta.cols();
  std::vector<double> day_weight(beta.size());
  for (std::size_t i = 0; i < days; ++i)
    std::fill_n(day_weight.begin() + static_cast<std::ptrdiff_t>(i * hours), hours, gamma.weights[i]);
  const Tensor mix = hadamard(reshape(beta, {beta.size()}), Tensor::vector(std::move(day_weight)));
  return matmul(transpose(encoder_states), mix);
}

}  // namespace anlf
