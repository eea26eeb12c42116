#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "anlf/random.hpp"
#include "anlf/tensor.hpp"

namespace anlf {

namespace detail {

inline Tensor random_tensor(Shape shape, double bound, Rng& rng) {
  std::vector<double> v(shape_size(shape));
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return Tensor(std::move(shape), std::move(v));
}

}  // namespace detail

/// Weights and the two bias vectors per gate of one LSTM direction. Input
/// weights are hidden×input, recurrent weights hidden×hidden.
struct LstmParams {
  Tensor w_ix, w_fx, w_gx, w_ox;
  Tensor w_ih, w_fh, w_gh, w_oh;
  Tensor b_ix, b_fx, b_gx, b_ox;
  Tensor b_ih, b_fh, b_gh, b_oh;

  std::size_t input_width() const { return w_ix.cols(); }
  std::size_t hidden_size() const { return w_ix.rows(); }

  static LstmParams filled(std::size_t input, std::size_t hidden, double value) {
    LstmParams p;
    p.visit([&](std::string_view name, Tensor& t) {
      const bool bias = name[0] == 'b';
      const bool recurrent = name.back() == 'h';
      t = Tensor::filled(bias ? Shape{hidden} : Shape{hidden, recurrent ? hidden : input}, value);
    });
    return p;
  }

  static LstmParams zeros(std::size_t input, std::size_t hidden) { return filled(input, hidden, 0.0); }

  /// Uniform in [-1/sqrt(hidden), 1/sqrt(hidden)], drawn in field order.
  static LstmParams random(std::size_t input, std::size_t hidden, Rng& rng) {
    LstmParams p = zeros(input, hidden);
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    p.visit([&](std::string_view, Tensor& t) { t = detail::random_tensor(t.shape(), bound, rng); });
    return p;
  }

  template <class F>
  void visit(F&& f) {
    visit_fields(*this, f);
  }
  template <class F>
  void visit(F&& f) const {
    visit_fields(*this, f);
  }

 private:
  template <class Self, class F>
  static void visit_fields(Self& s, F& f) {
    f("w_ix", s.w_ix), f("w_fx", s.w_fx), f("w_gx", s.w_gx), f("w_ox", s.w_ox);
    f("w_ih", s.w_ih), f("w_fh", s.w_fh), f("w_gh", s.w_gh), f("w_oh", s.w_oh);
    f("b_ix", s.b_ix), f("b_fx", s.b_fx), f("b_gx", s.b_gx), f("b_ox", s.b_ox);
    f("b_ih", s.b_ih), f("b_fh", s.b_fh), f("b_gh", s.b_gh), f("b_oh", s.b_oh);
  }
};

struct LstmState {
  Tensor h;
  Tensor c;

  static LstmState zeros(std::size_t hidden) { return {Tensor::zeros({hidden}), Tensor::zeros({hidden})}; }
};

struct BiLstmParams {
  LstmParams forward;
  LstmParams backward;
};

struct FeedForwardParams {
  Tensor w_y;  // hidden×input
  Tensor v_y;  // output×hidden

  template <class F>
  void visit(F&& f) {
    f("w_y", w_y), f("v_y", v_y);
  }
  template <class F>
  void visit(F&& f) const {
    f("w_y", w_y), f("v_y", v_y);
  }
};

/// One step of
///   i = σ(W_ix x + b_ix + W_ih h + b_ih)     f, o likewise
///   g = tanh(W_gx x + b_gx + W_gh h + b_gh)
///   c' = f ⊙ c + i ⊙ g,   h' = o ⊙ tanh(c')
inline LstmState lstm_cell_step(const LstmParams& p, const LstmState& prev, const Tensor& x) {
  if (x.rank() != 1 || x.size() != p.input_width()) {
    throw DimensionError("lstm_cell_step: input " + shape_string(x.shape()) + ", expected width " +
                         std::to_string(p.input_width()));
  }
  if (prev.h.size() != p.hidden_size() || prev.c.size() != p.hidden_size()) {
    throw DimensionError("lstm_cell_step: state width " + std::to_string(prev.h.size()) + ", expected " +
                         std::to_string(p.hidden_size()));
  }
  auto pre = [&](const Tensor& wx, const Tensor& bx, const Tensor& wh, const Tensor& bh) {
    return add(add(matmul(wx, x), bx), add(matmul(wh, prev.h), bh));
  };
  const Tensor i = sigmoid(pre(p.w_ix, p.b_ix, p.w_ih, p.b_ih));
  const Tensor f = sigmoid(pre(p.w_fx, p.b_fx, p.w_fh, p.b_fh));
  const Tensor g = tanh(pre(p.w_gx, p.b_gx, p.w_gh, p.b_gh));
  const Tensor o = sigmoid(pre(p.w_ox, p.b_ox, p.w_oh, p.b_oh));
  Tensor c = add(hadamard(f, prev.c), hadamard(i, g));
  Tensor h = hadamard(o, tanh(c));
  return {std::move(h), std::move(c)};
}

enum class Direction { forward, backward };

/// Runs one direction over the sequence. Result is indexed by input time:
/// states[t] is the state after consuming inputs[t].
inline std::vector<LstmState> lstm_sequence(const LstmParams& p, std::span<const Tensor> inputs, LstmState init,
                                            Direction dir) {
  if (inputs.empty()) throw DimensionError("lstm_sequence: empty sequence");
  const std::size_t steps = inputs.size();
  std::vector<LstmState> states(steps);
  LstmState state = std::move(init);
  for (std::size_t k = 0; k < steps; ++k) {
    const std::size_t t = dir == Direction::forward ? k : steps - 1 - k;
    state = lstm_cell_step(p, state, inputs[t]);
    states[t] = state;
  }
  return states;
}

struct BiLstmStep {
  Tensor h;  // [h_forward ; h_backward]
  LstmState forward;
  LstmState backward;
};

struct BiLstmOutput {
  std::vector<BiLstmStep> steps;
  LstmState forward_final;   // after the last input
  LstmState backward_final;  // after the first input
};

inline BiLstmOutput bilstm_sequence(const BiLstmParams& p, std::span<const Tensor> inputs, LstmState init_forward,
                                    LstmState init_backward) {
  if (inputs.empty()) throw DimensionError("bilstm_sequence: empty sequence");
  auto fwd = lstm_sequence(p.forward, inputs, std::move(init_forward), Direction::forward);
  auto bwd = lstm_sequence(p.backward, inputs, std::move(init_backward), Direction::backward);
  BiLstmOutput out;
  out.steps.reserve(inputs.size());
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    out.steps.push_back({concat({fwd[t].h, bwd[t].h}), fwd[t], bwd[t]});
  }
  out.forward_final = fwd.back();
  out.backward_final = bwd.front();
  return out;
}

/// V_y · relu(W_y · h)
inline Tensor feedforward_relu(const FeedForwardParams& p, const Tensor& h_stack) {
  if (h_stack.rank() != 1 || h_stack.size() != p.w_y.cols()) {
    throw DimensionError("feedforward_relu: input " + shape_string(h_stack.shape()) + ", expected width " +
                         std::to_string(p.w_y.cols()));
  }
  return matmul(p.v_y, relu(matmul(p.w_y, h_stack)));
}

}  // namespace anlf
