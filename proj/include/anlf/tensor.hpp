#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "anlf/error.hpp"

namespace anlf {

using Shape = std::vector<std::size_t>;

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

class Tape;

/// Dense row-major array of doubles. Values are immutable and shared between
/// copies; a tensor produced by an operation on taped inputs carries a handle
/// to its node so that Tape::backward can route gradients to it.
class Tensor {
 public:
  Tensor() : values_(std::make_shared<const std::vector<double>>(1, 0.0)) {}

  Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)) {
    for (auto extent : shape_) {
      if (extent == 0) throw DimensionError("tensor extents must be positive, got " + shape_string(shape_));
    }
    if (shape_size(shape_) != values.size()) {
      throw DimensionError("tensor shape " + shape_string(shape_) + " does not hold " +
                           std::to_string(values.size()) + " values");
    }
    values_ = std::make_shared<const std::vector<double>>(std::move(values));
  }

  static Tensor scalar(double v) { return Tensor({}, {v}); }
  static Tensor vector(std::vector<double> v) {
    const auto n = v.size();
    return Tensor({n}, std::move(v));
  }
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
    return Tensor({rows, cols}, std::move(v));
  }
  static Tensor filled(Shape shape, double value) {
    const auto n = shape_size(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value));
  }
  static Tensor zeros(Shape shape) { return filled(std::move(shape), 0.0); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return values_->size(); }
  std::size_t rows() const noexcept { return shape_.empty() ? 1 : shape_[0]; }
  std::size_t cols() const noexcept { return shape_.size() < 2 ? 1 : shape_[1]; }

  std::span<const double> values() const noexcept { return *values_; }
  double operator[](std::size_t i) const { return (*values_)[i]; }
  double at(std::size_t r, std::size_t c) const { return (*values_)[r * cols() + c]; }
  double item() const {
    if (size() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape_));
    return (*values_)[0];
  }

  /// Copy of row `r` of a matrix as a constant vector.
  Tensor row(std::size_t r) const {
    if (rank() != 2 || r >= rows()) {
      throw DimensionError("row " + std::to_string(r) + " of tensor " + shape_string(shape_));
    }
    const auto first = values_->begin() + static_cast<std::ptrdiff_t>(r * cols());
    return vector(std::vector<double>(first, first + static_cast<std::ptrdiff_t>(cols())));
  }

  bool on_tape() const noexcept { return tape_ != nullptr; }
  Tape* tape() const noexcept { return tape_; }
  std::size_t node() const noexcept { return node_; }

  /// Same values, no tape.
  Tensor detached() const {
    Tensor t = *this;
    t.tape_ = nullptr;
    t.node_ = 0;
    return t;
  }

 private:
  friend class Tape;
  Shape shape_;
  std::shared_ptr<const std::vector<double>> values_;
  Tape* tape_ = nullptr;
  std::size_t node_ = 0;
};

/// Gradient rules that can be deliberately broken to prove the verification
/// suite notices. Only one rule is faulted at a time.
enum class GradRule { none, matmul, sigmoid, tanh, relu, add, hadamard, softmax, concat };

namespace detail {
inline std::atomic<GradRule> injected_fault{GradRule::none};

inline double fault_sign(GradRule rule) {
  return injected_fault.load(std::memory_order_relaxed) == rule ? -1.0 : 1.0;
}
}  // namespace detail

class ScopedGradFault {
 public:
  explicit ScopedGradFault(GradRule rule) : previous_(detail::injected_fault.exchange(rule)) {}
  ~ScopedGradFault() { detail::injected_fault.store(previous_); }
  ScopedGradFault(const ScopedGradFault&) = delete;
  ScopedGradFault& operator=(const ScopedGradFault&) = delete;

 private:
  GradRule previous_;
};

/// Define-by-run record of operations. One tape per forward/backward pass;
/// tapes are independent and may live on different threads.
class Tape {
 public:
  /// Accumulates d(loss)/d(input) given d(loss)/d(output). Spans for
  /// constant inputs are empty.
  using GradFn = std::function<void(std::span<const double> out_grad, std::span<const std::span<double>> in_grads)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers `value` as a leaf whose gradient is reported by grad().
  Tensor parameter(const Tensor& value) {
    Tensor t = value;
    t.tape_ = this;
    t.node_ = nodes_.size();
    nodes_.push_back(Node{{}, {}, value.size()});
    return t;
  }

  /// Records an operation. Returns a constant when no input is on a tape.
  static Tensor record(Shape shape, std::vector<double> values, std::initializer_list<const Tensor*> inputs, GradFn fn) {
    return record(std::move(shape), std::move(values), std::span<const Tensor* const>(inputs.begin(), inputs.size()),
                  std::move(fn));
  }

  static Tensor record(Shape shape, std::vector<double> values, std::span<const Tensor* const> inputs, GradFn fn) {
    Tensor out(std::move(shape), std::move(values));
    Tape* tape = nullptr;
    for (const Tensor* in : inputs) {
      if (!in->tape_) continue;
      if (tape && tape != in->tape_) throw ContractError("operation mixes tensors from different tapes");
      tape = in->tape_;
    }
    if (!tape) return out;
    Node node{{}, std::move(fn), out.size()};
    node.inputs.reserve(inputs.size());
    for (const Tensor* in : inputs) node.inputs.push_back(in->tape_ ? in->node_ : kConstant);
    out.tape_ = tape;
    out.node_ = tape->nodes_.size();
    tape->nodes_.push_back(std::move(node));
    return out;
  }

  /// Reverse sweep from a scalar loss. A constant loss leaves every gradient
  /// at zero.
  void backward(const Tensor& loss) {
    if (loss.size() != 1) throw ContractError("backward needs a scalar loss, got shape " + shape_string(loss.shape()));
    if (loss.tape_ && loss.tape_ != this) throw ContractError("loss belongs to a different tape");
    grads_.assign(nodes_.size(), {});
    if (!loss.tape_) return;
    grads_[loss.node_].assign(1, 1.0);

    std::vector<std::span<double>> in_grads;
    for (std::size_t i = loss.node_ + 1; i-- > 0;) {
      const Node& node = nodes_[i];
      if (grads_[i].empty() || !node.fn) continue;
      in_grads.clear();
      for (auto input : node.inputs) {
        if (input == kConstant) {
          in_grads.emplace_back();
          continue;
        }
        auto& g = grads_[input];
        if (g.empty()) g.assign(nodes_[input].size, 0.0);
        in_grads.emplace_back(g);
      }
      node.fn(grads_[i], in_grads);
    }
  }

  /// Gradient of the last backward() loss with respect to `t`; zeros if `t`
  /// was not reached.
  Tensor grad(const Tensor& t) const {
    if (t.tape_ != this) throw ContractError("grad() of a tensor not recorded on this tape");
    if (t.node_ < grads_.size() && !grads_[t.node_].empty()) return Tensor(t.shape(), grads_[t.node_]);
    return Tensor::zeros(t.shape());
  }

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  static constexpr std::size_t kConstant = std::numeric_limits<std::size_t>::max();

  struct Node {
    std::vector<std::size_t> inputs;
    GradFn fn;
    std::size_t size;
  };

  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;
};

// ---------------------------------------------------------------------------
// Operations

/// Matrix product. A rank-1 right operand is treated as a column and the
/// result is rank-1.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  const bool column = b.rank() == 1;
  if (a.rank() != 2 || (b.rank() != 2 && !column) || a.cols() != b.rows()) {
    throw DimensionError("matmul: cannot multiply " + shape_string(a.shape()) + " by " + shape_string(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = column ? 1 : b.cols();
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      const double* brow = bv.data() + p * n;
      double* orow = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  Shape shape = column ? Shape{m} : Shape{m, n};
  return Tape::record(std::move(shape), std::move(out), {&a, &b},
                      [a, b, m, k, n](std::span<const double> g, std::span<const std::span<double>> in) {
                        const double sign = detail::fault_sign(GradRule::matmul);
                        const auto av = a.values();
                        const auto bv = b.values();
                        if (!in[0].empty()) {
                          for (std::size_t i = 0; i < m; ++i)
                            for (std::size_t p = 0; p < k; ++p) {
                              double s = 0.0;
                              for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * bv[p * n + j];
                              in[0][i * k + p] += sign * s;
                            }
                        }
                        if (!in[1].empty()) {
                          for (std::size_t i = 0; i < m; ++i)
                            for (std::size_t p = 0; p < k; ++p) {
                              const double aip = av[i * k + p];
                              for (std::size_t j = 0; j < n; ++j) in[1][p * n + j] += sign * aip * g[i * n + j];
                            }
                        }
                      });
}

namespace detail {

inline double sigmoid_value(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Unary op whose derivative is a function of (input, output).
template <class Fwd, class Deriv>
Tensor unary(const Tensor& x, GradRule rule, Fwd fwd, Deriv deriv) {
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  std::transform(xv.begin(), xv.end(), out.begin(), fwd);
  auto y = std::make_shared<const std::vector<double>>(out);
  return Tape::record(x.shape(), std::move(out), {&x},
                      [x, y, rule, deriv](std::span<const double> g, std::span<const std::span<double>> in) {
                        const double sign = fault_sign(rule);
                        const auto xv = x.values();
                        for (std::size_t i = 0; i < g.size(); ++i) in[0][i] += sign * g[i] * deriv(xv[i], (*y)[i]);
                      });
}

inline void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

}  // namespace detail

inline Tensor sigmoid(const Tensor& x) {
  return detail::unary(x, GradRule::sigmoid, detail::sigmoid_value, [](double, double y) { return y * (1.0 - y); });
}

inline Tensor tanh(const Tensor& x) {
  return detail::unary(x, GradRule::tanh, [](double v) { return std::tanh(v); },
                       [](double, double y) { return 1.0 - y * y; });
}

// relu'(0) = 0
inline Tensor relu(const Tensor& x) {
  return detail::unary(x, GradRule::relu, [](double v) { return v > 0.0 ? v : 0.0; },
                       [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::require_same_shape("add", a, b);
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return Tape::record(a.shape(), std::move(out), {&a, &b},
                      [](std::span<const double> g, std::span<const std::span<double>> in) {
                        const double sign = detail::fault_sign(GradRule::add);
                        for (auto& dst : in)
                          if (!dst.empty())
                            for (std::size_t i = 0; i < g.size(); ++i) dst[i] += sign * g[i];
                      });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::require_same_shape("sub", a, b);
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return Tape::record(a.shape(), std::move(out), {&a, &b},
                      [](std::span<const double> g, std::span<const std::span<double>> in) {
                        if (!in[0].empty())
                          for (std::size_t i = 0; i < g.size(); ++i) in[0][i] += g[i];
                        if (!in[1].empty())
                          for (std::size_t i = 0; i < g.size(); ++i) in[1][i] -= g[i];
                      });
}

inline Tensor hadamard(const Tensor& a, const Tensor& b) {
  detail::require_same_shape("hadamard", a, b);
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return Tape::record(a.shape(), std::move(out), {&a, &b},
                      [a, b](std::span<const double> g, std::span<const std::span<double>> in) {
                        const double sign = detail::fault_sign(GradRule::hadamard);
                        const auto av = a.values();
                        const auto bv = b.values();
                        if (!in[0].empty())
                          for (std::size_t i = 0; i < g.size(); ++i) in[0][i] += sign * g[i] * bv[i];
                        if (!in[1].empty())
                          for (std::size_t i = 0; i < g.size(); ++i) in[1][i] += sign * g[i] * av[i];
                      });
}

inline Tensor scale(const Tensor& a, double c) {
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * av[i];
  return Tape::record(a.shape(), std::move(out), {&a},
                      [c](std::span<const double> g, std::span<const std::span<double>> in) {
                        for (std::size_t i = 0; i < g.size(); ++i) in[0][i] += c * g[i];
                      });
}

inline Tensor sum(const Tensor& a) {
  const auto av = a.values();
  double s = 0.0;
  for (double v : av) s += v;
  return Tape::record({}, {s}, {&a}, [](std::span<const double> g, std::span<const std::span<double>> in) {
    for (auto& d : in[0]) d += g[0];
  });
}

/// Softmax over all entries, evaluated as exp(v - max v) / sum.
inline Tensor stable_softmax(const Tensor& v) {
  const auto vv = v.values();
  if (vv.empty()) throw DimensionError("stable_softmax: empty input");
  for (double x : vv)
    if (!std::isfinite(x)) throw EvaluationError("stable_softmax: non-finite input");
  const double top = *std::max_element(vv.begin(), vv.end());
  std::vector<double> out(vv.size());
  double total = 0.0;
  for (std::size_t i = 0; i < vv.size(); ++i) {
    out[i] = std::exp(vv[i] - top);
    total += out[i];
  }
  for (auto& o : out) o /= total;
  auto s = std::make_shared<const std::vector<double>>(out);
  return Tape::record(v.shape(), std::move(out), {&v},
                      [s](std::span<const double> g, std::span<const std::span<double>> in) {
                        const double sign = detail::fault_sign(GradRule::softmax);
                        double dot = 0.0;
                        for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * (*s)[i];
                        for (std::size_t i = 0; i < g.size(); ++i) in[0][i] += sign * (*s)[i] * (g[i] - dot);
                      });
}

/// Joins tensors of equal rank along `axis`; all other extents must agree.
inline Tensor concat(std::span<const Tensor> parts, std::size_t axis = 0) {
  if (parts.empty()) throw DimensionError("concat: no parts");
  if (parts.size() == 1) return parts[0];
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) {
    throw DimensionError("concat: axis " + std::to_string(axis) + " out of range for " + shape_string(first));
  }
  Shape shape = first;
  shape[axis] = 0;
  for (const auto& p : parts) {
    bool ok = p.rank() == first.size();
    for (std::size_t d = 0; ok && d < first.size(); ++d) ok = d == axis || p.shape()[d] == first[d];
    if (!ok) {
      throw DimensionError("concat: cannot join " + shape_string(first) + " with " + shape_string(p.shape()) +
                           " along axis " + std::to_string(axis));
    }
    shape[axis] += p.shape()[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
  for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];

  std::vector<std::size_t> widths;  // contiguous block per outer index
  widths.reserve(parts.size());
  for (const auto& p : parts) widths.push_back(p.shape()[axis] * inner);
  const std::size_t row = std::accumulate(widths.begin(), widths.end(), std::size_t{0});

  std::vector<double> out(outer * row);
  for (std::size_t o = 0; o < outer; ++o) {
    std::size_t offset = o * row;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      const auto pv = parts[k].values();
      std::copy_n(pv.begin() + static_cast<std::ptrdiff_t>(o * widths[k]), widths[k], out.begin() + static_cast<std::ptrdiff_t>(offset));
      offset += widths[k];
    }
  }
  std::vector<const Tensor*> inputs;
  inputs.reserve(parts.size());
  for (const auto& p : parts) inputs.push_back(&p);
  return Tape::record(std::move(shape), std::move(out), inputs,
                      [widths, outer, row](std::span<const double> g, std::span<const std::span<double>> in) {
                        const double sign = detail::fault_sign(GradRule::concat);
                        for (std::size_t o = 0; o < outer; ++o) {
                          std::size_t offset = o * row;
                          for (std::size_t k = 0; k < widths.size(); ++k) {
                            if (!in[k].empty())
                              for (std::size_t i = 0; i < widths[k]; ++i) in[k][o * widths[k] + i] += sign * g[offset + i];
                            offset += widths[k];
                          }
                        }
                      });
}

inline Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis = 0) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

inline Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size()) {
    throw DimensionError("reshape: " + shape_string(a.shape()) + " into " + shape_string(shape));
  }
  const auto av = a.values();
  return Tape::record(std::move(shape), std::vector<double>(av.begin(), av.end()), {&a},
                      [](std::span<const double> g, std::span<const std::span<double>> in) {
                        for (std::size_t i = 0; i < g.size(); ++i) in[0][i] += g[i];
                      });
}

inline Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw DimensionError("transpose: need a matrix, got " + shape_string(a.shape()));
  const std::size_t r = a.rows(), c = a.cols();
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
  return Tape::record({c, r}, std::move(out), {&a}, [r, c](std::span<const double> g, std::span<const std::span<double>> in) {
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) in[0][i * c + j] += g[j * r + i];
  });
}

enum class Elementwise { sigmoid, tanh, relu, add, hadamard };

inline Tensor elementwise(Elementwise op, std::span<const Tensor> args) {
  const bool binary = op == Elementwise::add || op == Elementwise::hadamard;
  if (args.size() != (binary ? 2u : 1u)) {
    throw DimensionError("elementwise: wrong number of arguments (" + std::to_string(args.size()) + ")");
  }
  switch (op) {
    case Elementwise::sigmoid: return sigmoid(args[0]);
    case Elementwise::tanh: return tanh(args[0]);
    case Elementwise::relu: return relu(args[0]);
    case Elementwise::add: return add(args[0], args[1]);
    case Elementwise::hadamard: return hadamard(args[0], args[1]);
  }
  throw ContractError("elementwise: unknown op");
}

inline bool all_finite(const Tensor& t) {
  const auto v = t.values();
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace anlf
