#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "anlf/tensor.hpp"

namespace anlf {

struct NamedTensor {
  std::string name;
  Tensor value;
};

struct GradCheckReport {
  struct Entry {
    std::string name;
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
  };
  std::vector<Entry> entries;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  double absolute_tolerance = 0.0;
  double step = 0.0;
  std::size_t failures = 0;  // entries over both tolerances
  bool passed = true;
};

/// Floor on the denominator of the relative error.
inline constexpr double kGradCheckFloor = 1e-8;

inline double gradient_relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
}

/// Builds a scalar loss from `params` (same order as passed to
/// check_gradients). Parameters are taped for the analytic pass and constant
/// for the perturbed evaluations.
using LossProgram = std::function<Tensor(const std::vector<Tensor>& params)>;

/// Compares reverse-mode gradients against central differences
/// (f(θ+h) − f(θ−h)) / 2h, one scalar at a time. An entry fails when its
/// relative error reaches `tolerance` and its absolute error exceeds
/// `absolute_tolerance` (0 = relative test only).
inline GradCheckReport check_gradients(const LossProgram& f, const std::vector<NamedTensor>& params,
                                       double step = 1e-5, double tolerance = 1e-4,
                                       double absolute_tolerance = 0.0) {
  if (!(step > 0.0)) throw ContractError("check_gradients: step must be positive");
  GradCheckReport report;
  report.tolerance = tolerance;
  report.absolute_tolerance = absolute_tolerance;
  report.step = step;
  if (params.empty()) return report;

  Tape tape;
  std::vector<Tensor> bound;
  bound.reserve(params.size());
  for (const auto& p : params) bound.push_back(tape.parameter(p.value));
  tape.backward(f(bound));

  std::vector<Tensor> constants;
  constants.reserve(params.size());
  for (const auto& p : params) constants.push_back(p.value.detached());

  auto evaluate = [&](std::size_t which, std::size_t index, double value) {
    const Tensor original = constants[which];
    std::vector<double> v(original.values().begin(), original.values().end());
    v[index] = value;
    constants[which] = Tensor(original.shape(), std::move(v));
    const double loss = f(constants).item();
    constants[which] = original;
    if (!std::isfinite(loss)) {
      throw EvaluationError("check_gradients: non-finite loss perturbing " + params[which].name + "[" +
                            std::to_string(index) + "]");
    }
    return loss;
  };

  for (std::size_t k = 0; k < params.size(); ++k) {
    const Tensor analytic = tape.grad(bound[k]);
    GradCheckReport::Entry entry{params[k].name, 0.0, 0};
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      const double x = params[k].value[i];
      const double numeric = (evaluate(k, i, x + step) - evaluate(k, i, x - step)) / (2.0 * step);
      const double err = gradient_relative_error(analytic[i], numeric);
      if (err >= tolerance && std::abs(analytic[i] - numeric) > absolute_tolerance) ++report.failures;
      if (err > entry.max_rel_error) {
        entry.max_rel_error = err;
        entry.worst_index = i;
      }
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.entries.push_back(std::move(entry));
  }
  report.passed = report.failures == 0;
  return report;
}

}  // namespace anlf
