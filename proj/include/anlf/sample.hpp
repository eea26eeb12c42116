#pragma once

#include <chrono>
#include <vector>

#include "anlf/tensor.hpp"

namespace anlf {

/// One day-ahead training instance. All values are standardized.
struct WindowSample {
  Tensor x_hist;                // T_h × n
  Tensor y_hist;                // T_h
  Tensor x_future;              // T_f × n
  Tensor y_future;              // T_f
  std::vector<Tensor> x_days;   // M blocks of t_d × n, consecutive slices of x_hist
  std::chrono::sys_seconds forecast_start{};  // timestamp of the first future hour
};

}  // namespace anlf
