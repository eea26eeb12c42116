#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "anlf/data.hpp"
#include "anlf/gradcheck.hpp"
#include "anlf/metrics.hpp"
#include "anlf/model.hpp"
#include "anlf/random.hpp"

namespace anlf {

struct TrainConfig {
  std::size_t batch = 128;
  std::size_t epochs = 5;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  bool shuffle = true;
  double clip_norm = 5.0;  // global gradient norm; <= 0 disables
  std::size_t threads = 1;

  void validate() const {
    if (batch == 0) throw ConfigError("train.batch must be at least 1");
    if (epochs == 0) throw ConfigError("train.epochs must be at least 1");
    if (!(learning_rate >= 0.0)) throw ConfigError("train.lr must be non-negative");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
      throw ConfigError("train.beta1 and train.beta2 must lie in [0, 1)");
    }
    if (!(epsilon > 0.0)) throw ConfigError("train.eps must be positive");
    if (threads == 0) throw ConfigError("train.threads must be at least 1");
  }

  bool operator==(const TrainConfig&) const = default;
};

/// Batch size and epoch count used for each variant in the original
/// experiments.
inline TrainConfig default_train_config(Variant v) {
  TrainConfig c;
  switch (v) {
    case Variant::ed_lstm:
    case Variant::ed_bilstm: c.batch = 64, c.epochs = 5; break;
    case Variant::d_attention: c.batch = 256, c.epochs = 5; break;
    case Variant::e_attention: c.batch = 256, c.epochs = 20; break;
    case Variant::anlf: c.batch = 128, c.epochs = 5; break;
  }
  return c;
}

inline std::size_t default_hidden_size(Variant v) {
  switch (v) {
    case Variant::ed_lstm:
    case Variant::ed_bilstm: return 1024;
    case Variant::d_attention:
    case Variant::e_attention: return 128;
    case Variant::anlf: return 256;
  }
  return 256;
}

// ---------------------------------------------------------------------------
// Loss

inline Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  if (pred.size() != target.size()) {
    throw DimensionError("mse_loss: prediction " + shape_string(pred.shape()) + " vs target " +
                         shape_string(target.shape()));
  }
  const Tensor diff = sub(reshape(pred, {pred.size()}), reshape(target, {target.size()}));
  return scale(sum(hadamard(diff, diff)), 1.0 / static_cast<double>(diff.size()));
}

inline double mse_loss(std::span<const double> pred, std::span<const double> target) {
  return mse_loss(Tensor::vector({pred.begin(), pred.end()}), Tensor::vector({target.begin(), target.end()})).item();
}

// ---------------------------------------------------------------------------
// Gradients

inline std::vector<NamedTensor> named_tensors(const ModelParams& params) {
  std::vector<NamedTensor> out;
  params.visit([&](const std::string& name, const Tensor& t) { out.push_back({name, t}); });
  return out;
}

/// Replaces the tensors of `params`, in visit order.
inline void assign_tensors(ModelParams& params, std::vector<Tensor> tensors) {
  std::size_t k = 0;
  params.visit([&](const std::string& name, Tensor& t) {
    if (k >= tensors.size() || tensors[k].shape() != t.shape()) {
      throw ContractError("assign_tensors: shape mismatch at " + name);
    }
    t = std::move(tensors[k++]);
  });
  if (k != tensors.size()) throw ContractError("assign_tensors: parameter count mismatch");
}

struct SampleGradient {
  ModelParams grads;
  double loss = 0.0;
};

inline SampleGradient sample_gradient(const ModelParams& params, const ModelConfig& config,
                                      const WindowSample& sample) {
  Tape tape;
  const ModelParams bound = bind(tape, params);
  const Tensor loss = mse_loss(forward(bound, config, sample).values, sample.y_future);
  tape.backward(loss);
  return {map_params(bound, [&](const Tensor& t) { return tape.grad(t); }), loss.item()};
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> workers;
    for (std::size_t w = 0; w < threads; ++w) {
      workers.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < n; i += threads) fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Mean gradient and mean loss over `samples`. Per-sample gradients may be
/// computed concurrently; they are summed in sample order.
inline SampleGradient batch_gradient(const ModelParams& params, const ModelConfig& config,
                                     std::span<const WindowSample* const> samples, std::size_t threads = 1) {
  if (samples.empty()) throw ContractError("batch_gradient: empty batch");
  std::vector<SampleGradient> parts(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) { parts[i] = sample_gradient(params, config, *samples[i]); });

  const double inv = 1.0 / static_cast<double>(samples.size());
  auto totals = named_tensors(parts[0].grads);
  std::vector<std::vector<double>> acc;
  for (const auto& t : totals) acc.emplace_back(t.value.values().begin(), t.value.values().end());
  double loss = parts[0].loss;
  for (std::size_t s = 1; s < parts.size(); ++s) {
    const auto g = named_tensors(parts[s].grads);
    for (std::size_t k = 0; k < acc.size(); ++k) {
      const auto v = g[k].value.values();
      for (std::size_t i = 0; i < v.size(); ++i) acc[k][i] += v[i];
    }
    loss += parts[s].loss;
  }
  std::vector<Tensor> mean;
  for (std::size_t k = 0; k < acc.size(); ++k) {
    for (auto& x : acc[k]) x *= inv;
    mean.emplace_back(totals[k].value.shape(), std::move(acc[k]));
  }
  SampleGradient out{std::move(parts[0].grads), loss * inv};
  assign_tensors(out.grads, std::move(mean));
  return out;
}

inline double global_norm(const ModelParams& grads) {
  double sq = 0.0;
  grads.visit([&](const std::string&, const Tensor& t) {
    for (double v : t.values()) sq += v * v;
  });
  return std::sqrt(sq);
}

/// Rescales `grads` so their global norm is at most `max_norm`. Returns the
/// norm before clipping.
inline double clip_global_norm(ModelParams& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (max_norm > 0.0 && norm > max_norm) grads = map_params(grads, [&](const Tensor& t) { return scale(t, max_norm / norm); });
  return norm;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  std::vector<std::vector<double>> first_moment;   // one buffer per parameter, visit order
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step = 0;

  static AdamState zeros_like(const ModelParams& params) {
    AdamState s;
    params.visit([&](const std::string&, const Tensor& t) {
      s.first_moment.emplace_back(t.size(), 0.0);
      s.second_moment.emplace_back(t.size(), 0.0);
    });
    return s;
  }
};

/// m ← β₁m + (1−β₁)g;  v ← β₂v + (1−β₂)g²;  θ ← θ − lr·m̂ / (√v̂ + ε)
inline void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, const TrainConfig& config) {
  const auto p = named_tensors(params);
  const auto g = named_tensors(grads);
  if (p.size() != g.size() || state.first_moment.size() != p.size()) {
    throw ContractError("adam_step: parameter, gradient and state layouts differ");
  }
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k].name != g[k].name || p[k].value.shape() != g[k].value.shape() ||
        state.first_moment[k].size() != p[k].value.size()) {
      throw ContractError("adam_step: layout mismatch at " + p[k].name);
    }
    if (!all_finite(g[k].value)) throw TrainingError("non-finite gradient for parameter " + p[k].name);
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  std::vector<Tensor> updated;
  updated.reserve(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    const auto theta = p[k].value.values();
    const auto grad = g[k].value.values();
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    std::vector<double> next(theta.begin(), theta.end());
    for (std::size_t i = 0; i < next.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * grad[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      next[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
    updated.emplace_back(p[k].value.shape(), std::move(next));
  }
  assign_tensors(params, std::move(updated));
}

// ---------------------------------------------------------------------------
// Training loop

/// Mean MSE over `samples`, forward only.
inline double mean_loss(const ModelParams& params, const ModelConfig& config, std::span<const WindowSample> samples,
                        std::size_t threads = 1) {
  if (samples.empty()) throw ContractError("mean_loss: no samples");
  std::vector<double> losses(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    losses[i] = mse_loss(forward(params, config, samples[i]).values, samples[i].y_future).item();
  });
  double total = 0.0;
  for (double l : losses) total += l;
  return total / static_cast<double>(samples.size());
}

struct EpochRecord {
  std::size_t epoch = 0;  // 0 = before any update
  double train_mse = 0.0;
  double val_mse = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  ModelParams params;  // lowest validation MSE
  std::size_t best_epoch = 0;
  std::vector<EpochRecord> log;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch Adam. Epoch 0 records the initial losses; the returned
/// parameters are those of the epoch with the lowest validation MSE
/// (earliest on ties).
inline TrainResult train(const ModelConfig& model_config, std::span<const WindowSample> train_set,
                         std::span<const WindowSample> validation_set, const TrainConfig& config,
                         std::optional<ModelParams> initial = std::nullopt, const EpochCallback& on_epoch = {}) {
  config.validate();
  if (train_set.empty()) throw TrainingError("training split is empty");
  if (validation_set.empty()) throw TrainingError("validation split is empty");

  ModelParams params = initial ? std::move(*initial) : init_params(model_config);
  AdamState adam = AdamState::zeros_like(params);
  Rng rng(config.seed);
  TrainResult result;

  auto record = [&](EpochRecord rec) {
    if (!std::isfinite(rec.val_mse)) {
      throw TrainingError("non-finite validation loss at epoch " + std::to_string(rec.epoch));
    }
    if (result.log.empty() || rec.val_mse < result.log[result.best_epoch].val_mse) {
      result.best_epoch = rec.epoch;
      result.params = params;
    }
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);
  };

  using clock = std::chrono::steady_clock;
  auto started = clock::now();
  record({0, mean_loss(params, model_config, train_set, config.threads),
          mean_loss(params, model_config, validation_set, config.threads),
          std::chrono::duration<double>(clock::now() - started).count()});

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<const WindowSample*> batch;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    started = clock::now();
    if (config.shuffle) {
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    }
    double loss_sum = 0.0;
    for (std::size_t first = 0, b = 0; first < order.size(); first += config.batch, ++b) {
      batch.clear();
      for (std::size_t i = first; i < std::min(order.size(), first + config.batch); ++i)
        batch.push_back(&train_set[order[i]]);
      auto step = batch_gradient(params, model_config, batch, config.threads);
      if (!std::isfinite(step.loss)) {
        throw TrainingError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(b));
      }
      loss_sum += step.loss * static_cast<double>(batch.size());
      clip_global_norm(step.grads, config.clip_norm);
      adam_step(params, step.grads, adam, config);
    }
    const double val = mean_loss(params, model_config, validation_set, config.threads);
    record({epoch, loss_sum / static_cast<double>(order.size()), val,
            std::chrono::duration<double>(clock::now() - started).count()});
  }
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation

struct SampleForecast {
  std::chrono::sys_seconds start{};
  std::vector<double> actual;     // load units
  std::vector<double> predicted;  // load units
  std::optional<Forecast> attention;
};

struct Evaluation {
  MetricReport report;
  std::vector<SampleForecast> forecasts;
};

/// Forecasts every sample, maps them back to load units and scores them.
inline Evaluation evaluate(const ModelParams& params, const ModelConfig& config, std::span<const WindowSample> samples,
                           const StandardizationStats& stats, bool keep_attention = false, std::size_t threads = 1) {
  if (samples.empty()) throw ContractError("evaluate: no samples");
  Evaluation out;
  out.forecasts.resize(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t s) {
    Forecast f = forward(params, config, samples[s]);
    auto& sf = out.forecasts[s];
    sf.start = samples[s].forecast_start;
    for (std::size_t i = 0; i < f.values.size(); ++i) {
      sf.actual.push_back(stats.unscale_load(samples[s].y_future[i]));
      sf.predicted.push_back(stats.unscale_load(f.values[i]));
    }
    if (keep_attention) sf.attention = std::move(f);
  });
  std::vector<double> actual, predicted;
  for (const auto& sf : out.forecasts) {
    actual.insert(actual.end(), sf.actual.begin(), sf.actual.end());
    predicted.insert(predicted.end(), sf.predicted.begin(), sf.predicted.end());
  }
  out.report = compute_metrics(actual, predicted);
  return out;
}

}  // namespace anlf
