#pragma once

// Built-in oracle suite behind `anlf verify`.

#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "anlf/gradcheck.hpp"
#include "anlf/metrics.hpp"
#include "anlf/model.hpp"
#include "anlf/reference.hpp"
#include "anlf/training.hpp"

namespace anlf {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct VerifyOptions {
  std::size_t instances = 1000;      // random draws for the cell and normalization checks
  std::size_t gradient_seeds = 8;    // model instances per variant
  double gradient_tolerance = 1e-4;
  // Absolute floor for the variants other than ANLF, whose checks otherwise
  // trip on entries near 1e-8 where central differences carry ~1e-11 of
  // cancellation noise. ANLF is held to the relative test alone.
  double variant_gradient_floor = 1e-9;
  double exact_tolerance = 1e-12;
};

/// The small configuration used by the gradient and invariant checks:
/// two days of four hours, three features, hidden size four.
inline ModelConfig tiny_config(Variant v = Variant::anlf, std::uint64_t seed = 0) {
  ModelConfig c;
  c.history_days = 2;
  c.hours_per_day = 4;
  c.features = 3;
  c.hidden = 4;
  c.attention_dim = 2;
  c.temporal_dim = 2;
  c.head_dim = 2;
  c.variant = v;
  c.seed = seed;
  return c;
}

inline Tensor random_normal(Shape shape, Rng& rng) {
  std::vector<double> v(shape_size(shape));
  for (auto& x : v) x = rng.normal();
  return Tensor(std::move(shape), std::move(v));
}

/// Standard-normal window with x_days sliced from x_hist.
inline WindowSample random_window(const ModelConfig& config, Rng& rng) {
  const std::size_t n = config.features, td = config.hours_per_day;
  WindowSample w;
  w.x_hist = random_normal({config.history_len(), n}, rng);
  w.y_hist = random_normal({config.history_len()}, rng);
  w.x_future = random_normal({config.horizon(), n}, rng);
  w.y_future = random_normal({config.horizon()}, rng);
  const auto all = w.x_hist.values();
  for (std::size_t d = 0; d < config.history_days; ++d) {
    w.x_days.push_back(Tensor({td, n}, std::vector<double>(all.begin() + d * td * n, all.begin() + (d + 1) * td * n)));
  }
  return w;
}

// ---------------------------------------------------------------------------
// Gradient checks

struct ModelGradCheck {
  std::size_t checked = 0;
  std::size_t skipped = 0;  // instances whose ReLU head is inactive everywhere
  double max_rel_error = 0.0;
  std::string worst;
  std::size_t failures = 0;
  bool passed = false;
};

/// Central-difference check of the full MSE loss for seeds 0..seeds-1.
/// Parameters of seed s come from init_params with seed s, the window from
/// Rng(s + 1). An instance where any parameter block receives an all-zero
/// gradient (every head unit clipped by the ReLU) checks nothing and is
/// skipped; at least one instance must remain.
inline ModelGradCheck check_model_gradients(Variant variant, std::size_t seeds, double tolerance = 1e-4,
                                            double absolute_tolerance = 0.0) {
  ModelGradCheck out;
  for (std::size_t s = 0; s < seeds; ++s) {
    const ModelConfig config = tiny_config(variant, s);
    const ModelParams params = init_params(config);
    Rng rng(s + 1);
    const WindowSample w = random_window(config, rng);

    bool live = true;
    for (const auto& g : named_tensors(sample_gradient(params, config, w).grads)) {
      bool any = false;
      for (double v : g.value.values()) any = any || v != 0.0;
      live = live && any;
    }
    if (!live) {
      ++out.skipped;
      continue;
    }
    const auto loss = [&](const std::vector<Tensor>& ts) {
      ModelParams q = params;
      assign_tensors(q, ts);
      return mse_loss(forward(q, config, w).values, w.y_future);
    };
    const auto report = check_gradients(loss, named_tensors(params), 1e-5, tolerance, absolute_tolerance);
    ++out.checked;
    out.failures += report.failures;
    for (const auto& e : report.entries) {
      if (e.max_rel_error > out.max_rel_error) {
        out.max_rel_error = e.max_rel_error;
        out.worst = "seed " + std::to_string(s) + " " + e.name + "[" + std::to_string(e.worst_index) + "]";
      }
    }
  }
  out.passed = out.checked > 0 && out.failures == 0;
  return out;
}

namespace detail {

// Weighted sum so that every output entry carries a distinct sensitivity.
// Recorded as its own tape node so that no injectable rule sits between the
// checked op and the loss.
inline Tensor probe_loss(const Tensor& y, Rng& rng) {
  const Tensor w = random_normal(y.shape(), rng);
  const auto yv = y.values();
  const auto wv = w.values();
  double total = 0.0;
  for (std::size_t i = 0; i < yv.size(); ++i) total += yv[i] * wv[i];
  return Tape::record({}, {total}, {&y}, [w](std::span<const double> g, std::span<const std::span<double>> in) {
    if (in[0].empty()) return;
    const auto wv = w.values();
    for (std::size_t i = 0; i < wv.size(); ++i) in[0][i] += g[0] * wv[i];
  });
}

inline Tensor away_from_zero(Tensor t) {
  std::vector<double> v(t.values().begin(), t.values().end());
  for (auto& x : v) x += x >= 0 ? 0.1 : -0.1;
  return Tensor(t.shape(), std::move(v));
}

struct OpCase {
  const char* name;
  std::vector<Shape> shapes;
  std::function<Tensor(const std::vector<Tensor>&)> op;
};

inline std::vector<OpCase> op_cases() {
  return {
      {"matmul", {{3, 4}, {4, 2}}, [](const auto& a) { return matmul(a[0], a[1]); }},
      {"sigmoid", {{5}}, [](const auto& a) { return sigmoid(a[0]); }},
      {"tanh", {{5}}, [](const auto& a) { return tanh(a[0]); }},
      {"relu", {{6}}, [](const auto& a) { return relu(a[0]); }},
      {"add", {{2, 3}, {2, 3}}, [](const auto& a) { return add(a[0], a[1]); }},
      {"hadamard", {{4}, {4}}, [](const auto& a) { return hadamard(a[0], a[1]); }},
      {"softmax", {{5}}, [](const auto& a) { return stable_softmax(a[0]); }},
      {"concat", {{2}, {3}}, [](const auto& a) { return concat({a[0], a[1]}); }},
  };
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Individual checks

inline CheckResult check_op_gradient(const detail::OpCase& c, double tolerance) {
  Rng rng(17);
  std::vector<NamedTensor> params;
  for (std::size_t i = 0; i < c.shapes.size(); ++i)
    params.push_back({"arg" + std::to_string(i), detail::away_from_zero(random_normal(c.shapes[i], rng))});
  // The probe weights are fixed per check, so reseed inside the loss.
  const auto loss = [&](const std::vector<Tensor>& ts) {
    Rng weights(29);
    return detail::probe_loss(c.op(ts), weights);
  };
  const auto report = check_gradients(loss, params, 1e-5, tolerance);
  return {std::string("grad.") + c.name, report.passed, "max rel error " + format_double(report.max_rel_error)};
}

inline CheckResult check_lstm_equivalence(std::size_t instances, double tolerance) {
  Rng rng(101);
  double worst = 0.0;
  for (std::size_t k = 0; k < instances; ++k) {
    const std::size_t d = 1 + rng.below(6), hs = 1 + rng.below(6);
    LstmParams p = LstmParams::random(d, hs, rng);
    const LstmState prev{random_normal({hs}, rng), random_normal({hs}, rng)};
    const Tensor x = random_normal({d}, rng);
    const LstmState got = lstm_cell_step(p, prev, x);
    const auto want = reference::lstm_step(p, {reference::values_of(prev.h), reference::values_of(prev.c)},
                                           reference::values_of(x));
    for (std::size_t i = 0; i < hs; ++i)
      worst = std::max({worst, std::abs(got.h[i] - want.h[i]), std::abs(got.c[i] - want.c[i])});
  }
  return {"lstm.scalar_equivalence", worst <= tolerance,
          std::to_string(instances) + " instances, max abs diff " + format_double(worst)};
}

inline CheckResult check_attention_normalization(std::size_t instances, double tolerance) {
  double worst = 0.0;
  bool positive = true;
  auto inspect = [&](std::span<const double> w) {
    double total = 0.0;
    for (double v : w) {
      total += v;
      positive = positive && v > 0.0;
    }
    worst = std::max(worst, std::abs(total - 1.0));
  };
  for (std::size_t k = 0; k < instances; ++k) {
    const ModelConfig config = tiny_config(Variant::anlf, 1000 + k);
    const ModelParams params = init_params(config);
    Rng rng(5000 + k);
    const Forecast f = forward(params, config, random_window(config, rng));
    for (const auto& a : f.alphas) inspect(a.values());
    for (const auto& b : f.betas) inspect(b.values());
    inspect(f.gamma->weights);
  }
  return {"attention.normalization", positive && worst <= tolerance,
          std::to_string(instances) + " evaluations, max |sum-1| " + format_double(worst) +
              (positive ? "" : ", non-positive weight found")};
}

inline CheckResult check_ablations() {
  const ModelConfig config = tiny_config(Variant::anlf, 3);
  Rng rng(77);
  const WindowSample w = random_window(config, rng);
  ModelParams p = init_params(config);
  p.feature_attention->v_e = Tensor::zeros(p.feature_attention->v_e.shape());
  p.feature_attention->w_e = Tensor::zeros(p.feature_attention->w_e.shape());
  p.temporal_attention->v_d = Tensor::zeros(p.temporal_attention->v_d.shape());
  p.temporal_attention->w_d = Tensor::zeros(p.temporal_attention->w_d.shape());
  const Forecast f = forward(p, config, w);
  bool uniform = true;
  for (const auto& a : f.alphas)
    for (double v : a.values()) uniform = uniform && v == 1.0 / static_cast<double>(config.features);
  for (const auto& b : f.betas)
    for (double v : b.values()) uniform = uniform && v == 1.0 / static_cast<double>(config.history_len());

  // The plain encoder-decoder ignores any attention blocks it is handed.
  ModelConfig plain = config;
  plain.variant = Variant::ed_bilstm;
  ModelParams q = init_params(plain);
  const Forecast base = forward(q, plain, w);
  q.feature_attention = init_params(tiny_config(Variant::anlf, 11)).feature_attention;
  q.temporal_attention = init_params(tiny_config(Variant::anlf, 12)).temporal_attention;
  const Forecast with_blocks = forward(q, plain, w);
  bool invariant = true;
  for (std::size_t i = 0; i < base.values.size(); ++i) invariant = invariant && base.values[i] == with_blocks.values[i];

  std::string detail = uniform ? "zeroed attention gives uniform weights" : "zeroed attention is not uniform";
  detail += invariant ? "; EDBiLSTM ignores attention" : "; EDBiLSTM output changed";
  return {"attention.ablation", uniform && invariant, detail};
}

inline CheckResult check_metric_cases(double tolerance = 1e-9) {
  const std::vector<double> actual{100, 200}, forecast{110, 190};
  const auto r = compute_metrics(actual, forecast);
  const bool hand = std::abs(r.mae - 10.0) < tolerance && std::abs(r.rmse - 10.0) < tolerance &&
                    std::abs(r.mape - 7.5) < tolerance && std::abs(r.nrmse - 20.0 / 3.0) < tolerance;
  Rng rng(9);
  bool ordered = true;
  for (int k = 0; k < 1000; ++k) {
    std::vector<double> a(8), f(8);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = rng.uniform(1.0, 100.0);
      f[i] = rng.uniform(0.0, 120.0);
    }
    const auto m = compute_metrics(a, f);
    ordered = ordered && m.rmse >= m.mae;
  }
  return {"metrics.hand_cases", hand && ordered,
          "mae " + format_double(r.mae) + " rmse " + format_double(r.rmse) + " mape " + format_double(r.mape) +
              " nrmse " + format_double(r.nrmse) + (ordered ? "" : "; rmse < mae found")};
}

// ---------------------------------------------------------------------------
// Suite

/// Runs every check; `progress`, when set, sees each result as it lands.
inline std::vector<CheckResult> run_verification(const VerifyOptions& opt = {},
                                                 const std::function<void(const CheckResult&)>& progress = {}) {
  std::vector<CheckResult> results;
  auto timed = [&](const std::function<CheckResult()>& check) {
    const auto start = std::chrono::steady_clock::now();
    CheckResult r;
    try {
      r = check();
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = std::string("threw: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    results.push_back(r);
    if (progress) progress(results.back());
  };

  for (const auto& c : detail::op_cases()) timed([&] { return check_op_gradient(c, opt.gradient_tolerance); });
  for (const Variant v : kAllVariants) {
    timed([&] {
      const double floor = v == Variant::anlf ? 0.0 : opt.variant_gradient_floor;
      const auto g = check_model_gradients(v, opt.gradient_seeds, opt.gradient_tolerance, floor);
      std::string detail = std::to_string(g.checked) + " instances, " + std::to_string(g.skipped) +
                           " inactive skipped, " + std::to_string(g.failures) + " entries over tolerance, max rel error " +
                           format_double(g.max_rel_error);
      if (!g.worst.empty()) detail += " at " + g.worst;
      return CheckResult{"grad.model." + std::string(variant_name(v)), g.passed, detail};
    });
  }
  timed([&] { return check_lstm_equivalence(opt.instances, opt.exact_tolerance); });
  timed([&] { return check_attention_normalization(opt.instances, opt.exact_tolerance); });
  timed([] { return check_ablations(); });
  timed([] { return check_metric_cases(); });
  return results;
}

}  // namespace anlf
