#pragma once

// Subcommand bodies for the `anlf` tool. Argument parsing lives in
// tools/anlf.cpp; everything here takes plain values so it can be driven
// from tests.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "anlf/checkpoint.hpp"
#include "anlf/config.hpp"
#include "anlf/data.hpp"
#include "anlf/training.hpp"
#include "anlf/verify.hpp"
#include "anlf/version.hpp"

namespace anlf {

enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,  // also usage errors
  kExitConfig = 2,
  kExitData = 3,
  kExitTraining = 4,
  kExitVerification = 5,
};

inline int exit_code(ErrorClass c) {
  switch (c) {
    case ErrorClass::config: return kExitConfig;
    case ErrorClass::data: return kExitData;
    case ErrorClass::training: return kExitTraining;
    case ErrorClass::verification: return kExitVerification;
    case ErrorClass::internal: break;
  }
  return kExitInternal;
}

// ---------------------------------------------------------------------------
// Output helpers

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write '" + path.string() + "'");
  os << content;
  if (!os) throw IoError("failed writing '" + path.string() + "'");
}

/// Exclusive claim on an output directory for the lifetime of the object.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::filesystem::path& dir) : path_(dir / ".anlf.lock") {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f) {
      throw IoError("output directory '" + dir.string() + "' is in use (remove " + path_.string() +
                    " if no other run is active)");
    }
    std::fclose(f);
  }
  ~DirectoryLock() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  std::filesystem::path path_;
};

inline std::string records_csv(std::span<const RawRecord> records) {
  std::ostringstream os;
  write_csv(os, records);
  return os.str();
}

// ---------------------------------------------------------------------------
// train

struct TrainArtifacts {
  std::filesystem::path checkpoint, epoch_log, manifest;
  TrainResult result;
  MetricReport validation;
  std::optional<MetricReport> test;
};

namespace detail {

struct LoadedData {
  std::vector<RawRecord> train, validation, test;
  HolidayCalendar calendar;
  std::string holiday_source;  // stored in the checkpoint
  std::vector<std::pair<std::string, std::string>> fingerprints;
};

inline LoadedData load_run_data(const RunConfig& rc) {
  LoadedData d;
  const auto& dc = rc.data;
  if (dc.synthetic) {
    const auto all = generate_synthetic(dc.synthetic_days, dc.synthetic_seed);
    const auto cut1 = all.begin() + static_cast<std::ptrdiff_t>(dc.synthetic_train_days * 24);
    const auto cut2 = cut1 + static_cast<std::ptrdiff_t>(dc.synthetic_validation_days * 24);
    d.train.assign(all.begin(), cut1);
    d.validation.assign(cut1, cut2);
    d.test.assign(cut2, all.end());
    using namespace std::chrono;
    d.calendar = HolidayCalendar::fixed_dates(static_cast<int>(year_month_day{floor<days>(all.front().time)}.year()),
                                              static_cast<int>(year_month_day{floor<days>(all.back().time)}.year()));
    d.holiday_source = "synthetic";
    d.fingerprints.emplace_back("data.synthetic", hex64(fnv1a(records_csv(all))));
    return d;
  }
  auto ingest = [&](const std::string& key, const std::string& path, std::vector<RawRecord>& out) {
    if (!std::filesystem::exists(path)) throw IoError(key + ": file not found: " + path);
    out = ingest_csv(path);
    d.fingerprints.emplace_back(key, hex64(fnv1a(read_file(path))));
  };
  ingest("data.train", dc.train, d.train);
  ingest("data.validation", dc.validation, d.validation);
  if (!dc.test.empty()) ingest("data.test", dc.test, d.test);
  if (!std::filesystem::exists(dc.holidays)) throw IoError("data.holidays: file not found: " + dc.holidays);
  d.calendar = HolidayCalendar::load(dc.holidays);
  d.holiday_source = std::filesystem::absolute(dc.holidays).lexically_normal().string();
  d.fingerprints.emplace_back("data.holidays", hex64(fnv1a(read_file(dc.holidays))));
  return d;
}

inline std::string report_lines(const std::string& prefix, const MetricReport& r) {
  std::ostringstream os;
  os << prefix << ".mae " << format_double(r.mae) << '\n'
     << prefix << ".rmse " << format_double(r.rmse) << '\n'
     << prefix << ".mape " << format_double(r.mape) << '\n'
     << prefix << ".nrmse " << format_double(r.nrmse) << '\n'
     << prefix << ".points " << r.points << '\n';
  return os.str();
}

}  // namespace detail

/// Trains the configured variant and writes checkpoint.anlf, epochs.csv and
/// manifest.txt into the output directory. Progress goes to `log`;
/// `overrides` take precedence over the file.
inline TrainArtifacts cmd_train(const std::string& config_path, std::ostream& log, const ConfigOverrides& overrides = {}) {
  const RunConfig rc = load_run_config(config_path, overrides);
  const std::filesystem::path dir(rc.output_dir);
  DirectoryLock lock(dir);

  const auto data = detail::load_run_data(rc);
  const auto prepared = prepare_splits(data.train, data.validation, data.test, data.calendar, rc.model, rc.data.stride);
  log << "variant " << variant_name(rc.model.variant) << ", windows train/validation/test "
      << prepared.train.size() << "/" << prepared.validation.size() << "/" << prepared.test.size() << '\n';

  TrainArtifacts out;
  out.checkpoint = dir / "checkpoint.anlf";
  out.epoch_log = dir / "epochs.csv";
  out.manifest = dir / "manifest.txt";

  std::ostringstream epochs;
  epochs << "epoch,train_mse,val_mse,seconds\n";
  out.result = train(rc.model, prepared.train, prepared.validation, rc.train, std::nullopt, [&](const EpochRecord& e) {
    epochs << e.epoch << ',' << format_double(e.train_mse) << ',' << format_double(e.val_mse) << ','
           << format_double(rc.record_timing ? e.seconds : 0.0) << '\n';
    log << "epoch " << e.epoch << " train_mse " << format_double(e.train_mse) << " val_mse "
        << format_double(e.val_mse) << '\n';
  });

  Checkpoint ck{rc.model, prepared.stats, data.holiday_source, out.result.params};
  std::ostringstream ck_text;
  save_checkpoint(ck_text, ck);
  write_file(out.checkpoint, ck_text.str());
  write_file(out.epoch_log, epochs.str());

  out.validation = evaluate(out.result.params, rc.model, prepared.validation, prepared.stats, false, rc.train.threads).report;
  if (!prepared.test.empty()) {
    out.test = evaluate(out.result.params, rc.model, prepared.test, prepared.stats, false, rc.train.threads).report;
  }

  std::ostringstream m;
  m << "anlf-manifest " << kManifestVersion << '\n'
    << "version " << kVersion << '\n'
    << "checkpoint_format " << kCheckpointVersion << '\n';
  for (const auto& [k, v] : rc.entries()) m << "config." << k << ' ' << v << '\n';
  for (const auto& [k, v] : data.fingerprints) m << "fnv1a." << k << ' ' << v << '\n';
  m << "fnv1a.checkpoint " << hex64(fnv1a(ck_text.str())) << '\n'
    << "fnv1a.epochs " << hex64(fnv1a(epochs.str())) << '\n'
    << "parameters " << out.result.params.parameter_count() << '\n'
    << "windows.train " << prepared.train.size() << '\n'
    << "windows.validation " << prepared.validation.size() << '\n'
    << "windows.test " << prepared.test.size() << '\n'
    << "best_epoch " << out.result.best_epoch << '\n'
    << detail::report_lines("validation", out.validation);
  if (out.test) m << detail::report_lines("test", *out.test);
  write_file(out.manifest, m.str());

  log << "best epoch " << out.result.best_epoch << ", validation MAPE " << format_double(out.validation.mape) << "%";
  if (out.test) log << ", test MAPE " << format_double(out.test->mape) << "%";
  log << '\n';
  return out;
}

// ---------------------------------------------------------------------------
// forecast

struct ForecastOptions {
  bool dump_attention = false;
  std::string holidays;        // overrides the checkpoint's calendar
  std::string out_dir = ".";
};

struct ForecastArtifacts {
  MetricReport report;
  std::size_t samples = 0;
  std::vector<std::filesystem::path> files;
};

namespace detail {

inline void check_compatible(const ModelConfig& m) {
  std::string bad;
  if (m.features != feature::width) {
    bad += " model.features=" + std::to_string(m.features) + " (data has " + std::to_string(feature::width) + ")";
  }
  if (m.hours_per_day != 24) bad += " model.hours_per_day=" + std::to_string(m.hours_per_day) + " (data is hourly, 24)";
  if (!bad.empty()) throw CompatibilityError("checkpoint is incompatible with the data schema:" + bad);
}

inline HolidayCalendar forecast_calendar(const Checkpoint& ck, const ForecastOptions& opt,
                                         std::span<const RawRecord> records) {
  if (!opt.holidays.empty()) return HolidayCalendar::load(opt.holidays);
  if (ck.holidays != "synthetic") return HolidayCalendar::load(ck.holidays);
  using namespace std::chrono;
  return HolidayCalendar::fixed_dates(static_cast<int>(year_month_day{floor<days>(records.front().time)}.year()),
                                      static_cast<int>(year_month_day{floor<days>(records.back().time)}.year()));
}

}  // namespace detail

/// Forecasts every complete day in `data_path` and writes forecast.csv and
/// metrics.csv; with dump_attention also alpha.csv, beta.csv and gamma.csv.
inline ForecastArtifacts cmd_forecast(const std::string& checkpoint_path, const std::string& data_path,
                                      const ForecastOptions& opt, std::ostream& log) {
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  detail::check_compatible(ck.model);
  const auto records = ingest_csv(data_path);
  const auto calendar = detail::forecast_calendar(ck, opt, records);
  const auto frames = standardize(build_features(records, calendar), ck.stats);
  const auto samples = build_windows(frames, ck.model);

  const std::filesystem::path dir(opt.out_dir);
  DirectoryLock lock(dir);
  const auto eval = evaluate(ck.params, ck.model, samples, ck.stats, opt.dump_attention);

  ForecastArtifacts out;
  out.report = eval.report;
  out.samples = samples.size();

  std::ostringstream fc;
  fc << "timestamp,actual,forecast,relative_error_pct\n";
  for (const auto& sf : eval.forecasts) {
    for (std::size_t h = 0; h < sf.actual.size(); ++h) {
      fc << format_timestamp(sf.start + std::chrono::hours{h}) << ',' << format_double(sf.actual[h]) << ','
         << format_double(sf.predicted[h]) << ',' << format_double(relative_error(sf.actual[h], sf.predicted[h]))
         << '\n';
    }
  }
  out.files.push_back(dir / "forecast.csv");
  write_file(out.files.back(), fc.str());
  out.files.push_back(dir / "metrics.csv");
  write_file(out.files.back(), std::string(kMetricCsvHeader) + "\n" + metric_csv_row(eval.report) + "\n");

  if (opt.dump_attention) {
    const auto& m = ck.model;
    std::ostringstream alpha, beta, gamma;
    if (has_encoder_attention(m.variant)) {
      alpha << "sample,forecast_start,step";
      for (const auto& name : feature::names()) alpha << ',' << name;
      alpha << '\n';
    }
    if (has_decoder_attention(m.variant)) {
      beta << "sample,forecast_start,step";
      for (std::size_t d = 0; d < m.history_days; ++d)
        for (std::size_t h = 0; h < m.hours_per_day; ++h) beta << ",d" << d << "_h" << h;
      beta << '\n';
      gamma << "sample,forecast_start";
      for (std::size_t d = 0; d < m.history_days; ++d) gamma << ",d" << d;
      gamma << '\n';
    }
    auto row = [](std::ostream& os, std::span<const double> v) {
      for (double x : v) os << ',' << format_double(x);
      os << '\n';
    };
    for (std::size_t s = 0; s < eval.forecasts.size(); ++s) {
      const auto& f = *eval.forecasts[s].attention;
      const auto stamp = format_timestamp(eval.forecasts[s].start);
      for (std::size_t t = 0; t < f.alphas.size(); ++t) {
        alpha << s << ',' << stamp << ',' << t;
        row(alpha, f.alphas[t].values());
      }
      for (std::size_t t = 0; t < f.betas.size(); ++t) {
        beta << s << ',' << stamp << ',' << t;
        row(beta, f.betas[t].values());
      }
      if (f.gamma) {
        gamma << s << ',' << stamp;
        row(gamma, f.gamma->weights);
      }
    }
    if (has_encoder_attention(m.variant)) {
      out.files.push_back(dir / "alpha.csv");
      write_file(out.files.back(), alpha.str());
    }
    if (has_decoder_attention(m.variant)) {
      out.files.push_back(dir / "beta.csv");
      write_file(out.files.back(), beta.str());
      out.files.push_back(dir / "gamma.csv");
      write_file(out.files.back(), gamma.str());
    }
    if (!has_encoder_attention(m.variant) && !has_decoder_attention(m.variant)) {
      log << "variant " << variant_name(m.variant) << " has no attention weights to dump\n";
    }
  }

  log << samples.size() << " forecast days\n";
  write_key_values(log, eval.report);
  return out;
}

// ---------------------------------------------------------------------------
// verify

inline std::optional<GradRule> parse_grad_rule(std::string_view name) {
  static constexpr std::pair<std::string_view, GradRule> rules[] = {
      {"matmul", GradRule::matmul}, {"sigmoid", GradRule::sigmoid},   {"tanh", GradRule::tanh},
      {"relu", GradRule::relu},     {"add", GradRule::add},           {"hadamard", GradRule::hadamard},
      {"softmax", GradRule::softmax}, {"concat", GradRule::concat}};
  for (const auto& [n, r] : rules)
    if (n == name) return r;
  return std::nullopt;
}

/// Prints one row per check; returns true when all pass.
inline bool cmd_verify(std::ostream& os, GradRule fault = GradRule::none, const VerifyOptions& opt = {}) {
  ScopedGradFault guard(fault);
  bool all = true;
  os << std::left << std::setw(28) << "check" << std::setw(6) << "result" << std::setw(10) << "seconds"
     << "detail\n";
  run_verification(opt, [&](const CheckResult& r) {
    all = all && r.passed;
    std::ostringstream secs;
    secs << std::fixed << std::setprecision(3) << r.seconds;
    os << std::left << std::setw(28) << r.name << std::setw(6) << (r.passed ? "PASS" : "FAIL") << std::setw(10)
       << secs.str() << r.detail << '\n'
       << std::flush;
  });
  os << (all ? "all checks passed" : "verification FAILED") << '\n';
  return all;
}

// ---------------------------------------------------------------------------
// synth

/// Writes `days` of synthetic hourly data and, optionally, the matching
/// holiday calendar.
inline void cmd_synth(std::size_t day_count, std::uint64_t seed, const std::string& out,
                      const std::string& holidays_out = {}) {
  const auto records = generate_synthetic(day_count, seed);
  write_file(out, records_csv(records));
  if (!holidays_out.empty()) {
    using namespace std::chrono;
    const auto cal =
        HolidayCalendar::fixed_dates(static_cast<int>(year_month_day{floor<days>(records.front().time)}.year()),
                                     static_cast<int>(year_month_day{floor<days>(records.back().time)}.year()));
    std::ostringstream os;
    cal.write(os);
    write_file(holidays_out, os.str());
  }
}

}  // namespace anlf
