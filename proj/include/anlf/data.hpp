#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "anlf/error.hpp"
#include "anlf/format.hpp"
#include "anlf/model.hpp"
#include "anlf/random.hpp"
#include "anlf/sample.hpp"

namespace anlf {

using std::chrono::hours;
using std::chrono::sys_days;
using std::chrono::sys_seconds;

// ---------------------------------------------------------------------------
// Timestamps. Local wall-clock time is carried in a sys_seconds without any
// zone conversion.

/// Accepts `YYYY-MM-DD`, `YYYY-MM-DDTHH:MM` and `YYYY-MM-DD HH:MM[:SS]`.
inline std::optional<sys_seconds> parse_timestamp(std::string_view text) {
  text = trim(text);
  int y = 0;
  unsigned mo = 0, d = 0, h = 0, mi = 0, s = 0;
  char sep = 0;
  const std::string buf(text);
  int consumed = 0;
  if (std::sscanf(buf.c_str(), "%4d-%2u-%2u%n", &y, &mo, &d, &consumed) != 3 || consumed != 10) return std::nullopt;
  if (buf.size() > 10) {
    int rest = 0;
    const int got = std::sscanf(buf.c_str() + 10, "%c%2u:%2u%n", &sep, &h, &mi, &rest);
    if (got != 3 || (sep != 'T' && sep != ' ')) return std::nullopt;
    std::size_t pos = 10 + static_cast<std::size_t>(rest);
    if (pos < buf.size()) {
      int tail = 0;
      if (std::sscanf(buf.c_str() + pos, ":%2u%n", &s, &tail) != 1) return std::nullopt;
      pos += static_cast<std::size_t>(tail);
    }
    if (pos != buf.size()) return std::nullopt;
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{mo}, std::chrono::day{d}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 59) return std::nullopt;
  return sys_days{ymd} + hours{h} + std::chrono::minutes{mi} + std::chrono::seconds{s};
}

inline std::string format_date(sys_days day) {
  const std::chrono::year_month_day ymd{day};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

/// `YYYY-MM-DDTHH:MM`
inline std::string format_timestamp(sys_seconds t) {
  const auto day = std::chrono::floor<std::chrono::days>(t);
  const std::chrono::hh_mm_ss hms{t - day};
  char buf[8];
  std::snprintf(buf, sizeof buf, "T%02d:%02d", static_cast<int>(hms.hours().count()),
                static_cast<int>(hms.minutes().count()));
  return format_date(day) + buf;
}

// ---------------------------------------------------------------------------
// Raw series

struct RawRecord {
  sys_seconds time;
  double load = 0.0;
  double temperature = 0.0;
};

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? comma : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

}  // namespace detail

/// Strictly hourly, gap-free series check.
inline void check_continuity(std::span<const RawRecord> records) {
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].time != records[i - 1].time + hours{1}) {
      throw ContinuityError("series is not hourly-contiguous at " + format_timestamp(records[i].time) +
                            " (previous " + format_timestamp(records[i - 1].time) + ")");
    }
  }
}

/// Reads `timestamp,load,temperature` (columns in any order, extra columns
/// ignored). `source` is used in error messages.
inline std::vector<RawRecord> parse_csv(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::array<std::size_t, 3>> columns;
  std::vector<RawRecord> records;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = detail::split_csv(line);
    if (!columns) {
      constexpr std::array<std::string_view, 3> names{"timestamp", "load", "temperature"};
      std::array<std::size_t, 3> idx{};
      for (std::size_t c = 0; c < names.size(); ++c) {
        const auto it = std::find(cells.begin(), cells.end(), names[c]);
        if (it == cells.end()) {
          throw SchemaError(source + ": header is missing column '" + std::string(names[c]) + "'");
        }
        idx[c] = static_cast<std::size_t>(it - cells.begin());
      }
      columns = idx;
      continue;
    }
    const auto where = [&] { return source + ":" + std::to_string(line_no) + ": "; };
    const auto& [ti, li, tmi] = *columns;
    if (cells.size() <= std::max({ti, li, tmi})) throw ParseError(where() + "expected at least " + std::to_string(std::max({ti, li, tmi}) + 1) + " fields");
    RawRecord r;
    const auto time = parse_timestamp(cells[ti]);
    if (!time) throw ParseError(where() + "bad timestamp '" + std::string(cells[ti]) + "'");
    r.time = *time;
    if (!parse_double(cells[li], r.load) || !std::isfinite(r.load)) {
      throw ParseError(where() + "bad load '" + std::string(cells[li]) + "'");
    }
    if (!parse_double(cells[tmi], r.temperature) || !std::isfinite(r.temperature)) {
      throw ParseError(where() + "bad temperature '" + std::string(cells[tmi]) + "'");
    }
    if (!(r.load > 0.0)) throw DomainError(where() + "load must be positive, got " + format_double(r.load));
    records.push_back(r);
  }
  if (!columns) throw SchemaError(source + ": empty file, expected header timestamp,load,temperature");
  if (records.empty()) throw SchemaError(source + ": no data rows");
  check_continuity(records);
  return records;
}

inline std::vector<RawRecord> ingest_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open data file '" + path + "'");
  return parse_csv(in, path);
}

inline void write_csv(std::ostream& os, std::span<const RawRecord> records) {
  os << "timestamp,load,temperature\n";
  for (const auto& r : records) {
    os << format_timestamp(r.time) << ',' << format_double(r.load) << ',' << format_double(r.temperature) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Holidays

/// Set of holiday dates. Coverage runs from January 1 of the first listed
/// year to December 31 of the last.
class HolidayCalendar {
 public:
  HolidayCalendar() = default;
  explicit HolidayCalendar(std::set<sys_days> dates) : dates_(std::move(dates)) {
    if (dates_.empty()) return;
    using namespace std::chrono;
    first_ = sys_days{year_month_day{*dates_.begin()}.year() / January / 1};
    last_ = sys_days{year_month_day{*dates_.rbegin()}.year() / December / 31};
  }

  static HolidayCalendar parse(std::istream& in, const std::string& source) {
    std::set<sys_days> dates;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      auto text = trim(line);
      if (text.empty() || text.front() == '#') continue;
      const auto t = text.size() == 10 ? parse_timestamp(text) : std::nullopt;
      if (!t) throw ParseError(source + ":" + std::to_string(line_no) + ": bad date '" + std::string(text) + "'");
      dates.insert(std::chrono::floor<std::chrono::days>(*t));
    }
    if (dates.empty()) throw SchemaError(source + ": holiday calendar lists no dates");
    return HolidayCalendar(std::move(dates));
  }

  static HolidayCalendar load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open holiday calendar '" + path + "'");
    return parse(in, path);
  }

  /// New Year's Day, July 4 and December 25 for each year in range.
  static HolidayCalendar fixed_dates(int first_year, int last_year) {
    using namespace std::chrono;
    std::set<sys_days> dates;
    for (int y = first_year; y <= last_year; ++y) {
      dates.insert(sys_days{year{y} / January / 1});
      dates.insert(sys_days{year{y} / July / 4});
      dates.insert(sys_days{year{y} / December / 25});
    }
    return HolidayCalendar(std::move(dates));
  }

  bool covers(sys_days day) const { return !dates_.empty() && day >= first_ && day <= last_; }
  bool contains(sys_days day) const { return dates_.count(day) > 0; }
  const std::set<sys_days>& dates() const { return dates_; }

  void write(std::ostream& os) const {
    for (auto d : dates_) os << format_date(d) << '\n';
  }

 private:
  std::set<sys_days> dates_;
  sys_days first_{};
  sys_days last_{};
};

// ---------------------------------------------------------------------------
// Features

namespace feature {
inline constexpr std::size_t temperature = 0;
inline constexpr std::size_t holiday = 1;
inline constexpr std::size_t hour = 2;      // 24 one-hot columns
inline constexpr std::size_t weekday = 26;  // 7, Monday first
inline constexpr std::size_t month = 33;    // 12
inline constexpr std::size_t width = 45;

/// Column names in feature order, used as CSV headers.
inline std::vector<std::string> names() {
  static constexpr const char* days[] = {"mon", "tue", "wed", "thu", "fri", "sat", "sun"};
  std::vector<std::string> out{"temperature", "holiday"};
  char buf[16];
  for (int h = 0; h < 24; ++h) {
    std::snprintf(buf, sizeof buf, "hour_%02d", h);
    out.emplace_back(buf);
  }
  for (const char* d : days) out.push_back(std::string("weekday_") + d);
  for (int m = 1; m <= 12; ++m) {
    std::snprintf(buf, sizeof buf, "month_%02d", m);
    out.emplace_back(buf);
  }
  return out;
}
}  // namespace feature

struct FeatureFrame {
  sys_seconds time;
  std::array<double, feature::width> features{};
  double target = 0.0;
};

inline std::vector<FeatureFrame> build_features(std::span<const RawRecord> records, const HolidayCalendar& calendar) {
  using namespace std::chrono;
  std::vector<FeatureFrame> frames;
  frames.reserve(records.size());
  for (const auto& r : records) {
    const auto day = floor<days>(r.time);
    if (!calendar.covers(day)) {
      throw CoverageError("holiday calendar does not cover " + format_date(day));
    }
    const year_month_day ymd{day};
    const auto hour_of_day = static_cast<std::size_t>(duration_cast<hours>(r.time - day).count());
    FeatureFrame f;
    f.time = r.time;
    f.target = r.load;
    f.features[feature::temperature] = r.temperature;
    f.features[feature::holiday] = calendar.contains(day) ? 1.0 : 0.0;
    f.features[feature::hour + hour_of_day] = 1.0;
    f.features[feature::weekday + weekday{day}.iso_encoding() - 1] = 1.0;
    f.features[feature::month + static_cast<unsigned>(ymd.month()) - 1] = 1.0;
    frames.push_back(f);
  }
  return frames;
}

// ---------------------------------------------------------------------------
// Standardization

struct StandardizationStats {
  double load_mean = 0.0;
  double load_std = 1.0;
  double temperature_mean = 0.0;
  double temperature_std = 1.0;

  /// Population mean and standard deviation over `frames`.
  static StandardizationStats fit(std::span<const FeatureFrame> frames) {
    if (frames.empty()) throw SizeError("standardization needs at least one frame");
    auto moments = [&](auto get, const char* what) {
      double mean = 0.0;
      for (const auto& f : frames) mean += get(f);
      mean /= static_cast<double>(frames.size());
      double var = 0.0;
      for (const auto& f : frames) var += (get(f) - mean) * (get(f) - mean);
      const double sd = std::sqrt(var / static_cast<double>(frames.size()));
      if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
        throw DegenerateStatsError(std::string(what) + " has zero standard deviation over the training split");
      }
      return std::pair{mean, sd};
    };
    StandardizationStats s;
    std::tie(s.load_mean, s.load_std) = moments([](const FeatureFrame& f) { return f.target; }, "load");
    std::tie(s.temperature_mean, s.temperature_std) =
        moments([](const FeatureFrame& f) { return f.features[feature::temperature]; }, "temperature");
    return s;
  }

  double scale_load(double v) const { return (v - load_mean) / load_std; }
  double unscale_load(double v) const { return v * load_std + load_mean; }
  double scale_temperature(double v) const { return (v - temperature_mean) / temperature_std; }
  double unscale_temperature(double v) const { return v * temperature_std + temperature_mean; }

  bool operator==(const StandardizationStats&) const = default;
};

/// Scales load and temperature; indicator columns are untouched.
inline std::vector<FeatureFrame> standardize(std::span<const FeatureFrame> frames, const StandardizationStats& stats) {
  std::vector<FeatureFrame> out(frames.begin(), frames.end());
  for (auto& f : out) {
    f.target = stats.scale_load(f.target);
    f.features[feature::temperature] = stats.scale_temperature(f.features[feature::temperature]);
  }
  return out;
}

inline std::vector<FeatureFrame> destandardize(std::span<const FeatureFrame> frames, const StandardizationStats& stats) {
  std::vector<FeatureFrame> out(frames.begin(), frames.end());
  for (auto& f : out) {
    f.target = stats.unscale_load(f.target);
    f.features[feature::temperature] = stats.unscale_temperature(f.features[feature::temperature]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Windows

namespace detail {

/// Start offsets of every complete window: first midnight, then every
/// `stride` hours while history and forecast day fit.
inline std::vector<std::size_t> window_starts(std::span<const FeatureFrame> frames, const ModelConfig& config,
                                              std::size_t stride) {
  std::vector<std::size_t> starts;
  std::size_t first = 0;
  while (first < frames.size() && frames[first].features[feature::hour] != 1.0) ++first;
  const std::size_t span = config.history_len() + config.horizon();
  for (std::size_t s = first; s + span <= frames.size(); s += stride) starts.push_back(s);
  return starts;
}

inline Tensor feature_block(std::span<const FeatureFrame> frames, std::size_t begin, std::size_t count) {
  std::vector<double> v;
  v.reserve(count * feature::width);
  for (std::size_t i = begin; i < begin + count; ++i) v.insert(v.end(), frames[i].features.begin(), frames[i].features.end());
  return Tensor::matrix(count, feature::width, std::move(v));
}

inline WindowSample make_window(std::span<const FeatureFrame> frames, const ModelConfig& config, std::size_t start) {
  const std::size_t th = config.history_len(), tf = config.horizon(), td = config.hours_per_day;
  WindowSample w;
  w.x_hist = feature_block(frames, start, th);
  w.x_future = feature_block(frames, start + th, tf);
  std::vector<double> yh, yf;
  for (std::size_t i = 0; i < th; ++i) yh.push_back(frames[start + i].target);
  for (std::size_t i = 0; i < tf; ++i) yf.push_back(frames[start + th + i].target);
  w.y_hist = Tensor::vector(std::move(yh));
  w.y_future = Tensor::vector(std::move(yf));
  for (std::size_t d = 0; d < config.history_days; ++d) w.x_days.push_back(feature_block(frames, start + d * td, td));
  w.forecast_start = frames[start + th].time;
  return w;
}

inline void require_schema(const ModelConfig& config) {
  if (config.features != feature::width) {
    throw CompatibilityError("model.features = " + std::to_string(config.features) + " but the data schema has " +
                             std::to_string(feature::width) + " features");
  }
}

inline void require_contiguous(std::span<const FeatureFrame> frames) {
  for (std::size_t i = 1; i < frames.size(); ++i)
    if (frames[i].time != frames[i - 1].time + hours{1})
      throw ContinuityError("frames are not hourly-contiguous at " + format_timestamp(frames[i].time));
}

}  // namespace detail

/// Day-ahead windows over a contiguous frame sequence. `stride` defaults to
/// one day, which keeps every forecast window on a calendar day.
inline std::vector<WindowSample> build_windows(std::span<const FeatureFrame> frames, const ModelConfig& config,
                                               std::size_t stride = 0) {
  detail::require_schema(config);
  detail::require_contiguous(frames);
  if (stride == 0) stride = config.hours_per_day;
  const auto starts = detail::window_starts(frames, config, stride);
  if (starts.empty()) {
    throw SizeError("need " + std::to_string(config.history_len() + config.horizon()) +
                    " hours from the first midnight to build a window, have " + std::to_string(frames.size()));
  }
  std::vector<WindowSample> out;
  out.reserve(starts.size());
  for (auto s : starts) out.push_back(detail::make_window(frames, config, s));
  return out;
}

// ---------------------------------------------------------------------------
// Splits

struct PreparedData {
  StandardizationStats stats;
  std::vector<WindowSample> train;
  std::vector<WindowSample> validation;
  std::vector<WindowSample> test;
};

/// Builds standardized windows for train/validation/test record sets. Stats
/// come from the training records only. When a split starts exactly one
/// hour after the previous one ends, its windows may draw history from the
/// earlier split; a window belongs to the split holding its forecast day.
inline PreparedData prepare_splits(std::span<const RawRecord> train, std::span<const RawRecord> validation,
                                   std::span<const RawRecord> test, const HolidayCalendar& calendar,
                                   const ModelConfig& config, std::size_t stride = 0) {
  detail::require_schema(config);
  if (stride == 0) stride = config.hours_per_day;
  PreparedData out;
  const auto train_frames = build_features(train, calendar);
  out.stats = StandardizationStats::fit(train_frames);

  const std::array<std::span<const RawRecord>, 3> splits{train, validation, test};
  const std::array<std::vector<WindowSample>*, 3> targets{&out.train, &out.validation, &out.test};

  std::vector<FeatureFrame> segment;
  std::vector<int> labels;
  auto flush = [&] {
    for (auto s : detail::window_starts(segment, config, stride)) {
      const auto label = labels[s + config.history_len()];
      targets[static_cast<std::size_t>(label)]->push_back(detail::make_window(segment, config, s));
    }
    segment.clear();
    labels.clear();
  };
  for (int k = 0; k < 3; ++k) {
    const auto records = splits[static_cast<std::size_t>(k)];
    if (records.empty()) continue;
    if (!segment.empty() && records.front().time != segment.back().time + hours{1}) flush();
    const auto raw = k == 0 ? train_frames : build_features(records, calendar);
    const auto frames = standardize(raw, out.stats);
    segment.insert(segment.end(), frames.begin(), frames.end());
    labels.insert(labels.end(), frames.size(), k);
  }
  flush();
  constexpr std::array<const char*, 3> names{"training", "validation", "test"};
  for (std::size_t k = 0; k < 3; ++k) {
    if (!splits[k].empty() && targets[k]->empty()) {
      throw SizeError(std::string(names[k]) + " split yields no complete window (needs " +
                      std::to_string(config.history_days) + " days of history before each forecast day)");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic series

struct SyntheticOptions {
  sys_days start = sys_days{std::chrono::year{2012} / std::chrono::January / 2};
  double base_load = 3000.0;
};

/// Hourly load with daily and weekly cycles, a temperature-driven component,
/// reduced demand on holidays and seeded Gaussian noise. Holidays follow
/// HolidayCalendar::fixed_dates.
inline std::vector<RawRecord> generate_synthetic(std::size_t days, std::uint64_t seed, SyntheticOptions opt = {}) {
  using namespace std::chrono;
  if (days == 0) throw SizeError("generate_synthetic: days must be positive");
  const double two_pi = 2.0 * std::numbers::pi;
  const auto first_year = static_cast<int>(year_month_day{opt.start}.year());
  const auto last_year = static_cast<int>(year_month_day{opt.start + std::chrono::days{days}}.year());
  const auto calendar = HolidayCalendar::fixed_dates(first_year, last_year);

  Rng rng(seed);
  std::vector<RawRecord> out;
  out.reserve(days * 24);
  for (std::size_t d = 0; d < days; ++d) {
    const sys_days day = opt.start + std::chrono::days{d};
    const double doy = static_cast<double>((day - sys_days{year_month_day{day}.year() / January / 1}).count());
    const unsigned dow = weekday{day}.iso_encoding();
    const bool off = dow >= 6 || calendar.contains(day);
    for (int h = 0; h < 24; ++h) {
      const double hour = h;
      const double temperature = 12.0 + 10.0 * std::sin(two_pi * (doy - 105.0) / 365.25) +
                                 4.0 * std::sin(two_pi * (hour - 9.0) / 24.0) + 1.5 * rng.normal();
      const double daily = 380.0 * std::sin(two_pi * (hour - 8.0) / 24.0) + 140.0 * std::sin(2.0 * two_pi * (hour - 5.0) / 24.0);
      const double weekly = off ? -320.0 : 40.0 * std::sin(two_pi * (dow - 1.0) / 7.0);
      const double thermal = 22.0 * std::abs(temperature - 16.0);
      const double load = opt.base_load + daily + weekly + thermal + 35.0 * rng.normal();
      out.push_back({day + hours{h}, std::max(load, 100.0), temperature});
    }
  }
  return out;
}

}  // namespace anlf
