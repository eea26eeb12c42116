#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "anlf/error.hpp"
#include "anlf/format.hpp"
#include "anlf/model.hpp"
#include "anlf/training.hpp"

namespace anlf {

struct DataConfig {
  std::string train;
  std::string validation;
  std::string test;
  std::string holidays;
  bool synthetic = false;
  std::size_t synthetic_days = 60;
  std::uint64_t synthetic_seed = 0;
  std::size_t synthetic_train_days = 45;
  std::size_t synthetic_validation_days = 7;
  std::size_t stride = 0;  // hours between windows; 0 = one day
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
  std::string output_dir = "anlf-run";
  bool record_timing = false;  // write wall-clock seconds into the epoch log

  /// Resolved settings, one `key = value` per entry, in a fixed order.
  std::vector<std::pair<std::string, std::string>> entries() const;
};

namespace detail {

struct KeyHandlers {
  std::map<std::string, std::function<void(const std::string&)>> set;
  std::map<std::string, std::function<std::string()>> get;
};

inline std::uint64_t parse_unsigned(const std::string& key, const std::string& text) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    if (!text.empty() && text[0] != '-') v = std::stoull(text, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (text.empty() || pos != text.size()) throw ConfigError(key + ": expected a non-negative integer, got '" + text + "'");
  return v;
}

inline double parse_real(const std::string& key, const std::string& text) {
  double v = 0.0;
  if (!parse_double(text, v)) throw ConfigError(key + ": expected a number, got '" + text + "'");
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

inline KeyHandlers key_handlers(RunConfig& c) {
  KeyHandlers h;
  auto size_key = [&](const std::string& key, std::size_t& field) {
    h.set[key] = [&field, key](const std::string& v) { field = parse_unsigned(key, v); };
    h.get[key] = [&field] { return std::to_string(field); };
  };
  auto u64_key = [&](const std::string& key, std::uint64_t& field) {
    h.set[key] = [&field, key](const std::string& v) { field = parse_unsigned(key, v); };
    h.get[key] = [&field] { return std::to_string(field); };
  };
  auto real_key = [&](const std::string& key, double& field) {
    h.set[key] = [&field, key](const std::string& v) { field = parse_real(key, v); };
    h.get[key] = [&field] { return format_double(field); };
  };
  auto bool_key = [&](const std::string& key, bool& field) {
    h.set[key] = [&field, key](const std::string& v) { field = parse_bool(key, v); };
    h.get[key] = [&field] { return std::string(field ? "true" : "false"); };
  };
  auto text_key = [&](const std::string& key, std::string& field) {
    h.set[key] = [&field](const std::string& v) { field = v; };
    h.get[key] = [&field] { return field; };
  };

  h.set["model.variant"] = [&c](const std::string& v) { c.model.variant = parse_variant(v); };
  h.get["model.variant"] = [&c] { return std::string(variant_name(c.model.variant)); };
  size_key("model.history_days", c.model.history_days);
  size_key("model.hours_per_day", c.model.hours_per_day);
  size_key("model.features", c.model.features);
  size_key("model.hidden", c.model.hidden);
  size_key("model.attention_dim", c.model.attention_dim);
  size_key("model.temporal_dim", c.model.temporal_dim);
  size_key("model.head_dim", c.model.head_dim);
  u64_key("model.seed", c.model.seed);

  size_key("train.batch", c.train.batch);
  size_key("train.epochs", c.train.epochs);
  real_key("train.lr", c.train.learning_rate);
  real_key("train.beta1", c.train.beta1);
  real_key("train.beta2", c.train.beta2);
  real_key("train.eps", c.train.epsilon);
  u64_key("train.seed", c.train.seed);
  bool_key("train.shuffle", c.train.shuffle);
  real_key("train.clip_norm", c.train.clip_norm);
  size_key("train.threads", c.train.threads);

  text_key("data.train", c.data.train);
  text_key("data.validation", c.data.validation);
  text_key("data.test", c.data.test);
  text_key("data.holidays", c.data.holidays);
  bool_key("data.synthetic", c.data.synthetic);
  size_key("data.synthetic_days", c.data.synthetic_days);
  u64_key("data.synthetic_seed", c.data.synthetic_seed);
  size_key("data.synthetic_train_days", c.data.synthetic_train_days);
  size_key("data.synthetic_validation_days", c.data.synthetic_validation_days);
  size_key("data.stride", c.data.stride);

  text_key("output.dir", c.output_dir);
  bool_key("output.timing", c.record_timing);
  return h;
}

}  // namespace detail

inline std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
  RunConfig copy = *this;
  const auto h = detail::key_handlers(copy);
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [key, get] : h.get) out.emplace_back(key, get());
  return out;
}

using ConfigOverrides = std::vector<std::pair<std::string, std::string>>;

/// Parses `key = value` lines; `#` starts a comment. Unknown or repeated
/// keys are errors. Training defaults (batch, epochs) and the hidden size
/// follow model.variant unless given explicitly. `overrides` replace file
/// entries of the same key. Relative paths are resolved against `base_dir`.
inline RunConfig parse_run_config(std::istream& in, const std::string& source,
                                  const std::filesystem::path& base_dir = {}, const ConfigOverrides& overrides = {}) {
  struct Entry {
    std::string value;
    std::size_t line;  // 0 for overrides
  };
  std::map<std::string, Entry> entries;
  std::string line;
  std::size_t line_no = 0;
  RunConfig probe;
  const auto known = detail::key_handlers(probe);
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const auto text = trim(std::string_view(line).substr(0, hash));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    const auto where = source + ":" + std::to_string(line_no) + ": ";
    if (eq == std::string_view::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key(trim(text.substr(0, eq)));
    const std::string value(trim(text.substr(eq + 1)));
    if (!known.set.count(key)) throw ConfigError(where + "unknown key '" + key + "'");
    if (value.empty()) throw ConfigError(where + "empty value for '" + key + "'");
    if (!entries.emplace(key, Entry{value, line_no}).second) throw ConfigError(where + "duplicate key '" + key + "'");
  }
  for (const auto& [key, value] : overrides) {
    if (!known.set.count(key)) throw ConfigError("override: unknown key '" + key + "'");
    entries[key] = Entry{value, 0};
  }

  RunConfig c;
  auto h = detail::key_handlers(c);
  auto apply = [&](const std::string& key) {
    const auto& e = entries.at(key);
    try {
      h.set.at(key)(e.value);
    } catch (const ConfigError& err) {
      throw ConfigError((e.line ? source + ":" + std::to_string(e.line) : std::string("override")) + ": " + err.what());
    }
  };
  if (entries.count("model.variant")) apply("model.variant");
  const auto defaults = default_train_config(c.model.variant);
  c.train.batch = defaults.batch;
  c.train.epochs = defaults.epochs;
  c.model.hidden = default_hidden_size(c.model.variant);
  for (const auto& [key, entry] : entries)
    if (key != "model.variant") apply(key);

  for (auto* path : {&c.data.train, &c.data.validation, &c.data.test, &c.data.holidays, &c.output_dir}) {
    if (!path->empty() && std::filesystem::path(*path).is_relative() && !base_dir.empty()) {
      *path = (base_dir / *path).lexically_normal().string();
    }
  }

  c.model.validate();
  c.train.validate();
  if (c.data.synthetic) {
    if (c.data.synthetic_train_days + c.data.synthetic_validation_days >= c.data.synthetic_days) {
      throw ConfigError(source + ": synthetic train and validation days leave no test days");
    }
  } else if (c.data.train.empty() || c.data.validation.empty() || c.data.holidays.empty()) {
    throw ConfigError(source + ": data.train, data.validation and data.holidays are required unless data.synthetic = true");
  }
  return c;
}

inline RunConfig load_run_config(const std::string& path, const ConfigOverrides& overrides = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_run_config(in, path, std::filesystem::path(path).parent_path(), overrides);
}

}  // namespace anlf
