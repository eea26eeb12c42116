#pragma once

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "anlf/data.hpp"
#include "anlf/format.hpp"
#include "anlf/model.hpp"

namespace anlf {

inline constexpr int kCheckpointVersion = 1;

/// Everything needed to forecast: dimensions, scaling, holiday source and
/// weights.
struct Checkpoint {
  ModelConfig model;
  StandardizationStats stats;
  std::string holidays = "synthetic";  // "synthetic" or a calendar path
  ModelParams params;
};

// Layout:
//   anlf-checkpoint 1
//   <key> <value>                    one line per config/stats entry
//   param <name> <rank> <extents...>
//   <values, space separated>
//   end
inline void save_checkpoint(std::ostream& os, const Checkpoint& ck) {
  const auto& m = ck.model;
  os << "anlf-checkpoint " << kCheckpointVersion << '\n'
     << "model.variant " << variant_name(m.variant) << '\n'
     << "model.history_days " << m.history_days << '\n'
     << "model.hours_per_day " << m.hours_per_day << '\n'
     << "model.features " << m.features << '\n'
     << "model.hidden " << m.hidden << '\n'
     << "model.attention_dim " << m.attention_dim << '\n'
     << "model.temporal_dim " << m.temporal_dim << '\n'
     << "model.head_dim " << m.head_dim << '\n'
     << "model.seed " << m.seed << '\n'
     << "stats.load_mean " << format_double(ck.stats.load_mean) << '\n'
     << "stats.load_std " << format_double(ck.stats.load_std) << '\n'
     << "stats.temperature_mean " << format_double(ck.stats.temperature_mean) << '\n'
     << "stats.temperature_std " << format_double(ck.stats.temperature_std) << '\n'
     << "holidays " << ck.holidays << '\n';
  ck.params.visit([&](const std::string& name, const Tensor& t) {
    os << "param " << name << ' ' << t.rank();
    for (auto e : t.shape()) os << ' ' << e;
    os << '\n';
    const auto v = t.values();
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? " " : "") << format_double(v[i]);
    os << '\n';
  });
  os << "end\n";
}

inline Checkpoint load_checkpoint(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) -> ParseError {
    return ParseError(source + ":" + std::to_string(line_no) + ": " + what);
  };
  auto next = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!trim(line).empty()) return true;
    }
    return false;
  };

  if (!next() || line != "anlf-checkpoint " + std::to_string(kCheckpointVersion)) {
    throw fail("not an anlf checkpoint (version " + std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint ck;
  auto unsigned_value = [&](const std::string& text) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(text, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != text.size() || text.empty() || text[0] == '-') throw fail("bad integer '" + text + "'");
    return v;
  };
  auto double_value = [&](const std::string& text) {
    double v = 0.0;
    if (!parse_double(text, v)) throw fail("bad number '" + text + "'");
    return v;
  };

  while (next() && line.rfind("param ", 0) != 0) {
    std::istringstream ls(line);
    std::string key, value;
    ls >> key >> value;
    auto& m = ck.model;
    if (key == "model.variant") m.variant = parse_variant(value);
    else if (key == "model.history_days") m.history_days = unsigned_value(value);
    else if (key == "model.hours_per_day") m.hours_per_day = unsigned_value(value);
    else if (key == "model.features") m.features = unsigned_value(value);
    else if (key == "model.hidden") m.hidden = unsigned_value(value);
    else if (key == "model.attention_dim") m.attention_dim = unsigned_value(value);
    else if (key == "model.temporal_dim") m.temporal_dim = unsigned_value(value);
    else if (key == "model.head_dim") m.head_dim = unsigned_value(value);
    else if (key == "model.seed") m.seed = unsigned_value(value);
    else if (key == "stats.load_mean") ck.stats.load_mean = double_value(value);
    else if (key == "stats.load_std") ck.stats.load_std = double_value(value);
    else if (key == "stats.temperature_mean") ck.stats.temperature_mean = double_value(value);
    else if (key == "stats.temperature_std") ck.stats.temperature_std = double_value(value);
    else if (key == "holidays") ck.holidays = std::string(trim(std::string_view(line).substr(key.size())));
    else throw fail("unknown checkpoint entry '" + key + "'");
  }
  ck.model.validate();

  // The layout is a pure function of the config; fill it in visit order.
  ck.params = init_params(ck.model);
  ck.params.visit([&](const std::string& name, Tensor& t) {
    if (line.rfind("param ", 0) != 0) throw fail("expected parameter " + name);
    std::istringstream header(line.substr(6));
    std::string got;
    std::size_t rank = 0;
    header >> got >> rank;
    Shape shape(rank);
    for (auto& e : shape) header >> e;
    if (got != name || shape != t.shape()) {
      throw fail("parameter " + got + " " + shape_string(shape) + " does not match expected " + name + " " +
                 shape_string(t.shape()));
    }
    if (!next()) throw fail("missing values for " + name);
    std::vector<double> values;
    values.reserve(t.size());
    std::istringstream vs(line);
    std::string tok;
    while (vs >> tok) values.push_back(double_value(tok));
    if (values.size() != t.size()) throw fail("parameter " + name + " has " + std::to_string(values.size()) + " values, expected " + std::to_string(t.size()));
    t = Tensor(t.shape(), std::move(values));
    next();
  });
  if (line != "end") throw fail("expected 'end', got '" + line.substr(0, 40) + "'");
  return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write checkpoint '" + path + "'");
  save_checkpoint(os, ck);
  if (!os) throw IoError("failed writing checkpoint '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  return load_checkpoint(in, path);
}

}  // namespace anlf
