#pragma once

#include <cmath>
#include <ostream>
#include <span>
#include <string>

#include "anlf/error.hpp"
#include "anlf/format.hpp"

namespace anlf {

/// Forecast errors in load units (MAE, RMSE) and percent (MAPE, nRMSE).
/// nRMSE is normalized by the mean actual load.
struct MetricReport {
  double mae = 0.0;
  double rmse = 0.0;
  double mape = 0.0;
  double nrmse = 0.0;
  std::size_t points = 0;
};

inline MetricReport compute_metrics(std::span<const double> actual, std::span<const double> forecast) {
  if (actual.size() != forecast.size() || actual.empty()) {
    throw DimensionError("compute_metrics: " + std::to_string(actual.size()) + " actual vs " +
                         std::to_string(forecast.size()) + " forecast values");
  }
  double abs_sum = 0.0, sq_sum = 0.0, pct_sum = 0.0, actual_sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (!(actual[i] > 0.0)) {
      throw DomainError("compute_metrics: actual value " + format_double(actual[i]) + " at index " +
                        std::to_string(i) + " is not positive");
    }
    const double err = std::abs(actual[i] - forecast[i]);
    abs_sum += err;
    sq_sum += err * err;
    pct_sum += err / actual[i];
    actual_sum += actual[i];
  }
  const double count = static_cast<double>(actual.size());
  MetricReport r;
  r.points = actual.size();
  r.mae = abs_sum / count;
  r.rmse = std::sqrt(sq_sum / count);
  r.mape = 100.0 * pct_sum / count;
  r.nrmse = 100.0 * r.rmse / (actual_sum / count);
  return r;
}

/// |y − ŷ| / y in percent.
inline double relative_error(double actual, double forecast) {
  if (!(actual > 0.0)) throw DomainError("relative_error: actual value " + format_double(actual) + " is not positive");
  return std::abs(actual - forecast) / actual * 100.0;
}

inline void write_key_values(std::ostream& os, const MetricReport& r) {
  os << "mae = " << format_double(r.mae) << '\n'
     << "rmse = " << format_double(r.rmse) << '\n'
     << "mape = " << format_double(r.mape) << '\n'
     << "nrmse = " << format_double(r.nrmse) << '\n'
     << "points = " << r.points << '\n';
}

inline constexpr const char* kMetricCsvHeader = "mae,rmse,mape,nrmse,points";

inline std::string metric_csv_row(const MetricReport& r) {
  return format_double(r.mae) + ',' + format_double(r.rmse) + ',' + format_double(r.mape) + ',' +
         format_double(r.nrmse) + ',' + std::to_string(r.points);
}

}  // namespace anlf
