#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>

namespace vistat {

double rmse(std::span<const double> y, std::span<const double> yhat);
double mae(std::span<const double> y, std::span<const double> yhat);

/// Mean absolute percentage error as a fraction (no x100).
/// Throws DegenerateError naming the first index where y is zero.
double mape(std::span<const double> y, std::span<const double> yhat);

/// MAE scaled by the mean absolute one-step difference of y itself,
/// (1/(M-1)) sum_{i>=1} |y_i - y_{i-1}|. Needs M >= 2 and non-constant y.
double mase(std::span<const double> y, std::span<const double> yhat);

struct MetricReport {
  double rmse = 0.0;
  double mae = 0.0;
  double mape = 0.0;
  double mase = 0.0;
  std::size_t count = 0;
};

MetricReport evaluate_metrics(std::span<const double> y, std::span<const double> yhat);

inline constexpr const char* kMetricCsvHeader = "dataset,algorithm,horizon,rmse,mae,mape,mase,M";

void write_metric_row(std::ostream& out, const std::string& dataset,
                      const std::string& algorithm, std::size_t horizon,
                      const MetricReport& r);

}  // namespace vistat
