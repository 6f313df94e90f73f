#include "vistat/metrics.hpp"

#include <cmath>
#include <ostream>
#include <sstream>
#include <string>

#include "vistat/error.hpp"

namespace vistat {

namespace {

void check_lengths(std::span<const double> y, std::span<const double> yhat, std::size_t min_len) {
  if (y.size() != yhat.size())
    throw DimensionError("metric inputs differ in length (" + std::to_string(y.size()) +
                         " vs " + std::to_string(yhat.size()) + ")");
  if (y.size() < min_len)
    throw ArgumentError("metric needs at least " + std::to_string(min_len) + " values");
}

}  // namespace

double rmse(std::span<const double> y, std::span<const double> yhat) {
  check_lengths(y, yhat, 1);
  double ss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) ss += (y[i] - yhat[i]) * (y[i] - yhat[i]);
  return std::sqrt(ss / static_cast<double>(y.size()));
}

double mae(std::span<const double> y, std::span<const double> yhat) {
  check_lengths(y, yhat, 1);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(y[i] - yhat[i]);
  return s / static_cast<double>(y.size());
}

double mape(std::span<const double> y, std::span<const double> yhat) {
  check_lengths(y, yhat, 1);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == 0.0)
      throw DegenerateError("MAPE undefined: actual value is zero at index " + std::to_string(i));
    s += std::abs((y[i] - yhat[i]) / y[i]);
  }
  return s / static_cast<double>(y.size());
}

double mase(std::span<const double> y, std::span<const double> yhat) {
  check_lengths(y, yhat, 2);
  double naive = 0.0;
  for (std::size_t i = 1; i < y.size(); ++i) naive += std::abs(y[i] - y[i - 1]);
  naive /= static_cast<double>(y.size() - 1);
  if (!(naive > 0.0))
    throw DegenerateError("MASE undefined: actual series is constant (naive error 0)");
  return mae(y, yhat) / naive;
}

MetricReport evaluate_metrics(std::span<const double> y, std::span<const double> yhat) {
  return {rmse(y, yhat), mae(y, yhat), mape(y, yhat), mase(y, yhat), y.size()};
}

void write_metric_row(std::ostream& out, const std::string& dataset,
                      const std::string& algorithm, std::size_t horizon,
                      const MetricReport& r) {
  std::ostringstream row;
  row.precision(10);
  row << dataset << ',' << algorithm << ',' << horizon << ',' << r.rmse << ',' << r.mae << ','
      << r.mape << ',' << r.mase << ',' << r.count << '\n';
  out << row.str();
}

}  // namespace vistat
