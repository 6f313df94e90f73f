#pragma once

// Ingestion, rolling-window normalization, chronological splitting and
// supervised windowing of a single instrument's OHLCV history.

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace vistat {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Column { Open = 0, High, Low, Close, Volume };

inline constexpr std::array<std::string_view, 5> kColumnNames = {
    "open", "high", "low", "close", "volume"};

/// Parses "close", "Open", ... Throws ArgumentError for anything else.
Column parse_column(std::string_view name);
std::string_view column_name(Column c);

/// One instrument's daily observations, sorted ascending by date.
struct SeriesTable {
  std::string instrument_id;
  std::vector<std::string> dates;  // ISO-8601, strictly increasing
  std::array<std::vector<double>, 5> columns;

  std::size_t size() const { return dates.size(); }
  const std::vector<double>& column(Column c) const {
    return columns[static_cast<std::size_t>(c)];
  }
};

/// Reads `date,open,high,low,close,volume` CSV (header order is free, extra
/// columns are ignored). Rows are sorted by date.
SeriesTable load_ohlcv(const std::filesystem::path& path);
SeriesTable parse_ohlcv(std::istream& in, std::string instrument_id = {});

struct NormalizationState {
  std::size_t window = 0;
  // Indexed by output position; output i corresponds to raw index i + window - 1.
  std::vector<double> mean;
  std::vector<double> stddev;
};

struct Normalized {
  std::vector<double> values;
  NormalizationState state;
};

inline constexpr std::size_t kDefaultNormWindow = 30;

/// Standardizes each observation by the population mean/std of the trailing
/// window t-w+1..t (inclusive). The first w-1 observations are dropped.
/// A constant window throws DegenerateError.
Normalized rolling_normalize(std::span<const double> series, std::size_t w);

/// sigma * z + mu. Throws DomainError when sigma <= 0.
double denormalize(double z, double mu, double sigma);

struct SplitSpec {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
};

/// Half-open index range [begin, end).
struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

struct Partitions {
  IndexRange train, val, test;
};

/// Chronological split with sizes floor(a T), floor(b T), remainder.
Partitions split(std::size_t length, const SplitSpec& spec = {});

/// Affine rescaling of a target used to bring it onto the model scale.
struct Scaling {
  double mean = 0.0;
  double stddev = 1.0;
};

struct WindowSample {
  Matrix x;                 // m x F'
  Vector raw_target_window; // m raw target values, backing the visibility graph
  Vector y;                 // q raw future target values
  std::size_t t_index = 0;  // anchor: index of the last row in x
  Scaling target_scaling;   // trailing stats of the target at the anchor
};

struct WindowSet {
  std::vector<WindowSample> samples;
  std::vector<std::string> warnings;
};

/// One sample per anchor t with [t-m+1, t] and [t+1, t+q] inside `range`.
/// Rows of `features` and `raw_target` share the same index space.
WindowSet make_windows(const Matrix& features, std::span<const double> raw_target,
                       std::size_t m, std::size_t q, IndexRange range);

/// Flattened window dump: t_index, feature_0.. (row-major m x F'), y_0..
void write_windows_csv(std::ostream& out, std::span<const WindowSample> samples);

struct DatasetOptions {
  std::size_t norm_window = kDefaultNormWindow;
  std::size_t m = 16;
  std::size_t q = 1;
  SplitSpec split;
  std::vector<Column> features = {Column::Close};
  Column target = Column::Close;
};

struct Dataset {
  std::vector<WindowSample> train, val, test;
  Partitions partitions;        // over the normalized index space
  std::size_t offset = 0;       // raw index of normalized position 0
  std::vector<std::string> warnings;
};

/// Full preparation: normalize every feature column, drop the warm-up rows,
/// split chronologically and window each partition. Targets carry the
/// anchor-time stats of the target column in `target_scaling`.
Dataset prepare_dataset(const SeriesTable& table, const DatasetOptions& opts);

}  // namespace vistat
