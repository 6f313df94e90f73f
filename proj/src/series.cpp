#include "vistat/series.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "vistat/error.hpp"

namespace vistat {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

bool valid_iso_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9})
    if (s[i] < '0' || s[i] > '9') return false;
  const int month = (s[5] - '0') * 10 + (s[6] - '0');
  const int day = (s[8] - '0') * 10 + (s[9] - '0');
  return month >= 1 && month <= 12 && day >= 1 && day <= 31;
}

double parse_number(std::string_view field, std::size_t line, std::string_view col) {
  double v = 0.0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (field.empty() || ec != std::errc{} || ptr != end || !std::isfinite(v))
    throw ParseError("cannot parse " + std::string(col) + " value '" +
                         std::string(field) + "'",
                     line);
  return v;
}

}  // namespace

Column parse_column(std::string_view name) {
  const auto key = lower(name);
  for (std::size_t i = 0; i < kColumnNames.size(); ++i)
    if (key == kColumnNames[i]) return static_cast<Column>(i);
  throw ArgumentError("unknown column '" + std::string(name) + "'");
}

std::string_view column_name(Column c) {
  return kColumnNames[static_cast<std::size_t>(c)];
}

SeriesTable load_ohlcv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open " + path.string());
  return parse_ohlcv(in, path.stem().string());
}

SeriesTable parse_ohlcv(std::istream& in, std::string instrument_id) {
  std::string line;
  std::size_t lineno = 0;
  std::string header;
  while (std::getline(in, line)) {
    ++lineno;
    if (!trim(line).empty()) {
      header = line;
      break;
    }
  }
  if (header.empty()) throw SchemaError("empty input: no header row");

  const auto names = split_fields(header);
  int date_col = -1;
  std::array<int, 5> col_idx;
  col_idx.fill(-1);
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto key = lower(names[i]);
    if (key == "date") {
      date_col = static_cast<int>(i);
      continue;
    }
    for (std::size_t c = 0; c < kColumnNames.size(); ++c)
      if (key == kColumnNames[c]) col_idx[c] = static_cast<int>(i);
  }
  if (date_col < 0) throw SchemaError("missing column 'date'");
  for (std::size_t c = 0; c < kColumnNames.size(); ++c)
    if (col_idx[c] < 0)
      throw SchemaError("missing column '" + std::string(kColumnNames[c]) + "'");

  struct Row {
    std::string date;
    std::array<double, 5> v;
    std::size_t line;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != names.size())
      throw ParseError("expected " + std::to_string(names.size()) + " fields, got " +
                           std::to_string(fields.size()),
                       lineno);
    Row r;
    r.line = lineno;
    r.date = std::string(fields[static_cast<std::size_t>(date_col)]);
    if (!valid_iso_date(r.date))
      throw ParseError("invalid date '" + r.date + "' (expected YYYY-MM-DD)", lineno);
    for (std::size_t c = 0; c < 5; ++c)
      r.v[c] = parse_number(fields[static_cast<std::size_t>(col_idx[c])], lineno,
                            kColumnNames[c]);
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw SchemaError("no data rows");

  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.date < b.date; });
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].date == rows[i - 1].date)
      throw DuplicateError("duplicate date " + rows[i].date + " (lines " +
                           std::to_string(rows[i - 1].line) + " and " +
                           std::to_string(rows[i].line) + ")");

  SeriesTable table;
  table.instrument_id = std::move(instrument_id);
  table.dates.reserve(rows.size());
  for (auto& col : table.columns) col.reserve(rows.size());
  for (auto& r : rows) {
    table.dates.push_back(std::move(r.date));
    for (std::size_t c = 0; c < 5; ++c) table.columns[c].push_back(r.v[c]);
  }
  return table;
}

Normalized rolling_normalize(std::span<const double> series, std::size_t w) {
  if (w < 2) throw ArgumentError("normalization window must be >= 2");
  if (series.size() < w)
    throw ArgumentError("series length " + std::to_string(series.size()) +
                        " shorter than window " + std::to_string(w));
  Normalized out;
  out.state.window = w;
  const std::size_t n = series.size() - w + 1;
  out.values.reserve(n);
  out.state.mean.reserve(n);
  out.state.stddev.reserve(n);
  for (std::size_t t = w - 1; t < series.size(); ++t) {
    const auto window = series.subspan(t + 1 - w, w);
    const auto [lo, hi] = std::minmax_element(window.begin(), window.end());
    if (*lo == *hi)
      throw DegenerateError("constant normalization window ending at index " +
                            std::to_string(t));
    const double mean =
        std::accumulate(window.begin(), window.end(), 0.0) / static_cast<double>(w);
    double ss = 0.0;
    for (double v : window) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(w));
    if (!(sd > 0.0))
      throw DegenerateError("zero standard deviation in window ending at index " +
                            std::to_string(t));
    out.values.push_back((series[t] - mean) / sd);
    out.state.mean.push_back(mean);
    out.state.stddev.push_back(sd);
  }
  return out;
}

double denormalize(double z, double mu, double sigma) {
  if (!(sigma > 0.0)) throw DomainError("denormalize: sigma must be positive");
  return sigma * z + mu;
}

Partitions split(std::size_t length, const SplitSpec& spec) {
  for (double f : {spec.train, spec.val, spec.test})
    if (!(f > 0.0 && f < 1.0)) throw ArgumentError("split fractions must lie in (0,1)");
  if (std::abs(spec.train + spec.val + spec.test - 1.0) > 1e-9)
    throw ArgumentError("split fractions must sum to 1");
  const auto n = static_cast<double>(length);
  // The epsilon absorbs representation error such as 0.6 * 10 = 5.999...
  const auto train = static_cast<std::size_t>(std::floor(spec.train * n + 1e-9));
  const auto val = static_cast<std::size_t>(std::floor(spec.val * n + 1e-9));
  if (length < 5 || train == 0 || val == 0 || train + val >= length)
    throw ArgumentError("series of length " + std::to_string(length) +
                        " too short to split into three nonempty parts");
  return {{0, train}, {train, train + val}, {train + val, length}};
}

WindowSet make_windows(const Matrix& features, std::span<const double> raw_target,
                       std::size_t m, std::size_t q, IndexRange range) {
  if (m < 2) throw ArgumentError("window length m must be >= 2");
  if (q < 1) throw ArgumentError("horizon q must be >= 1");
  if (static_cast<std::size_t>(features.rows()) != raw_target.size())
    throw DimensionError("features and target differ in length");
  if (range.end > raw_target.size() || range.begin > range.end)
    throw DimensionError("partition range outside the series");

  WindowSet out;
  if (m + q > range.size()) {
    out.warnings.push_back("partition [" + std::to_string(range.begin) + "," +
                           std::to_string(range.end) + ") shorter than m+q=" +
                           std::to_string(m + q) + "; no windows");
    return out;
  }
  const auto f = features.cols();
  const std::size_t count = range.size() - m - q + 1;
  out.samples.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t first = range.begin + k;
    WindowSample s;
    s.t_index = first + m - 1;
    s.x = features.block(static_cast<Eigen::Index>(first), 0, static_cast<Eigen::Index>(m), f);
    s.raw_target_window = Eigen::Map<const Vector>(raw_target.data() + first,
                                                   static_cast<Eigen::Index>(m));
    s.y = Eigen::Map<const Vector>(raw_target.data() + s.t_index + 1,
                                   static_cast<Eigen::Index>(q));
    out.samples.push_back(std::move(s));
  }
  return out;
}

void write_windows_csv(std::ostream& out, std::span<const WindowSample> samples) {
  if (samples.empty()) {
    out << "t_index\n";
    return;
  }
  const auto nf = samples.front().x.size();
  const auto nq = samples.front().y.size();
  out << "t_index";
  for (Eigen::Index i = 0; i < nf; ++i) out << ",feature_" << i;
  for (Eigen::Index i = 0; i < nq; ++i) out << ",y_" << i;
  out << '\n';
  std::ostringstream row;
  row.precision(17);
  for (const auto& s : samples) {
    row.str({});
    row << s.t_index;
    for (Eigen::Index r = 0; r < s.x.rows(); ++r)
      for (Eigen::Index c = 0; c < s.x.cols(); ++c) row << ',' << s.x(r, c);
    for (Eigen::Index i = 0; i < s.y.size(); ++i) row << ',' << s.y(i);
    out << row.str() << '\n';
  }
}

Dataset prepare_dataset(const SeriesTable& table, const DatasetOptions& opts) {
  if (opts.features.empty()) throw ConfigError("at least one feature column required");
  const std::size_t w = opts.norm_window;
  const std::size_t T = table.size();
  if (T < w) throw ConfigError("series shorter than normalization window");
  const std::size_t n = T - w + 1;

  Matrix features(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(opts.features.size()));
  for (std::size_t j = 0; j < opts.features.size(); ++j) {
    const auto norm = rolling_normalize(table.column(opts.features[j]), w);
    for (std::size_t i = 0; i < n; ++i)
      features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = norm.values[i];
  }
  const auto& raw = table.column(opts.target);
  const auto target_norm = rolling_normalize(raw, w);
  const std::span<const double> raw_tail(raw.data() + (w - 1), n);

  Dataset ds;
  ds.offset = w - 1;
  ds.partitions = split(n, opts.split);
  auto build = [&](IndexRange r, std::vector<WindowSample>& dst) {
    auto set = make_windows(features, raw_tail, opts.m, opts.q, r);
    for (auto& s : set.samples)
      s.target_scaling = {target_norm.state.mean[s.t_index], target_norm.state.stddev[s.t_index]};
    dst = std::move(set.samples);
    ds.warnings.insert(ds.warnings.end(), set.warnings.begin(), set.warnings.end());
  };
  build(ds.partitions.train, ds.train);
  build(ds.partitions.val, ds.val);
  build(ds.partitions.test, ds.test);
  return ds;
}

}  // namespace vistat
