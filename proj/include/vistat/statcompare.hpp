#pragma once

// Pairwise (paired t, Wilcoxon signed-ranks, sign) and multiple-comparison
// (Friedman, Nemenyi) tests over an N datasets x K algorithms metric matrix.
// Lower metric values are better throughout.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace vistat {

struct MetricsMatrix {
  Eigen::MatrixXd values;  // N x K
  std::vector<std::string> datasets;
  std::vector<std::string> algorithms;
  std::string metric;
  std::string horizon;

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }

  /// Column index of `algorithm`; throws ArgumentError naming it if absent.
  std::size_t column_index(const std::string& algorithm) const;
  std::vector<double> column(std::size_t j) const;
};

/// Parses `dataset,<algo_1>,...,<algo_K>` CSV, one row per dataset.
MetricsMatrix read_metrics_matrix(std::istream& in, std::string metric = {},
                                  std::string horizon = {});
void write_metrics_matrix(std::ostream& out, const MetricsMatrix& m);

enum class Decision { Accept, Reject };

const char* to_string(Decision d);

/// Reject iff |statistic| exceeds the critical value.
Decision decide(double statistic, double critical);

/// Two-sided sign decision from a printed or computed win count: reject iff
/// the larger of wins and N - wins exceeds the critical count.
Decision decide_sign(double wins, std::size_t n, double critical);

struct TestResult {
  std::string test;
  double statistic = 0.0;
  double critical = 0.0;
  Decision decision = Decision::Accept;
  double alpha = 0.05;
  std::vector<std::string> warnings;
};

struct PairedTResult : TestResult {
  double mean_difference = 0.0;
  double standard_error = 0.0;
  std::size_t df = 0;
};

struct WilcoxonResult : TestResult {
  double rank_sum_variant_better = 0.0;   // B+
  double rank_sum_baseline_better = 0.0;  // B-
};

enum class SignMethod { Auto, Normal, Exact };

struct SignResult : TestResult {
  double wins = 0.0;  // variant wins, ties credited half
  std::size_t n = 0;
  bool exact = false;
};

// Differences are d_u = baseline_u - variant_u; positive d means the variant
// achieved the lower (better) metric value.

PairedTResult paired_t(std::span<const double> baseline, std::span<const double> variant,
                       double alpha = 0.05);

WilcoxonResult wilcoxon(std::span<const double> baseline, std::span<const double> variant,
                        double alpha = 0.05);

/// Auto uses the normal approximation for N > 25 and the exact binomial
/// two-sided test otherwise.
SignResult sign_test(std::span<const double> baseline, std::span<const double> variant,
                     double alpha = 0.05, SignMethod method = SignMethod::Auto);

/// Decision from a win count alone.
SignResult sign_test_from_wins(double wins, std::size_t n, double alpha = 0.05,
                               SignMethod method = SignMethod::Auto);

/// Smallest win count k >= N/2 whose two-sided exact binomial(N, 1/2) tail
/// is <= alpha; N + 1 when no count is extreme enough.
std::size_t sign_exact_critical(std::size_t n, double alpha);

/// Normal-approximation rejection threshold N/2 + z sqrt(N)/2.
double sign_normal_threshold(std::size_t n, double alpha);

/// Ascending ranks 1..K with ties sharing the average of the spanned ranks.
std::vector<double> rank_row(std::span<const double> row);

struct RankTable {
  Eigen::MatrixXd ranks;  // N x K
  Eigen::VectorXd average;
  std::size_t datasets() const { return static_cast<std::size_t>(ranks.rows()); }
};

RankTable rank_matrix(const MetricsMatrix& m);

TestResult friedman(const RankTable& ranks, double alpha = 0.05);
TestResult friedman(std::span<const double> average_ranks, std::size_t n_datasets,
                    double alpha = 0.05);

struct NemenyiResult {
  double critical_difference = 0.0;
  double q_alpha = 0.0;
  std::vector<std::vector<bool>> significant;  // K x K
};

NemenyiResult nemenyi(std::span<const double> average_ranks, std::size_t n_datasets,
                      double q_alpha);

/// Studentized-range critical values divided by sqrt(2) for alpha = 0.05,
/// K = 2..20. Throws ArgumentError outside that range.
double nemenyi_q_alpha(std::size_t k);

enum class Distribution { StudentT, Normal, ChiSquared };

/// Quantile function. `df` is ignored for the normal distribution.
double critical_value(Distribution dist, double quantile, double df = 1.0);

/// Two-significant-figure statistic in the `R(8.2)` / `A(0.4)` style.
std::string format_cell(Decision d, double statistic);

inline constexpr const char* kReportCsvHeader =
    "test,metric,horizon,pair_or_family,statistic,critical,decision,warnings";

void write_report_row(std::ostream& out, const std::string& metric,
                      const std::string& horizon, const std::string& pair,
                      const TestResult& r);

/// Square matrix of average-rank gaps; significant pairs carry a trailing '*'.
void write_nemenyi_matrix(std::ostream& out, std::span<const std::string> names,
                          std::span<const double> average_ranks, const NemenyiResult& r);

}  // namespace vistat
