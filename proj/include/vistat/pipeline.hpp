#pragma once

// End-to-end orchestration shared by the command-line tool and the Python
// module: run configuration, training with on-disk artifacts, checkpoint
// evaluation, and the pairwise/rank report builders.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vistat/metrics.hpp"
#include "vistat/series.hpp"
#include "vistat/statcompare.hpp"
#include "vistat/tgmodel.hpp"

namespace vistat {

struct RunConfig {
  std::vector<std::filesystem::path> inputs;
  std::size_t horizon = 1;
  std::size_t m = 16;
  std::size_t norm_window = kDefaultNormWindow;
  std::string preset = "desk";
  TgConfig model;  // resolved; m, q, features and seed are synced from the fields here
  ModelKind kind = ModelKind::TimeGeometric;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = ".";
  std::vector<Column> features = {Column::Close};
  Column target = Column::Close;
  SplitSpec split;

  /// Pushes m, horizon, feature count and seed into `model`.
  void sync();
  /// Throws ConfigError / ArgumentError; checks input paths exist.
  void validate() const;
  DatasetOptions dataset_options() const;
};

/// Canonical JSON of everything that determines a training run except the
/// input paths and output directory.
std::string run_config_json(const RunConfig& rc);

/// Git-style blob hash: SHA-1 over "blob <len>\0" followed by the content.
std::string git_blob_sha1(const std::string& content);

/// Owns files written by a command and deletes them unless committed.
class OutputGuard {
 public:
  OutputGuard() = default;
  OutputGuard(const OutputGuard&) = delete;
  OutputGuard& operator=(const OutputGuard&) = delete;
  ~OutputGuard();

  /// Writes `content` to `path` (creating parent directories) and tracks it.
  void write(const std::filesystem::path& path, const std::string& content);
  void commit() { committed_ = true; }

 private:
  std::vector<std::filesystem::path> written_;
  bool committed_ = false;
};

struct TrainArtifacts {
  std::filesystem::path checkpoint;
  std::filesystem::path log;
  TrainResult result;
  std::string metadata;
};

/// Stem used for artifact names, e.g. "AAPL.tg-lstm".
std::string artifact_stem(const std::string& instrument, const RunConfig& rc);

/// Loads one instrument, trains, writes `<stem>.ckpt` and `<stem>.log.csv`
/// under rc.out_dir. Nothing is left behind on failure.
TrainArtifacts train_instrument(const std::filesystem::path& input, const RunConfig& rc);

/// Runs every input; instrument i uses seed rc.seed + i. `jobs` > 1 trains
/// instruments concurrently, each writing only its own files.
std::vector<TrainArtifacts> train_all(const RunConfig& rc, std::size_t jobs = 1);

/// Reads a manifest: one CSV path per line, blank lines and '#' comments
/// skipped, relative paths resolved against the manifest's directory.
std::vector<std::filesystem::path> read_manifest(const std::filesystem::path& path);

enum class Partition { Train, Val, Test };
Partition parse_partition(std::string_view name);

struct Evaluation {
  MetricReport report;
  std::string dataset;
  std::string algorithm;
  std::size_t horizon = 1;
  std::vector<double> actual;     // step-major: all step-1 values, then step 2, ...
  std::vector<double> predicted;
};

/// Rebuilds the partition from the checkpoint's stored data options and scores
/// denormalized forecasts.
Evaluation evaluate_checkpoint(const Checkpoint& ck, const SeriesTable& table,
                               Partition part = Partition::Test);

Checkpoint load_checkpoint(const std::filesystem::path& path);

// Report builders ----------------------------------------------------------

struct PairSpec {
  std::string baseline;
  std::string variant;
};

/// Parses "BL:TG".
PairSpec parse_pair(std::string_view text);

enum class PairwiseTest { PairedT, Wilcoxon, Sign };
PairwiseTest parse_pairwise_test(std::string_view name);
std::string_view to_string(PairwiseTest t);

struct PairwiseCell {
  std::string metric;
  std::string horizon;
  PairSpec pair;
  PairwiseTest test;
  TestResult result;
  bool degenerate = false;
};

/// Runs each requested test for each pair on each matrix. Degenerate inputs
/// are reported as accept with a warning rather than aborting the report.
std::vector<PairwiseCell> compare(const std::vector<MetricsMatrix>& matrices,
                                  const std::vector<PairSpec>& pairs,
                                  const std::vector<PairwiseTest>& tests, double alpha = 0.05);

void write_pairwise_csv(std::ostream& out, const std::vector<PairwiseCell>& cells);

/// Grid summary: one block per test, rows are pairs, columns are metrics, each
/// cell "R(8.2)"-style.
void write_pairwise_summary(std::ostream& out, const std::vector<PairwiseCell>& cells);

struct RankReport {
  RankTable table;
  TestResult friedman;
  NemenyiResult nemenyi;
  std::vector<std::string> algorithms;
  std::string metric;
  std::string horizon;
};

/// q_alpha defaults to the built-in table for K when not supplied.
RankReport rank(const MetricsMatrix& m, double alpha = 0.05,
                std::optional<double> q_alpha = std::nullopt);

void write_average_ranks_csv(std::ostream& out, const RankReport& r);
void write_rank_summary(std::ostream& out, const RankReport& r);

}  // namespace vistat
