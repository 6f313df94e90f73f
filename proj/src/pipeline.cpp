#include "vistat/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include <openssl/evp.h>

#include <json.hpp>

#include "vistat/error.hpp"

namespace vistat {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

ojson columns_json(const std::vector<Column>& cols) {
  ojson a = ojson::array();
  for (auto c : cols) a.push_back(std::string(column_name(c)));
  return a;
}

std::string algorithm_name(ModelKind kind, TimeCell cell) {
  return std::string(to_string(kind)) + "-" + std::string(to_string(cell));
}

}  // namespace

void RunConfig::sync() {
  model.m = m;
  model.q = horizon;
  model.features = features.size();
  model.seed = seed;
}

void RunConfig::validate() const {
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
  if (norm_window < 2) throw ConfigError("normalization window must be >= 2");
  if (features.empty()) throw ConfigError("at least one feature column is required");
  for (std::size_t i = 0; i < features.size(); ++i)
    for (std::size_t j = i + 1; j < features.size(); ++j)
      if (features[i] == features[j])
        throw ConfigError("feature column listed twice: " + std::string(column_name(features[i])));
  if (model.m != m || model.q != horizon || model.features != features.size())
    throw InvariantError("run config not synced with its model config");
  model.validate();
  if (inputs.empty()) throw ConfigError("no input files given");
  for (const auto& p : inputs)
    if (!fs::is_regular_file(p)) throw ArgumentError("input file not found: " + p.string());
}

DatasetOptions RunConfig::dataset_options() const {
  DatasetOptions o;
  o.norm_window = norm_window;
  o.m = m;
  o.q = horizon;
  o.split = split;
  o.features = features;
  o.target = target;
  return o;
}

std::string run_config_json(const RunConfig& rc) {
  ojson j;
  j["model_kind"] = std::string(to_string(rc.kind));
  j["preset"] = rc.preset;
  j["seed"] = rc.seed;
  j["norm_window"] = rc.norm_window;
  j["features"] = columns_json(rc.features);
  j["target"] = std::string(column_name(rc.target));
  j["split"] = {rc.split.train, rc.split.val, rc.split.test};
  j["model"] = ojson::parse(config_to_json(rc.model));
  return j.dump();
}

std::string git_blob_sha1(const std::string& content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr) throw InvariantError("cannot allocate digest context");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw InvariantError("SHA-1 digest failed");
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i)
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return hex.str();
}

OutputGuard::~OutputGuard() {
  if (committed_) return;
  std::error_code ec;
  for (const auto& p : written_) fs::remove(p, ec);
}

void OutputGuard::write(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  written_.push_back(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArgumentError("cannot open output file " + path.string());
  out << content;
  out.close();
  if (!out) throw ArgumentError("failed writing " + path.string());
}

std::string artifact_stem(const std::string& instrument, const RunConfig& rc) {
  return instrument + "." + algorithm_name(rc.kind, rc.model.time_cell);
}

TrainArtifacts train_instrument(const fs::path& input, const RunConfig& rc) {
  rc.validate();
  const auto table = load_ohlcv(input);
  const auto ds = prepare_dataset(table, rc.dataset_options());
  const auto train_set = make_examples(ds.train, rc.model);
  const auto val_set = make_examples(ds.val, rc.model);

  TrainArtifacts art;
  art.result = train(train_set, val_set, rc.model, rc.kind);

  ojson meta;
  meta["instrument"] = table.instrument_id;
  meta["seed"] = rc.seed;
  meta["preset"] = rc.preset;
  meta["config_hash"] = git_blob_sha1(run_config_json(rc));
  meta["model_kind"] = std::string(to_string(rc.kind));
  meta["norm_window"] = rc.norm_window;
  meta["features"] = columns_json(rc.features);
  meta["target"] = std::string(column_name(rc.target));
  meta["split"] = {rc.split.train, rc.split.val, rc.split.test};
  meta["samples"] = {ds.train.size(), ds.val.size(), ds.test.size()};
  meta["best_epoch"] = art.result.best_epoch;
  meta["epochs_run"] = art.result.log.size() - 1;
  meta["early_stopped"] = art.result.early_stopped;
  art.metadata = meta.dump();

  const auto stem = artifact_stem(table.instrument_id, rc);
  art.checkpoint = rc.out_dir / (stem + ".ckpt");
  art.log = rc.out_dir / (stem + ".log.csv");

  std::ostringstream ck, log;
  write_checkpoint(ck, {rc.kind, rc.model, art.metadata, art.result.params});
  write_training_log(log, art.result.log);
  OutputGuard guard;
  guard.write(art.checkpoint, ck.str());
  guard.write(art.log, log.str());
  guard.commit();
  return art;
}

std::vector<TrainArtifacts> train_all(const RunConfig& rc, std::size_t jobs) {
  const std::size_t n = rc.inputs.size();
  std::vector<TrainArtifacts> out(n);
  auto run_one = [&](std::size_t i) {
    RunConfig one = rc;
    one.seed = rc.seed + i;
    one.sync();
    out[i] = train_instrument(rc.inputs[i], one);
  };
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) run_one(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < std::min(jobs, n); ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          run_one(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::vector<fs::path> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open manifest " + path.string());
  std::vector<fs::path> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r");
    fs::path p = line.substr(first, last - first + 1);
    if (p.is_relative()) p = path.parent_path() / p;
    out.push_back(p);
  }
  if (out.empty()) throw SchemaError("manifest lists no instruments: " + path.string());
  return out;
}

Partition parse_partition(std::string_view name) {
  const auto n = lower(name);
  if (n == "train") return Partition::Train;
  if (n == "val" || n == "validation") return Partition::Val;
  if (n == "test") return Partition::Test;
  throw ArgumentError("unknown partition '" + std::string(name) + "'");
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

Evaluation evaluate_checkpoint(const Checkpoint& ck, const SeriesTable& table, Partition part) {
  ojson meta;
  try {
    meta = ojson::parse(ck.metadata);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("checkpoint metadata is not JSON: ") + e.what());
  }
  DatasetOptions opts;
  opts.m = ck.config.m;
  opts.q = ck.config.q;
  opts.norm_window = meta.value("norm_window", kDefaultNormWindow);
  if (meta.contains("features")) {
    opts.features.clear();
    for (const auto& f : meta["features"]) opts.features.push_back(parse_column(f.get<std::string>()));
  }
  if (meta.contains("target")) opts.target = parse_column(meta["target"].get<std::string>());
  if (meta.contains("split")) {
    const auto& s = meta["split"];
    opts.split = {s.at(0).get<double>(), s.at(1).get<double>(), s.at(2).get<double>()};
  }
  if (opts.features.size() != ck.config.features)
    throw DimensionError("checkpoint lists " + std::to_string(opts.features.size()) +
                         " feature columns but its model expects " +
                         std::to_string(ck.config.features));

  const auto ds = prepare_dataset(table, opts);
  const auto& samples = part == Partition::Train ? ds.train : part == Partition::Val ? ds.val : ds.test;
  if (samples.size() < 2)
    throw ArgumentError("partition holds fewer than two windows; nothing to evaluate");

  Evaluation ev;
  ev.dataset = meta.value("instrument", table.instrument_id);
  ev.algorithm = algorithm_name(ck.kind, ck.config.time_cell);
  ev.horizon = ck.config.q;
  const std::size_t q = ck.config.q;
  ev.actual.assign(samples.size() * q, 0.0);
  ev.predicted.assign(samples.size() * q, 0.0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const auto z = forward(make_example(s, ck.config), ck.params, ck.config, ck.kind);
    for (std::size_t h = 0; h < q; ++h) {
      const auto hi = static_cast<Eigen::Index>(h);
      ev.actual[h * samples.size() + i] = s.y(hi);
      ev.predicted[h * samples.size() + i] =
          denormalize(z(hi), s.target_scaling.mean, s.target_scaling.stddev);
    }
  }
  ev.report = evaluate_metrics(ev.actual, ev.predicted);
  return ev;
}

PairSpec parse_pair(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == text.size() ||
      text.find(':', colon + 1) != std::string_view::npos)
    throw ArgumentError("pair must look like BASELINE:VARIANT, got '" + std::string(text) + "'");
  return {std::string(text.substr(0, colon)), std::string(text.substr(colon + 1))};
}

PairwiseTest parse_pairwise_test(std::string_view name) {
  const auto n = lower(name);
  if (n == "t" || n == "paired_t" || n == "ttest") return PairwiseTest::PairedT;
  if (n == "wilcoxon" || n == "w") return PairwiseTest::Wilcoxon;
  if (n == "sign" || n == "s") return PairwiseTest::Sign;
  throw ArgumentError("unknown test '" + std::string(name) + "' (expected t, wilcoxon or sign)");
}

std::string_view to_string(PairwiseTest t) {
  switch (t) {
    case PairwiseTest::PairedT: return "paired_t";
    case PairwiseTest::Wilcoxon: return "wilcoxon";
    case PairwiseTest::Sign: return "sign";
  }
  return "?";
}

std::vector<PairwiseCell> compare(const std::vector<MetricsMatrix>& matrices,
                                  const std::vector<PairSpec>& pairs,
                                  const std::vector<PairwiseTest>& tests, double alpha) {
  std::vector<PairwiseCell> cells;
  for (const auto& m : matrices) {
    for (const auto& pair : pairs) {
      const auto base = m.column(m.column_index(pair.baseline));
      const auto var = m.column(m.column_index(pair.variant));
      for (auto test : tests) {
        PairwiseCell cell{m.metric, m.horizon, pair, test, {}, false};
        try {
          switch (test) {
            case PairwiseTest::PairedT: cell.result = paired_t(base, var, alpha); break;
            case PairwiseTest::Wilcoxon: cell.result = wilcoxon(base, var, alpha); break;
            case PairwiseTest::Sign: cell.result = sign_test(base, var, alpha); break;
          }
        } catch (const DegenerateError& e) {
          cell.degenerate = true;
          cell.result.test = std::string(to_string(test));
          cell.result.alpha = alpha;
          cell.result.statistic = std::nan("");
          cell.result.critical =
              test == PairwiseTest::PairedT
                  ? critical_value(Distribution::StudentT, 1.0 - alpha / 2.0,
                                   static_cast<double>(std::max<std::size_t>(base.size(), 2) - 1))
                  : critical_value(Distribution::Normal, 1.0 - alpha / 2.0);
          cell.result.decision = Decision::Accept;
          cell.result.warnings.push_back(std::string("degenerate: ") + e.what());
        }
        cells.push_back(std::move(cell));
      }
    }
  }
  return cells;
}

void write_pairwise_csv(std::ostream& out, const std::vector<PairwiseCell>& cells) {
  out << kReportCsvHeader << '\n';
  for (const auto& c : cells)
    write_report_row(out, c.metric, c.horizon, c.pair.baseline + ":" + c.pair.variant, c.result);
}

void write_pairwise_summary(std::ostream& out, const std::vector<PairwiseCell>& cells) {
  std::vector<PairwiseTest> tests;
  std::vector<std::string> metrics, pairs;
  auto add_unique = [](auto& v, const auto& x) {
    if (std::find(v.begin(), v.end(), x) == v.end()) v.push_back(x);
  };
  for (const auto& c : cells) {
    add_unique(tests, c.test);
    add_unique(metrics, c.metric);
    add_unique(pairs, c.pair.baseline + " -> " + c.pair.variant);
  }
  std::size_t width = 10;
  for (const auto& p : pairs) width = std::max(width, p.size() + 2);
  const auto w = static_cast<int>(width);

  std::ostringstream s;
  for (auto t : tests) {
    const PairwiseCell* any = nullptr;
    for (const auto& c : cells)
      if (c.test == t) any = &c;
    s << to_string(t) << " (critical " << std::setprecision(5) << any->result.critical << ")\n";
    s << std::left << std::setw(w) << "pair" << std::right;
    for (const auto& m : metrics) s << std::setw(10) << (m.empty() ? "metric" : m);
    s << '\n';
    for (const auto& p : pairs) {
      s << std::left << std::setw(w) << p << std::right;
      for (const auto& m : metrics) {
        std::string text = "-";
        for (const auto& c : cells)
          if (c.test == t && c.metric == m && c.pair.baseline + " -> " + c.pair.variant == p)
            text = c.degenerate ? "A(deg)" : format_cell(c.result.decision, c.result.statistic);
        s << std::setw(10) << text;
      }
      s << '\n';
    }
    s << '\n';
  }
  out << s.str();
}

RankReport rank(const MetricsMatrix& m, double alpha, std::optional<double> q_alpha) {
  RankReport r;
  r.table = rank_matrix(m);
  r.friedman = friedman(r.table, alpha);
  r.algorithms = m.algorithms;
  r.metric = m.metric;
  r.horizon = m.horizon;
  if (!q_alpha) {
    if (std::abs(alpha - 0.05) > 1e-12)
      throw ArgumentError("built-in Nemenyi q_alpha is for alpha = 0.05; pass q_alpha explicitly");
    q_alpha = nemenyi_q_alpha(m.cols());
  }
  std::vector<double> avg(r.table.average.data(), r.table.average.data() + r.table.average.size());
  r.nemenyi = nemenyi(avg, m.rows(), *q_alpha);
  return r;
}

void write_average_ranks_csv(std::ostream& out, const RankReport& r) {
  std::ostringstream s;
  s.precision(10);
  s << "algorithm,average_rank\n";
  for (std::size_t j = 0; j < r.algorithms.size(); ++j)
    s << r.algorithms[j] << ',' << r.table.average(static_cast<Eigen::Index>(j)) << '\n';
  out << s.str();
}

void write_rank_summary(std::ostream& out, const RankReport& r) {
  std::ostringstream s;
  const std::size_t k = r.algorithms.size();
  s << "Average ranks over N = " << r.table.datasets() << " datasets";
  if (!r.metric.empty()) s << " (" << r.metric << (r.horizon.empty() ? "" : ", horizon " + r.horizon) << ")";
  s << '\n';
  std::size_t width = 10;
  for (const auto& a : r.algorithms) width = std::max(width, a.size() + 2);
  for (std::size_t j = 0; j < k; ++j)
    s << std::left << std::setw(static_cast<int>(width)) << r.algorithms[j] << std::right << std::fixed
      << std::setprecision(2) << r.table.average(static_cast<Eigen::Index>(j)) << '\n';
  s << "\nFriedman chi2_F = " << std::setprecision(2) << r.friedman.statistic << ", critical "
    << std::setprecision(3) << r.friedman.critical << " (df " << k - 1 << ", alpha "
    << std::defaultfloat << r.friedman.alpha << "): " << format_cell(r.friedman.decision, r.friedman.statistic)
    << '\n';
  for (const auto& w : r.friedman.warnings) s << "warning: " << w << '\n';
  s << '\n';
  std::vector<double> avg(r.table.average.data(), r.table.average.data() + r.table.average.size());
  write_nemenyi_matrix(s, r.algorithms, avg, r.nemenyi);
  out << s.str();
}

}  // namespace vistat
