// vistat command-line tool: vg, normalize, train, evaluate, compare, rank.
//
// Every subcommand accepts --config <file.json>. Keys in that file use the
// long flag names with '-' replaced by '_'; a flag given on the command line
// always wins over the file.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vistat/error.hpp"
#include "vistat/metrics.hpp"
#include "vistat/pipeline.hpp"
#include "vistat/series.hpp"
#include "vistat/statcompare.hpp"
#include "vistat/tgmodel.hpp"
#include "vistat/visgraph.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace vistat;

namespace {

// Values from the JSON config, consulted only for options absent on the
// command line.
class ConfigFile {
 public:
  void load(const std::string& path, const std::vector<std::string>& allowed) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open config file " + path);
    try {
      data_ = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
    }
    if (!data_.is_object()) throw ConfigError("config file must hold a JSON object");
    for (const auto& [key, _] : data_.items())
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
        throw ConfigError("unknown config key '" + key + "'");
  }

  template <typename T>
  void overlay(const CLI::Option* opt, const std::string& key, T& target) const {
    if (opt->count() > 0 || !data_.contains(key)) return;
    try {
      target = data_[key].get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    }
  }

  bool has(const std::string& key) const { return data_.contains(key); }
  const json& at(const std::string& key) const { return data_.at(key); }

 private:
  json data_ = json::object();
};

std::vector<Column> parse_columns(const std::vector<std::string>& names) {
  std::vector<Column> out;
  for (const auto& n : names) out.push_back(parse_column(n));
  return out;
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != tok.size()) throw ArgumentError("cannot parse value '" + tok + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ArgumentError("empty --values list");
  return out;
}

// Collects an output either into a file (guarded) or onto stdout.
void emit(OutputGuard& guard, const std::string& path, const std::string& content) {
  if (path.empty() || path == "-")
    std::cout << content;
  else
    guard.write(path, content);
}

std::string option_key(const CLI::Option* o) {
  std::string name = o->get_name();
  while (!name.empty() && name.front() == '-') name.erase(name.begin());
  std::replace(name.begin(), name.end(), '-', '_');
  return name;
}

std::vector<std::string> config_keys(const CLI::App* sub, std::vector<std::string> extra = {}) {
  for (const auto* o : sub->get_options())
    if (!o->get_name().empty() && o->get_name() != "--help" && o->get_name() != "--config")
      extra.push_back(option_key(o));
  return extra;
}

// vg ----------------------------------------------------------------------

struct VgArgs {
  std::string config, input, values, column = "close", format = "edges", output = "-", degrees;
  std::size_t window = 0;
  long long end = -1;
  bool directed = false;
  std::string generate;
  std::size_t n = 100, k = 10;
  double p = 0.2;
  std::uint64_t seed = 0;
};

int run_vg(const CLI::App* sub, VgArgs a) {
  ConfigFile cfg;
  if (!a.config.empty()) cfg.load(a.config, config_keys(sub));
  cfg.overlay(sub->get_option("--input"), "input", a.input);
  cfg.overlay(sub->get_option("--values"), "values", a.values);
  cfg.overlay(sub->get_option("--column"), "column", a.column);
  cfg.overlay(sub->get_option("--window"), "window", a.window);
  cfg.overlay(sub->get_option("--end"), "end", a.end);
  cfg.overlay(sub->get_option("--directed"), "directed", a.directed);
  cfg.overlay(sub->get_option("--format"), "format", a.format);
  cfg.overlay(sub->get_option("--output"), "output", a.output);
  cfg.overlay(sub->get_option("--degrees"), "degrees", a.degrees);
  cfg.overlay(sub->get_option("--generate"), "generate", a.generate);
  cfg.overlay(sub->get_option("--n"), "n", a.n);
  cfg.overlay(sub->get_option("--k"), "k", a.k);
  cfg.overlay(sub->get_option("--p"), "p", a.p);
  cfg.overlay(sub->get_option("--seed"), "seed", a.seed);

  VisibilityGraph g(0, false);
  if (!a.generate.empty()) {
    if (a.generate == "regular")
      g = gen_regular(a.n, a.k);
    else if (a.generate == "random")
      g = gen_random(a.n, a.p, a.seed);
    else if (a.generate == "small-world")
      g = gen_small_world(a.n, a.k, a.p, a.seed);
    else
      throw ArgumentError("unknown generator '" + a.generate + "' (regular, random, small-world)");
  } else {
    std::vector<double> series;
    if (!a.values.empty() && !a.input.empty()) throw ArgumentError("give either --input or --values");
    if (!a.values.empty()) {
      series = parse_values(a.values);
    } else if (!a.input.empty()) {
      series = load_ohlcv(a.input).column(parse_column(a.column));
    } else {
      throw ArgumentError("vg needs --input, --values or --generate");
    }
    if (series.empty()) throw SchemaError("input series is empty");
    std::size_t stop = series.size();
    if (a.end >= 0) {
      if (static_cast<std::size_t>(a.end) >= series.size())
        throw ArgumentError("--end " + std::to_string(a.end) + " is past the last index " +
                            std::to_string(series.size() - 1));
      stop = static_cast<std::size_t>(a.end) + 1;
    }
    std::size_t start = 0;
    if (a.window > 0) {
      if (a.window > stop) throw ArgumentError("--window is longer than the available series");
      start = stop - a.window;
    }
    g = build_vg(std::span<const double>(series).subspan(start, stop - start), a.directed);
  }

  OutputGuard guard;
  std::ostringstream out;
  if (a.format == "edges")
    write_edge_list(out, g);
  else if (a.format == "dense")
    write_dense(out, g);
  else
    throw ArgumentError("unknown --format '" + a.format + "' (edges, dense)");
  emit(guard, a.output, out.str());

  if (!a.degrees.empty()) {
    const auto st = degree_stats(g);
    std::ostringstream d;
    d << "node,degree\n";
    for (std::size_t i = 0; i < st.degrees.size(); ++i) d << i << ',' << st.degrees[i] << '\n';
    emit(guard, a.degrees, d.str());
  }
  guard.commit();
  return 0;
}

// normalize ---------------------------------------------------------------

struct NormalizeArgs {
  std::string config, input, output = "-", dump_windows, target = "close";
  std::vector<std::string> columns = {"close"};
  std::size_t norm_window = kDefaultNormWindow, m = 16, horizon = 1;
};

int run_normalize(const CLI::App* sub, NormalizeArgs a) {
  ConfigFile cfg;
  if (!a.config.empty()) cfg.load(a.config, config_keys(sub));
  cfg.overlay(sub->get_option("--input"), "input", a.input);
  cfg.overlay(sub->get_option("--output"), "output", a.output);
  cfg.overlay(sub->get_option("--columns"), "columns", a.columns);
  cfg.overlay(sub->get_option("--norm-window"), "norm_window", a.norm_window);
  cfg.overlay(sub->get_option("--dump-windows"), "dump_windows", a.dump_windows);
  cfg.overlay(sub->get_option("--m"), "m", a.m);
  cfg.overlay(sub->get_option("--horizon"), "horizon", a.horizon);
  cfg.overlay(sub->get_option("--target"), "target", a.target);
  if (a.input.empty()) throw ArgumentError("normalize needs --input");

  const auto table = load_ohlcv(a.input);
  const auto cols = parse_columns(a.columns);
  if (cols.empty()) throw ArgumentError("no columns selected");
  std::vector<Normalized> norm;
  for (auto c : cols) norm.push_back(rolling_normalize(table.column(c), a.norm_window));

  std::ostringstream out;
  out.precision(17);
  out << "date";
  for (auto c : cols) out << ',' << column_name(c) << ',' << column_name(c) << "_mean," << column_name(c) << "_std";
  out << '\n';
  for (std::size_t i = 0; i < norm.front().values.size(); ++i) {
    out << table.dates[i + a.norm_window - 1];
    for (const auto& n : norm) out << ',' << n.values[i] << ',' << n.state.mean[i] << ',' << n.state.stddev[i];
    out << '\n';
  }

  OutputGuard guard;
  emit(guard, a.output, out.str());
  if (!a.dump_windows.empty()) {
    DatasetOptions opts;
    opts.norm_window = a.norm_window;
    opts.m = a.m;
    opts.q = a.horizon;
    opts.features = cols;
    opts.target = parse_column(a.target);
    const auto ds = prepare_dataset(table, opts);
    for (const auto& w : ds.warnings) std::cerr << "vistat: warning: " << w << '\n';
    const std::pair<const char*, const std::vector<WindowSample>*> parts[] = {
        {"train.csv", &ds.train}, {"val.csv", &ds.val}, {"test.csv", &ds.test}};
    for (const auto& [name, samples] : parts) {
      std::ostringstream w;
      write_windows_csv(w, *samples);
      guard.write(fs::path(a.dump_windows) / name, w.str());
    }
  }
  guard.commit();
  return 0;
}

// train -------------------------------------------------------------------

struct TrainArgs {
  std::string config, manifest, preset = "desk", model = "tg", cell, out_dir = ".", target = "close";
  std::vector<std::string> inputs, features = {"close"};
  std::size_t jobs = 1, horizon = 0, m = 0, norm_window = kDefaultNormWindow;
  std::size_t epochs = 0, patience = 0, batch_size = 0;
  double lr = 0.0, l2 = -1.0, dropout_rate = -1.0;
  bool skip = false;
  std::uint64_t seed = 0;
};

int run_train(const CLI::App* sub, TrainArgs a) {
  ConfigFile cfg;
  if (!a.config.empty()) cfg.load(a.config, config_keys(sub, {"model_config"}));
  cfg.overlay(sub->get_option("--input"), "input", a.inputs);
  cfg.overlay(sub->get_option("--manifest"), "manifest", a.manifest);
  cfg.overlay(sub->get_option("--jobs"), "jobs", a.jobs);
  cfg.overlay(sub->get_option("--preset"), "preset", a.preset);
  cfg.overlay(sub->get_option("--model"), "model", a.model);
  cfg.overlay(sub->get_option("--cell"), "cell", a.cell);
  cfg.overlay(sub->get_option("--out-dir"), "out_dir", a.out_dir);
  cfg.overlay(sub->get_option("--features"), "features", a.features);
  cfg.overlay(sub->get_option("--target"), "target", a.target);
  cfg.overlay(sub->get_option("--horizon"), "horizon", a.horizon);
  cfg.overlay(sub->get_option("--m"), "m", a.m);
  cfg.overlay(sub->get_option("--norm-window"), "norm_window", a.norm_window);
  cfg.overlay(sub->get_option("--epochs"), "epochs", a.epochs);
  cfg.overlay(sub->get_option("--patience"), "patience", a.patience);
  cfg.overlay(sub->get_option("--batch-size"), "batch_size", a.batch_size);
  cfg.overlay(sub->get_option("--lr"), "lr", a.lr);
  cfg.overlay(sub->get_option("--l2"), "l2", a.l2);
  cfg.overlay(sub->get_option("--dropout-rate"), "dropout_rate", a.dropout_rate);
  cfg.overlay(sub->get_option("--skip"), "skip", a.skip);

  // Seed: flag, then config, then VISTAT_SEED, then 0.
  if (sub->get_option("--seed")->count() == 0) {
    if (cfg.has("seed")) {
      a.seed = cfg.at("seed").get<std::uint64_t>();
    } else if (const char* env = std::getenv("VISTAT_SEED"); env && *env) {
      char* endp = nullptr;
      a.seed = std::strtoull(env, &endp, 10);
      if (*endp != '\0') throw ConfigError(std::string("VISTAT_SEED is not an integer: ") + env);
    }
  }

  RunConfig rc;
  rc.preset = a.preset;
  rc.model = preset(a.preset);
  if (cfg.has("model_config")) rc.model = config_from_json(cfg.at("model_config").dump(), rc.model);
  rc.kind = parse_model_kind(a.model);
  if (!a.cell.empty()) rc.model.time_cell = parse_time_cell(a.cell);
  if (a.epochs > 0) rc.model.max_epochs = a.epochs;
  if (a.patience > 0) rc.model.patience = a.patience;
  if (a.batch_size > 0) rc.model.batch_size = a.batch_size;
  if (a.lr > 0.0) rc.model.learning_rate = a.lr;
  if (a.l2 >= 0.0) rc.model.l2 = a.l2;
  if (a.dropout_rate >= 0.0) {
    rc.model.dropout_rate = a.dropout_rate;
    rc.model.dropout = a.dropout_rate > 0.0;
  }
  if (sub->get_option("--skip")->count() > 0 || cfg.has("skip")) rc.model.skip_layer = a.skip;
  rc.m = a.m > 0 ? a.m : rc.model.m;
  rc.horizon = a.horizon > 0 ? a.horizon : rc.model.q;
  rc.norm_window = a.norm_window;
  rc.features = parse_columns(a.features);
  rc.target = parse_column(a.target);
  rc.seed = a.seed;
  rc.out_dir = a.out_dir;
  for (const auto& p : a.inputs) rc.inputs.emplace_back(p);
  if (!a.manifest.empty())
    for (auto& p : read_manifest(a.manifest)) rc.inputs.push_back(std::move(p));
  rc.sync();
  rc.validate();

  for (const auto& art : train_all(rc, a.jobs)) {
    const auto& best = art.result.log[art.result.best_epoch];
    std::cout << art.checkpoint.string() << ": best epoch " << art.result.best_epoch << " of "
              << art.result.log.size() - 1 << ", val loss " << art.result.log.front().val_loss << " -> "
              << best.val_loss << (art.result.early_stopped ? " (early stop)" : "") << '\n';
  }
  return 0;
}

// evaluate ----------------------------------------------------------------

struct EvaluateArgs {
  std::string config, checkpoint, input, partition = "test", output = "-", dataset, algorithm,
      predictions;
  std::size_t horizon = 0;
  bool append = false;
};

int run_evaluate(const CLI::App* sub, EvaluateArgs a) {
  ConfigFile cfg;
  if (!a.config.empty()) cfg.load(a.config, config_keys(sub));
  cfg.overlay(sub->get_option("--checkpoint"), "checkpoint", a.checkpoint);
  cfg.overlay(sub->get_option("--input"), "input", a.input);
  cfg.overlay(sub->get_option("--partition"), "partition", a.partition);
  cfg.overlay(sub->get_option("--output"), "output", a.output);
  cfg.overlay(sub->get_option("--dataset"), "dataset", a.dataset);
  cfg.overlay(sub->get_option("--algorithm"), "algorithm", a.algorithm);
  cfg.overlay(sub->get_option("--predictions"), "predictions", a.predictions);
  cfg.overlay(sub->get_option("--horizon"), "horizon", a.horizon);
  cfg.overlay(sub->get_option("--append"), "append", a.append);
  if (a.checkpoint.empty() || a.input.empty()) throw ArgumentError("evaluate needs --checkpoint and --input");

  const auto ck = load_checkpoint(a.checkpoint);
  if (a.horizon > 0 && a.horizon != ck.config.q)
    throw DimensionError("checkpoint forecasts " + std::to_string(ck.config.q) +
                         " steps but --horizon is " + std::to_string(a.horizon));
  const auto table = load_ohlcv(a.input);
  auto ev = evaluate_checkpoint(ck, table, parse_partition(a.partition));
  if (!a.dataset.empty()) ev.dataset = a.dataset;
  if (!a.algorithm.empty()) ev.algorithm = a.algorithm;

  std::ostringstream row;
  write_metric_row(row, ev.dataset, ev.algorithm, ev.horizon, ev.report);
  OutputGuard guard;
  if (a.append && a.output != "-" && fs::exists(a.output)) {
    std::ofstream out(a.output, std::ios::app);
    if (!out) throw ArgumentError("cannot append to " + a.output);
    out << row.str();
  } else {
    emit(guard, a.output, std::string(kMetricCsvHeader) + "\n" + row.str());
  }
  if (!a.predictions.empty()) {
    std::ostringstream p;
    p.precision(17);
    p << "step,index,actual,predicted\n";
    const std::size_t per_step = ev.actual.size() / ev.horizon;
    for (std::size_t i = 0; i < ev.actual.size(); ++i)
      p << i / per_step + 1 << ',' << i % per_step << ',' << ev.actual[i] << ',' << ev.predicted[i] << '\n';
    emit(guard, a.predictions, p.str());
  }
  guard.commit();
  return 0;
}

// compare / rank ----------------------------------------------------------

struct CompareArgs {
  std::string config, output, summary = "-", horizon;
  std::vector<std::string> matrices, pairs, tests = {"t", "wilcoxon", "sign"};
  double alpha = 0.05;
};

std::vector<MetricsMatrix> load_matrices(const std::vector<std::string>& paths, const std::string& horizon) {
  std::vector<MetricsMatrix> out;
  for (const auto& p : paths) {
    std::ifstream in(p);
    if (!in) throw ArgumentError("cannot open metrics matrix " + p);
    out.push_back(read_metrics_matrix(in, fs::path(p).stem().string(), horizon));
  }
  return out;
}

int run_compare(const CLI::App* sub, CompareArgs a) {
  ConfigFile cfg;
  if (!a.config.empty()) cfg.load(a.config, config_keys(sub));
  cfg.overlay(sub->get_option("--matrix"), "matrix", a.matrices);
  cfg.overlay(sub->get_option("--pairs"), "pairs", a.pairs);
  cfg.overlay(sub->get_option("--tests"), "tests", a.tests);
  cfg.overlay(sub->get_option("--alpha"), "alpha", a.alpha);
  cfg.overlay(sub->get_option("--horizon"), "horizon", a.horizon);
  cfg.overlay(sub->get_option("--output"), "output", a.output);
  cfg.overlay(sub->get_option("--summary"), "summary", a.summary);
  if (a.matrices.empty()) throw ArgumentError("compare needs at least one --matrix");
  if (a.pairs.empty()) throw ArgumentError("compare needs at least one --pairs BASELINE:VARIANT");

  std::vector<PairSpec> pairs;
  for (const auto& p : a.pairs) pairs.push_back(parse_pair(p));
  std::vector<PairwiseTest> tests;
  for (const auto& t : a.tests) tests.push_back(parse_pairwise_test(t));
  const auto cells = compare(load_matrices(a.matrices, a.horizon), pairs, tests, a.alpha);

  OutputGuard guard;
  std::ostringstream csv, text;
  write_pairwise_csv(csv, cells);
  write_pairwise_summary(text, cells);
  for (const auto& c : cells) {
    if (c.result.warnings.empty()) continue;
    text << "warning: " << to_string(c.test) << ' ' << c.metric << ' ' << c.pair.baseline << ':'
         << c.pair.variant << ": ";
    for (std::size_t i = 0; i < c.result.warnings.size(); ++i) text << (i ? "; " : "") << c.result.warnings[i];
    text << '\n';
  }
  if (!a.output.empty()) emit(guard, a.output, csv.str());
  emit(guard, a.summary, text.str());
  guard.commit();
  return 0;
}

struct RankArgs {
  std::string config, matrix, output, ranks, summary = "-", horizon;
  double alpha = 0.05, q_alpha = 0.0;
};

int run_rank(const CLI::App* sub, RankArgs a) {
  ConfigFile cfg;
  if (!a.config.empty()) cfg.load(a.config, config_keys(sub));
  cfg.overlay(sub->get_option("--matrix"), "matrix", a.matrix);
  cfg.overlay(sub->get_option("--alpha"), "alpha", a.alpha);
  cfg.overlay(sub->get_option("--q-alpha"), "q_alpha", a.q_alpha);
  cfg.overlay(sub->get_option("--horizon"), "horizon", a.horizon);
  cfg.overlay(sub->get_option("--output"), "output", a.output);
  cfg.overlay(sub->get_option("--ranks"), "ranks", a.ranks);
  cfg.overlay(sub->get_option("--summary"), "summary", a.summary);
  if (a.matrix.empty()) throw ArgumentError("rank needs --matrix");

  const auto m = load_matrices({a.matrix}, a.horizon).front();
  const auto r = rank(m, a.alpha, a.q_alpha > 0.0 ? std::optional<double>(a.q_alpha) : std::nullopt);

  OutputGuard guard;
  if (!a.output.empty()) {
    std::ostringstream csv;
    csv << kReportCsvHeader << '\n';
    write_report_row(csv, m.metric, m.horizon, "all " + std::to_string(m.cols()) + " algorithms", r.friedman);
    emit(guard, a.output, csv.str());
  }
  if (!a.ranks.empty()) {
    std::ostringstream avg;
    write_average_ranks_csv(avg, r);
    emit(guard, a.ranks, avg.str());
  }
  std::ostringstream text;
  write_rank_summary(text, r);
  emit(guard, a.summary, text.str());
  guard.commit();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vistat: visibility-graph forecasting and statistical comparison of forecasters"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "vistat 0.1.0");

  VgArgs vg;
  auto* vg_cmd = app.add_subcommand("vg", "Build a natural visibility graph (or a synthetic graph)");
  vg_cmd->add_option("--config", vg.config, "JSON config file");
  vg_cmd->add_option("--input", vg.input, "OHLCV CSV file");
  vg_cmd->add_option("--values", vg.values, "Comma-separated series instead of --input");
  vg_cmd->add_option("--column", vg.column, "Column of --input to use");
  vg_cmd->add_option("--window", vg.window, "Use only the last m points ending at --end (0: full series)");
  vg_cmd->add_option("--end", vg.end, "Inclusive end index of the window (default: last)");
  vg_cmd->add_flag("--directed", vg.directed, "Left-to-right directed variant");
  vg_cmd->add_option("--format", vg.format, "edges or dense");
  vg_cmd->add_option("--output", vg.output, "Output path ('-' for stdout)");
  vg_cmd->add_option("--degrees", vg.degrees, "Also write node,degree CSV here");
  vg_cmd->add_option("--generate", vg.generate, "regular, random or small-world instead of a series");
  vg_cmd->add_option("--n", vg.n, "Generator node count");
  vg_cmd->add_option("--k", vg.k, "Generator degree / neighbours");
  vg_cmd->add_option("--p", vg.p, "Edge or rewiring probability");
  vg_cmd->add_option("--seed", vg.seed, "Generator seed");

  NormalizeArgs norm;
  auto* norm_cmd = app.add_subcommand("normalize", "Rolling-window normalization and optional window dump");
  norm_cmd->add_option("--config", norm.config, "JSON config file");
  norm_cmd->add_option("--input", norm.input, "OHLCV CSV file");
  norm_cmd->add_option("--columns", norm.columns, "Columns to normalize")->delimiter(',');
  norm_cmd->add_option("--norm-window", norm.norm_window, "Trailing window length w");
  norm_cmd->add_option("--output", norm.output, "Normalized CSV ('-' for stdout)");
  norm_cmd->add_option("--dump-windows", norm.dump_windows, "Directory for train/val/test window CSVs");
  norm_cmd->add_option("--m", norm.m, "Window length for --dump-windows");
  norm_cmd->add_option("--horizon", norm.horizon, "Forecast horizon q for --dump-windows");
  norm_cmd->add_option("--target", norm.target, "Target column for --dump-windows");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a baseline or time-geometric forecaster");
  train_cmd->add_option("--config", tr.config, "JSON config file");
  train_cmd->add_option("--input", tr.inputs, "OHLCV CSV file (repeatable)");
  train_cmd->add_option("--manifest", tr.manifest, "File listing one input CSV per line");
  train_cmd->add_option("--jobs", tr.jobs, "Instruments trained in parallel");
  train_cmd->add_option("--preset", tr.preset, "Hyperparameter preset")
      ->check(CLI::IsMember(preset_names()));
  train_cmd->add_option("--model", tr.model, "baseline or tg");
  train_cmd->add_option("--cell", tr.cell, "rnn or lstm (default: preset)");
  train_cmd->add_option("--out-dir", tr.out_dir, "Directory for checkpoint and log");
  train_cmd->add_option("--features", tr.features, "Feature columns")->delimiter(',');
  train_cmd->add_option("--target", tr.target, "Target column");
  train_cmd->add_option("--horizon", tr.horizon, "Forecast horizon q (default: preset)");
  train_cmd->add_option("--m", tr.m, "Window length (default: preset)");
  train_cmd->add_option("--norm-window", tr.norm_window, "Normalization window w");
  train_cmd->add_option("--seed", tr.seed, "Seed (fallback: config, then VISTAT_SEED, then 0)");
  train_cmd->add_option("--epochs", tr.epochs, "Maximum epochs");
  train_cmd->add_option("--patience", tr.patience, "Early-stopping patience");
  train_cmd->add_option("--batch-size", tr.batch_size, "Mini-batch size");
  train_cmd->add_option("--lr", tr.lr, "Adam learning rate");
  train_cmd->add_option("--l2", tr.l2, "L2 penalty weight");
  train_cmd->add_option("--dropout-rate", tr.dropout_rate, "Dropout rate for the fully connected stack");
  train_cmd->add_flag("--skip,!--no-skip", tr.skip, "Concatenate the input window before the FC stack");

  EvaluateArgs ev;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score a checkpoint on a partition");
  eval_cmd->add_option("--config", ev.config, "JSON config file");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint written by train");
  eval_cmd->add_option("--input", ev.input, "OHLCV CSV file");
  eval_cmd->add_option("--partition", ev.partition, "train, val or test");
  eval_cmd->add_option("--output", ev.output, "Metrics CSV ('-' for stdout)");
  eval_cmd->add_flag("--append", ev.append, "Append the row to an existing --output");
  eval_cmd->add_option("--dataset", ev.dataset, "Dataset label (default: instrument)");
  eval_cmd->add_option("--algorithm", ev.algorithm, "Algorithm label (default: model-cell)");
  eval_cmd->add_option("--horizon", ev.horizon, "Expected horizon; must match the checkpoint");
  eval_cmd->add_option("--predictions", ev.predictions, "Also write step,index,actual,predicted CSV");

  CompareArgs cmp;
  auto* cmp_cmd = app.add_subcommand("compare", "Paired t, Wilcoxon and sign tests between algorithm pairs");
  cmp_cmd->add_option("--config", cmp.config, "JSON config file");
  cmp_cmd->add_option("--matrix", cmp.matrices, "Metrics matrix CSV; the file stem names the metric (repeatable)");
  cmp_cmd->add_option("--pairs", cmp.pairs, "BASELINE:VARIANT (repeatable)");
  cmp_cmd->add_option("--tests", cmp.tests, "Subset of t,wilcoxon,sign")->delimiter(',');
  cmp_cmd->add_option("--alpha", cmp.alpha, "Significance level");
  cmp_cmd->add_option("--horizon", cmp.horizon, "Horizon label for the report");
  cmp_cmd->add_option("--output", cmp.output, "Report CSV");
  cmp_cmd->add_option("--summary", cmp.summary, "Plain-text grid ('-' for stdout)");

  RankArgs rk;
  auto* rank_cmd = app.add_subcommand("rank", "Average ranks, Friedman test and Nemenyi matrix");
  rank_cmd->add_option("--config", rk.config, "JSON config file");
  rank_cmd->add_option("--matrix", rk.matrix, "Metrics matrix CSV");
  rank_cmd->add_option("--alpha", rk.alpha, "Significance level");
  rank_cmd->add_option("--q-alpha", rk.q_alpha, "Nemenyi q_alpha (default: built-in table, alpha 0.05)");
  rank_cmd->add_option("--horizon", rk.horizon, "Horizon label for the report");
  rank_cmd->add_option("--output", rk.output, "Report CSV with the Friedman row");
  rank_cmd->add_option("--ranks", rk.ranks, "Average-rank CSV");
  rank_cmd->add_option("--summary", rk.summary, "Plain-text report ('-' for stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (vg_cmd->parsed()) return run_vg(vg_cmd, vg);
    if (norm_cmd->parsed()) return run_normalize(norm_cmd, norm);
    if (train_cmd->parsed()) return run_train(train_cmd, tr);
    if (eval_cmd->parsed()) return run_evaluate(eval_cmd, ev);
    if (cmp_cmd->parsed()) return run_compare(cmp_cmd, cmp);
    if (rank_cmd->parsed()) return run_rank(rank_cmd, rk);
  } catch (const Error& e) {
    std::cerr << "vistat: error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const json::exception& e) {
    std::cerr << "vistat: error: " << e.what() << '\n';
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "vistat: error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "vistat: internal error: " << e.what() << '\n';
    return 4;
  }
  return 4;
}
