#include <pybind11/eigen.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>

#include "vistat/error.hpp"
#include "vistat/metrics.hpp"
#include "vistat/pipeline.hpp"
#include "vistat/series.hpp"
#include "vistat/statcompare.hpp"
#include "vistat/tgmodel.hpp"
#include "vistat/visgraph.hpp"

namespace py = pybind11;
using namespace vistat;

namespace {

py::dict test_dict(const TestResult& r) {
  py::dict d;
  d["test"] = r.test;
  d["statistic"] = r.statistic;
  d["critical"] = r.critical;
  d["decision"] = std::string(to_string(r.decision));
  d["alpha"] = r.alpha;
  d["warnings"] = r.warnings;
  return d;
}

py::dict metric_dict(const MetricReport& r) {
  py::dict d;
  d["rmse"] = r.rmse;
  d["mae"] = r.mae;
  d["mape"] = r.mape;
  d["mase"] = r.mase;
  d["M"] = r.count;
  return d;
}

MetricsMatrix matrix_from(const Eigen::MatrixXd& values, std::vector<std::string> algorithms) {
  MetricsMatrix m;
  m.values = values;
  if (algorithms.empty())
    for (Eigen::Index j = 0; j < values.cols(); ++j) algorithms.push_back("A" + std::to_string(j));
  if (algorithms.size() != static_cast<std::size_t>(values.cols()))
    throw DimensionError("algorithm names do not match the matrix width");
  m.algorithms = std::move(algorithms);
  for (Eigen::Index u = 0; u < values.rows(); ++u) m.datasets.push_back("D" + std::to_string(u));
  return m;
}

}  // namespace

PYBIND11_MODULE(_vistat, m) {
  m.doc() = "Visibility graphs, time-geometric forecasting, forecast metrics and comparison tests";

  static py::exception<Error> base_error(m, "VistatError");
  static py::exception<Error> input_error(m, "InputError", base_error.ptr());
  static py::exception<Error> domain_error(m, "DegenerateError", base_error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      switch (e.kind()) {
        case ErrorKind::Input: PyErr_SetString(input_error.ptr(), e.what()); break;
        case ErrorKind::Domain: PyErr_SetString(domain_error.ptr(), e.what()); break;
        case ErrorKind::Internal: PyErr_SetString(base_error.ptr(), e.what()); break;
      }
    }
  });

  // Visibility graphs
  py::class_<VisibilityGraph>(m, "VisibilityGraph")
      .def(py::init<std::size_t, bool>(), py::arg("n"), py::arg("directed") = false)
      .def_property_readonly("size", &VisibilityGraph::size)
      .def_property_readonly("directed", &VisibilityGraph::directed)
      .def("has_edge", &VisibilityGraph::has_edge)
      .def("edges", &VisibilityGraph::edges)
      .def("edge_count", &VisibilityGraph::edge_count)
      .def("dense", &VisibilityGraph::dense)
      .def("symmetrized", &VisibilityGraph::symmetrized)
      .def(py::self == py::self)
      .def("__repr__", [](const VisibilityGraph& g) {
        return "<VisibilityGraph n=" + std::to_string(g.size()) + " edges=" + std::to_string(g.edge_count()) +
               (g.directed() ? " directed>" : ">");
      });

  m.def("build_vg", [](const std::vector<double>& s, bool directed) { return build_vg(s, directed); },
        py::arg("series"), py::arg("directed") = false);
  m.def("build_vg_bruteforce",
        [](const std::vector<double>& s, bool directed) { return build_vg_bruteforce(s, directed); },
        py::arg("series"), py::arg("directed") = false);
  m.def("is_visible", [](const std::vector<double>& s, std::size_t i, std::size_t j) { return is_visible(s, i, j); });
  m.def("degree_stats", [](const VisibilityGraph& g) {
    const auto st = degree_stats(g);
    py::dict d;
    d["degrees"] = st.degrees;
    d["mean"] = st.mean;
    d["variance"] = st.variance;
    d["histogram"] = st.histogram;
    return d;
  });
  m.def("is_connected", &is_connected);
  m.def("gen_regular", &gen_regular, py::arg("n"), py::arg("k"));
  m.def("gen_random", &gen_random, py::arg("n"), py::arg("p"), py::arg("seed"));
  m.def("gen_small_world", &gen_small_world, py::arg("n"), py::arg("k"), py::arg("p"), py::arg("seed"));

  // Series handling
  m.def("load_ohlcv", [](const std::filesystem::path& path) {
    const auto t = load_ohlcv(path);
    py::dict d;
    d["instrument"] = t.instrument_id;
    d["date"] = t.dates;
    for (auto c : {Column::Open, Column::High, Column::Low, Column::Close, Column::Volume})
      d[py::str(std::string(column_name(c)))] = t.column(c);
    return d;
  });
  m.def(
      "rolling_normalize",
      [](const std::vector<double>& s, std::size_t w) {
        const auto n = rolling_normalize(s, w);
        return py::make_tuple(n.values, n.state.mean, n.state.stddev);
      },
      py::arg("series"), py::arg("window") = kDefaultNormWindow,
      "Returns (normalized, mean, std) for the retained positions.");
  m.def("denormalize", &denormalize, py::arg("z"), py::arg("mean"), py::arg("std"));
  m.def(
      "split",
      [](std::size_t length, double train, double val, double test) {
        const auto p = split(length, {train, val, test});
        auto pair = [](const IndexRange& r) { return py::make_tuple(r.begin, r.end); };
        return py::make_tuple(pair(p.train), pair(p.val), pair(p.test));
      },
      py::arg("length"), py::arg("train") = 0.6, py::arg("val") = 0.2, py::arg("test") = 0.2);

  // Metrics
  m.def("rmse", [](const std::vector<double>& y, const std::vector<double>& f) { return rmse(y, f); });
  m.def("mae", [](const std::vector<double>& y, const std::vector<double>& f) { return mae(y, f); });
  m.def("mape", [](const std::vector<double>& y, const std::vector<double>& f) { return mape(y, f); });
  m.def("mase", [](const std::vector<double>& y, const std::vector<double>& f) { return mase(y, f); });
  m.def("evaluate_metrics", [](const std::vector<double>& y, const std::vector<double>& f) {
    return metric_dict(evaluate_metrics(y, f));
  });

  // Statistical comparison
  m.def(
      "paired_t",
      [](const std::vector<double>& b, const std::vector<double>& v, double alpha) {
        const auto r = paired_t(b, v, alpha);
        auto d = test_dict(r);
        d["mean_difference"] = r.mean_difference;
        d["df"] = r.df;
        return d;
      },
      py::arg("baseline"), py::arg("variant"), py::arg("alpha") = 0.05);
  m.def(
      "wilcoxon",
      [](const std::vector<double>& b, const std::vector<double>& v, double alpha) {
        const auto r = wilcoxon(b, v, alpha);
        auto d = test_dict(r);
        d["rank_sum_variant_better"] = r.rank_sum_variant_better;
        d["rank_sum_baseline_better"] = r.rank_sum_baseline_better;
        return d;
      },
      py::arg("baseline"), py::arg("variant"), py::arg("alpha") = 0.05);
  m.def(
      "sign_test",
      [](const std::vector<double>& b, const std::vector<double>& v, double alpha, const std::string& method) {
        const auto mth = method == "exact" ? SignMethod::Exact : method == "normal" ? SignMethod::Normal
                                                                                     : SignMethod::Auto;
        const auto r = sign_test(b, v, alpha, mth);
        auto d = test_dict(r);
        d["wins"] = r.wins;
        d["n"] = r.n;
        d["exact"] = r.exact;
        return d;
      },
      py::arg("baseline"), py::arg("variant"), py::arg("alpha") = 0.05, py::arg("method") = "auto");
  m.def("rank_row", [](const std::vector<double>& row) { return rank_row(row); });
  m.def(
      "rank_matrix",
      [](const Eigen::MatrixXd& values) {
        const auto t = rank_matrix(matrix_from(values, {}));
        return py::make_tuple(t.ranks, t.average);
      },
      py::arg("values"), "Per-row ranks (lower value ranks first) and column averages.");
  m.def(
      "friedman",
      [](const std::vector<double>& avg, std::size_t n, double alpha) { return test_dict(friedman(avg, n, alpha)); },
      py::arg("average_ranks"), py::arg("n_datasets"), py::arg("alpha") = 0.05);
  m.def(
      "nemenyi",
      [](const std::vector<double>& avg, std::size_t n, std::optional<double> q) {
        const auto r = nemenyi(avg, n, q ? *q : nemenyi_q_alpha(avg.size()));
        py::dict d;
        d["critical_difference"] = r.critical_difference;
        d["q_alpha"] = r.q_alpha;
        d["significant"] = r.significant;
        return d;
      },
      py::arg("average_ranks"), py::arg("n_datasets"), py::arg("q_alpha") = py::none());
  m.def("nemenyi_q_alpha", &nemenyi_q_alpha);
  m.def(
      "critical_value",
      [](const std::string& dist, double quantile, double df) {
        const auto d = dist == "t" ? Distribution::StudentT : dist == "chi2" ? Distribution::ChiSquared
                                                                              : Distribution::Normal;
        if (dist != "t" && dist != "chi2" && dist != "normal")
          throw ArgumentError("distribution must be 't', 'chi2' or 'normal'");
        return critical_value(d, quantile, df);
      },
      py::arg("distribution"), py::arg("quantile"), py::arg("df") = 1.0);

  // Training and evaluation
  m.def("presets", &preset_names);
  m.def("preset_config", [](const std::string& name) { return config_to_json(preset(name)); });
  m.def(
      "train",
      [](const std::vector<std::filesystem::path>& inputs, const std::filesystem::path& out_dir,
         const std::string& model, std::optional<std::string> cell, const std::string& preset_name,
         std::optional<std::size_t> horizon, std::optional<std::size_t> window, std::size_t norm_window,
         std::uint64_t seed, std::optional<std::size_t> epochs, std::optional<std::string> model_config,
         std::size_t jobs) {
        RunConfig rc;
        rc.inputs = inputs;
        rc.out_dir = out_dir;
        rc.preset = preset_name;
        rc.model = preset(preset_name);
        if (model_config) rc.model = config_from_json(*model_config, rc.model);
        rc.kind = parse_model_kind(model);
        if (cell) rc.model.time_cell = parse_time_cell(*cell);
        if (epochs) rc.model.max_epochs = *epochs;
        rc.m = window.value_or(rc.model.m);
        rc.horizon = horizon.value_or(rc.model.q);
        rc.norm_window = norm_window;
        rc.seed = seed;
        rc.sync();
        rc.validate();
        std::vector<TrainArtifacts> arts;
        {
          py::gil_scoped_release release;
          arts = train_all(rc, jobs);
        }
        py::list out;
        for (const auto& a : arts) {
          py::dict d;
          d["checkpoint"] = a.checkpoint;
          d["log"] = a.log;
          d["best_epoch"] = a.result.best_epoch;
          d["early_stopped"] = a.result.early_stopped;
          py::list rows;
          for (const auto& e : a.result.log) rows.append(py::make_tuple(e.epoch, e.train_loss, e.val_loss));
          d["history"] = rows;
          d["metadata"] = a.metadata;
          out.append(d);
        }
        return out;
      },
      py::arg("inputs"), py::arg("out_dir"), py::arg("model") = "tg", py::arg("cell") = py::none(),
      py::arg("preset") = "desk", py::arg("horizon") = py::none(), py::arg("m") = py::none(),
      py::arg("norm_window") = kDefaultNormWindow, py::arg("seed") = 0, py::arg("epochs") = py::none(),
      py::arg("model_config") = py::none(), py::arg("jobs") = 1);
  m.def(
      "evaluate",
      [](const std::filesystem::path& checkpoint, const std::filesystem::path& input, const std::string& part) {
        const auto ev = evaluate_checkpoint(load_checkpoint(checkpoint), load_ohlcv(input), parse_partition(part));
        auto d = metric_dict(ev.report);
        d["dataset"] = ev.dataset;
        d["algorithm"] = ev.algorithm;
        d["horizon"] = ev.horizon;
        d["actual"] = ev.actual;
        d["predicted"] = ev.predicted;
        return d;
      },
      py::arg("checkpoint"), py::arg("input"), py::arg("partition") = "test");
}
