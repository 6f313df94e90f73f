#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "vistat/error.hpp"
#include "vistat/tgmodel.hpp"

namespace vistat {

AdamState AdamState::for_params(const ParamSet& p) {
  AdamState s;
  for (const auto& e : p.entries()) {
    s.first.push_back(Eigen::MatrixXd::Zero(e.value.rows(), e.value.cols()));
    s.second.push_back(Eigen::MatrixXd::Zero(e.value.rows(), e.value.cols()));
  }
  return s;
}

void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state, double lr) {
  if (grads.size() != params.size() || state.first.size() != params.size())
    throw DimensionError("Adam: parameter, gradient and state layouts differ");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& w = params.entries()[i].value;
    const auto& g = grads.entries()[i].value;
    auto& m = state.first[i];
    auto& v = state.second[i];
    if (g.rows() != w.rows() || g.cols() != w.cols())
      throw DimensionError("Adam: gradient shape differs for " + params.entries()[i].name);
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseAbs2();
    w.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.eps);
  }
}

double mean_mse(std::span<const Example> data, const ParamSet& p, const TgConfig& cfg,
                ModelKind kind) {
  if (data.empty()) return 0.0;
  double s = 0.0;
  for (const auto& ex : data) s += loss(forward(ex, p, cfg, kind), ex.target, p, 0.0);
  return s / static_cast<double>(data.size());
}

TrainResult train(std::span<const Example> train_set, std::span<const Example> val_set,
                  const TgConfig& cfg, ModelKind kind) {
  cfg.validate();
  if (train_set.empty() || val_set.empty())
    throw ConfigError("training needs nonempty train and validation partitions");

  TrainResult r;
  ParamSet params = init_params(cfg, kind, cfg.seed);
  AdamState adam = AdamState::for_params(params);
  // Shuffling and dropout draw from a stream separate from initialization.
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  r.log.push_back({0, mean_mse(train_set, params, cfg, kind), mean_mse(val_set, params, cfg, kind)});
  r.params = params;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::size_t> batch(order.data() + start, stop - start);
      const auto g = batch_gradients(train_set, batch, params, cfg, kind, &rng);
      adam_step(params, g.grads, adam, cfg.learning_rate);
    }
    const double train_loss = mean_mse(train_set, params, cfg, kind);
    const double val_loss = mean_mse(val_set, params, cfg, kind);
    if (!std::isfinite(train_loss) || !std::isfinite(val_loss))
      throw NumericalError("training diverged at epoch " + std::to_string(epoch));
    r.log.push_back({epoch, train_loss, val_loss});
    if (val_loss < best) {
      best = val_loss;
      stale = 0;
      r.best_epoch = epoch;
      r.params = params;
    } else if (++stale >= cfg.patience) {
      r.early_stopped = true;
      break;
    }
  }
  return r;
}

void write_training_log(std::ostream& out, std::span<const EpochRecord> log) {
  std::ostringstream s;
  s.precision(17);
  s << "epoch,train_loss,val_loss\n";
  for (const auto& e : log) s << e.epoch << ',' << e.train_loss << ',' << e.val_loss << '\n';
  out << s.str();
}

namespace {

constexpr const char* kCheckpointMagic = "vistat-checkpoint 1";

std::string expect_line(std::istream& in, std::string_view prefix) {
  std::string line;
  if (!std::getline(in, line) || line.rfind(prefix, 0) != 0)
    throw SchemaError("checkpoint: expected '" + std::string(prefix) + "' line");
  return line.substr(prefix.size());
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ck) {
  std::ostringstream s;
  s.precision(17);
  s << kCheckpointMagic << '\n';
  s << "model " << to_string(ck.kind) << '\n';
  s << "config " << config_to_json(ck.config) << '\n';
  s << "meta " << (ck.metadata.empty() ? "{}" : ck.metadata) << '\n';
  s << "params " << ck.params.size() << '\n';
  for (const auto& e : ck.params.entries()) {
    s << "param " << e.name << ' ' << e.value.rows() << ' ' << e.value.cols() << ' '
      << (e.penalized ? 1 : 0) << '\n';
    for (Eigen::Index r = 0; r < e.value.rows(); ++r) {
      for (Eigen::Index c = 0; c < e.value.cols(); ++c) s << (c ? " " : "") << e.value(r, c);
      s << '\n';
    }
  }
  s << "end\n";
  out << s.str();
}

Checkpoint read_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCheckpointMagic)
    throw SchemaError("not a vistat checkpoint");
  Checkpoint ck;
  ck.kind = parse_model_kind(expect_line(in, "model "));
  ck.config = config_from_json(expect_line(in, "config "));
  ck.metadata = expect_line(in, "meta ");
  const auto count = std::stoul(expect_line(in, "params "));
  for (std::size_t i = 0; i < count; ++i) {
    std::istringstream header(expect_line(in, "param "));
    std::string name;
    Eigen::Index rows = 0, cols = 0;
    int penalized = 0;
    if (!(header >> name >> rows >> cols >> penalized) || rows < 0 || cols < 0)
      throw SchemaError("checkpoint: malformed param header");
    auto& value = ck.params.add(name, rows, cols, penalized != 0);
    for (Eigen::Index r = 0; r < rows; ++r) {
      if (!std::getline(in, line)) throw SchemaError("checkpoint: truncated values for " + name);
      std::istringstream vals(line);
      for (Eigen::Index c = 0; c < cols; ++c)
        if (!(vals >> value(r, c))) throw SchemaError("checkpoint: bad value in " + name);
    }
  }
  if (!std::getline(in, line) || line != "end") throw SchemaError("checkpoint: missing end marker");
  // Layout must match what the config would produce.
  const auto expected = init_params(ck.config, ck.kind, 0);
  if (expected.size() != ck.params.size())
    throw SchemaError("checkpoint: parameter set does not match its config");
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& a = expected.entries()[i];
    const auto& b = ck.params.entries()[i];
    if (a.name != b.name || a.value.rows() != b.value.rows() || a.value.cols() != b.value.cols())
      throw SchemaError("checkpoint: parameter " + b.name + " does not match its config");
  }
  return ck;
}

}  // namespace vistat
