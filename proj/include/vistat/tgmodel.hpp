#pragma once

// Time-Geometric forecaster: a recurrent time component and a GCN + LSTM
// geometric component whose m x F' pattern matrices are summed and fed to a
// fixed 128/64/32/16 fully connected stack with a linear q-output head.
// The baseline drops the geometric component entirely.
//
// Gradients are hand-derived (reverse mode, BPTT for the recurrent cells).

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "vistat/series.hpp"

namespace vistat {

enum class Activation { Relu, Elu, Selu, LeakyRelu, Identity };
enum class TimeCell { Rnn, Lstm };
enum class ModelKind { Baseline, TimeGeometric };

Activation parse_activation(std::string_view name);
std::string_view to_string(Activation a);
TimeCell parse_time_cell(std::string_view name);
std::string_view to_string(TimeCell c);
ModelKind parse_model_kind(std::string_view name);
std::string_view to_string(ModelKind k);

double activate(Activation a, double z);
/// Derivative with respect to the pre-activation z.
double activate_derivative(Activation a, double z);

struct TgConfig {
  std::size_t m = 16;         // window length
  std::size_t q = 1;          // forecast horizon
  std::size_t features = 1;   // F'

  TimeCell time_cell = TimeCell::Rnn;
  std::size_t time_layers = 1;   // L
  std::size_t time_hidden = 16;

  std::size_t gcn_layers = 1;    // L'
  std::size_t gcn_hidden = 8;
  std::size_t geo_lstm_hidden = 8;
  bool directed_graph = false;

  std::vector<std::size_t> fc_widths = {128, 64, 32, 16};

  Activation activation = Activation::Elu;      // phi: time projection and FC stack
  Activation gcn_activation = Activation::Elu;  // rho
  bool skip_layer = false;
  bool dropout = false;
  double dropout_rate = 0.0;

  double learning_rate = 1e-3;
  double l2 = 0.0;
  std::size_t max_epochs = 1000;
  std::size_t patience = 20;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;

  /// Throws ConfigError on any violated invariant.
  void validate() const;
};

/// Named hyperparameter presets. "desk" is the small default; the
/// "tuned-<cell>-<h>d" presets carry tuned RNN/LSTM settings for
/// horizons 1, 5 and 20.
TgConfig preset(std::string_view name);
std::vector<std::string> preset_names();

struct Parameter {
  std::string name;
  Eigen::MatrixXd value;
  bool penalized = true;  // weights are L2-penalized, biases are not
};

/// Ordered collection of named parameter arrays.
class ParamSet {
 public:
  Eigen::MatrixXd& add(std::string name, Eigen::Index rows, Eigen::Index cols, bool penalized);

  bool contains(std::string_view name) const;
  Eigen::MatrixXd& operator[](std::string_view name);
  const Eigen::MatrixXd& operator[](std::string_view name) const;

  std::vector<Parameter>& entries() { return entries_; }
  const std::vector<Parameter>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;

  ParamSet zeros_like() const;
  void set_zero();
  /// this += scale * other (same layout required).
  void add_scaled(const ParamSet& other, double scale);
  bool all_finite() const;

  friend bool operator==(const ParamSet& a, const ParamSet& b);

 private:
  std::size_t index(std::string_view name) const;
  std::vector<Parameter> entries_;
  std::unordered_map<std::string, std::size_t> lookup_;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
ParamSet init_params(const TgConfig& cfg, ModelKind kind, std::uint64_t seed);

/// Model-ready sample: features, normalized adjacency and scaled target.
struct Example {
  Eigen::MatrixXd x;       // m x F'
  Eigen::MatrixXd a_hat;   // m x m, empty for baseline-only use
  Eigen::VectorXd target;  // q, on the model scale
};

/// D^-1/2 (A + I) D^-1/2 for a symmetric 0/1 adjacency with zero diagonal.
Eigen::MatrixXd normalize_adjacency(const Eigen::MatrixXd& a);

/// Builds the visibility graph of the raw target window (symmetrized when
/// directed), normalizes it and scales y with the sample's anchor stats.
Example make_example(const WindowSample& s, const TgConfig& cfg);
std::vector<Example> make_examples(std::span<const WindowSample> samples, const TgConfig& cfg);

Eigen::MatrixXd gcn_layer(const Eigen::MatrixXd& a_hat, const Eigen::MatrixXd& h,
                          const Eigen::MatrixXd& theta, Activation rho);

Eigen::MatrixXd time_component_forward(const Eigen::MatrixXd& x, const ParamSet& p,
                                       const TgConfig& cfg);
Eigen::MatrixXd geometric_component_forward(const Eigen::MatrixXd& a_hat, const Eigen::MatrixXd& x,
                                            const ParamSet& p, const TgConfig& cfg);
Eigen::VectorXd fc_component_forward(const Eigen::MatrixXd& time_pattern,
                                     const Eigen::MatrixXd& graph_pattern,
                                     const Eigen::MatrixXd& x, const ParamSet& p,
                                     const TgConfig& cfg);

Eigen::VectorXd tg_forward(const Example& ex, const ParamSet& p, const TgConfig& cfg);
Eigen::VectorXd baseline_forward(const Example& ex, const ParamSet& p, const TgConfig& cfg);
/// Dispatches on kind. Evaluation mode (no dropout).
Eigen::VectorXd forward(const Example& ex, const ParamSet& p, const TgConfig& cfg, ModelKind kind);

/// (1/q) sum (yhat - y)^2 + l2 * sum of squared penalized weights.
double loss(const Eigen::VectorXd& yhat, const Eigen::VectorXd& y, const ParamSet& p, double l2);
double penalty(const ParamSet& p);

struct GradientResult {
  double loss = 0.0;
  ParamSet grads;
};

/// Exact reverse-mode gradient of `loss` for one example. Dropout masks are
/// drawn from `rng` when provided and cfg.dropout is set; otherwise the pass
/// is deterministic. Throws NumericalError naming the first non-finite entry.
GradientResult gradients(const Example& ex, const ParamSet& p, const TgConfig& cfg, ModelKind kind,
                         std::mt19937_64* rng = nullptr);

/// Mean loss and mean gradient over a batch (penalty counted once).
GradientResult batch_gradients(std::span<const Example> batch, std::span<const std::size_t> idx,
                               const ParamSet& p, const TgConfig& cfg, ModelKind kind,
                               std::mt19937_64* rng = nullptr);

struct AdamState {
  std::vector<Eigen::MatrixXd> first;
  std::vector<Eigen::MatrixXd> second;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_params(const ParamSet& p);
};

void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state, double lr);

struct EpochRecord {
  std::size_t epoch = 0;  // 0 = before any update
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  ParamSet params;        // from the best validation epoch
  std::vector<EpochRecord> log;
  std::size_t best_epoch = 0;
  bool early_stopped = false;
};

/// Mean squared error (no penalty) over the examples in evaluation mode.
double mean_mse(std::span<const Example> data, const ParamSet& p, const TgConfig& cfg,
                ModelKind kind);

TrainResult train(std::span<const Example> train_set, std::span<const Example> val_set,
                  const TgConfig& cfg, ModelKind kind);

void write_training_log(std::ostream& out, std::span<const EpochRecord> log);

struct Checkpoint {
  ModelKind kind = ModelKind::TimeGeometric;
  TgConfig config;
  std::string metadata;  // single-line JSON object with run metadata
  ParamSet params;
};

/// Text checkpoint: header, config echo, metadata, then one
/// `param <name> <rows> <cols> <penalized>` line per array followed by its
/// rows of %.17g values.
void write_checkpoint(std::ostream& out, const Checkpoint& ck);
Checkpoint read_checkpoint(std::istream& in);

std::string config_to_json(const TgConfig& cfg);
/// Overlays keys of a JSON object onto `base`. Unknown keys throw ConfigError.
TgConfig config_from_json(std::string_view json, TgConfig base = {});

}  // namespace vistat
