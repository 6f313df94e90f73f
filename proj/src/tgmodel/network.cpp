#include <cmath>
#include <string>

#include "vistat/error.hpp"
#include "vistat/tgmodel.hpp"
#include "vistat/visgraph.hpp"

namespace vistat {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// ParamSet

MatrixXd& ParamSet::add(std::string name, Index rows, Index cols, bool penalized) {
  if (lookup_.count(name)) throw InvariantError("duplicate parameter " + name);
  lookup_.emplace(name, entries_.size());
  entries_.push_back({std::move(name), MatrixXd::Zero(rows, cols), penalized});
  return entries_.back().value;
}

std::size_t ParamSet::index(std::string_view name) const {
  const auto it = lookup_.find(std::string(name));
  if (it == lookup_.end()) throw InvariantError("missing parameter " + std::string(name));
  return it->second;
}

bool ParamSet::contains(std::string_view name) const {
  return lookup_.count(std::string(name)) != 0;
}

MatrixXd& ParamSet::operator[](std::string_view name) { return entries_[index(name)].value; }

const MatrixXd& ParamSet::operator[](std::string_view name) const {
  return entries_[index(name)].value;
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += static_cast<std::size_t>(e.value.size());
  return n;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out;
  for (const auto& e : entries_) out.add(e.name, e.value.rows(), e.value.cols(), e.penalized);
  return out;
}

void ParamSet::set_zero() {
  for (auto& e : entries_) e.value.setZero();
}

void ParamSet::add_scaled(const ParamSet& other, double scale) {
  if (other.entries_.size() != entries_.size()) throw InvariantError("parameter layouts differ");
  for (std::size_t i = 0; i < entries_.size(); ++i) entries_[i].value += scale * other.entries_[i].value;
}

bool ParamSet::all_finite() const {
  for (const auto& e : entries_)
    if (!e.value.allFinite()) return false;
  return true;
}

bool operator==(const ParamSet& a, const ParamSet& b) {
  if (a.entries_.size() != b.entries_.size()) return false;
  for (std::size_t i = 0; i < a.entries_.size(); ++i) {
    const auto& x = a.entries_[i];
    const auto& y = b.entries_[i];
    if (x.name != y.name || x.penalized != y.penalized || x.value.rows() != y.value.rows() ||
        x.value.cols() != y.value.cols() || x.value != y.value)
      return false;
  }
  return true;
}

namespace {

std::string time_name(std::size_t layer, const char* what) {
  return "time.l" + std::to_string(layer) + "." + what;
}

std::string gcn_name(std::size_t layer) { return "geo.gcn" + std::to_string(layer) + ".theta"; }

std::string fc_name(std::size_t layer, const char* what) {
  return "fc" + std::to_string(layer) + "." + what;
}

Index gate_rows(TimeCell cell, std::size_t hidden) {
  return static_cast<Index>(cell == TimeCell::Lstm ? 4 * hidden : hidden);
}

Index fc_input_width(const TgConfig& cfg) {
  return static_cast<Index>(cfg.m * cfg.features * (cfg.skip_layer ? 2 : 1));
}

}  // namespace

ParamSet init_params(const TgConfig& cfg, ModelKind kind, std::uint64_t seed) {
  cfg.validate();
  ParamSet p;
  const auto fp = static_cast<Index>(cfg.features);
  const auto th = static_cast<Index>(cfg.time_hidden);
  for (std::size_t l = 0; l < cfg.time_layers; ++l) {
    const Index in = l == 0 ? fp : th;
    p.add(time_name(l, "W_in"), gate_rows(cfg.time_cell, cfg.time_hidden), in, true);
    p.add(time_name(l, "W_rec"), gate_rows(cfg.time_cell, cfg.time_hidden), th, true);
    p.add(time_name(l, "b"), gate_rows(cfg.time_cell, cfg.time_hidden), 1, false);
  }
  p.add("time.proj.W", fp, th, true);
  p.add("time.proj.b", fp, 1, false);

  if (kind == ModelKind::TimeGeometric) {
    const auto gh = static_cast<Index>(cfg.gcn_hidden);
    const auto lh = static_cast<Index>(cfg.geo_lstm_hidden);
    for (std::size_t l = 0; l < cfg.gcn_layers; ++l) p.add(gcn_name(l), l == 0 ? fp : gh, gh, true);
    p.add("geo.lstm.W_in", 4 * lh, gh, true);
    p.add("geo.lstm.W_rec", 4 * lh, lh, true);
    p.add("geo.lstm.b", 4 * lh, 1, false);
    p.add("geo.proj.W", fp, lh, true);
    p.add("geo.proj.b", fp, 1, false);
  }

  Index in = fc_input_width(cfg);
  for (std::size_t l = 0; l < cfg.fc_widths.size(); ++l) {
    const auto w = static_cast<Index>(cfg.fc_widths[l]);
    p.add(fc_name(l, "W"), w, in, true);
    p.add(fc_name(l, "b"), w, 1, false);
    in = w;
  }
  p.add("head.W", static_cast<Index>(cfg.q), in, true);
  p.add("head.b", static_cast<Index>(cfg.q), 1, false);

  std::mt19937_64 rng(seed);
  for (auto& e : p.entries()) {
    if (!e.penalized) continue;
    const double bound = 1.0 / std::sqrt(static_cast<double>(e.value.cols()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Index c = 0; c < e.value.cols(); ++c)
      for (Index r = 0; r < e.value.rows(); ++r) e.value(r, c) = dist(rng);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Graph inputs

MatrixXd normalize_adjacency(const MatrixXd& a) {
  if (a.rows() != a.cols()) throw DimensionError("adjacency must be square");
  const Index n = a.rows();
  for (Index i = 0; i < n; ++i) {
    if (a(i, i) != 0.0) throw ArgumentError("adjacency diagonal must be zero");
    for (Index j = i + 1; j < n; ++j)
      if (a(i, j) != a(j, i))
        throw ArgumentError("adjacency must be symmetric; symmetrize directed graphs first");
  }
  const MatrixXd tilde = a + MatrixXd::Identity(n, n);
  const VectorXd inv_sqrt = tilde.rowwise().sum().array().rsqrt();
  return inv_sqrt.asDiagonal() * tilde * inv_sqrt.asDiagonal();
}

Example make_example(const WindowSample& s, const TgConfig& cfg) {
  if (static_cast<std::size_t>(s.x.rows()) != cfg.m ||
      static_cast<std::size_t>(s.x.cols()) != cfg.features)
    throw DimensionError("sample window is " + std::to_string(s.x.rows()) + "x" +
                         std::to_string(s.x.cols()) + ", model expects " + std::to_string(cfg.m) +
                         "x" + std::to_string(cfg.features));
  if (static_cast<std::size_t>(s.y.size()) != cfg.q)
    throw DimensionError("sample horizon differs from model q");
  Example ex;
  ex.x = s.x;
  const std::span<const double> window(s.raw_target_window.data(),
                                       static_cast<std::size_t>(s.raw_target_window.size()));
  const auto g = build_vg(window, cfg.directed_graph);
  ex.a_hat = normalize_adjacency((cfg.directed_graph ? g.symmetrized() : g).dense());
  if (!(s.target_scaling.stddev > 0.0)) throw DomainError("target scaling must be positive");
  ex.target = (s.y.array() - s.target_scaling.mean) / s.target_scaling.stddev;
  return ex;
}

std::vector<Example> make_examples(std::span<const WindowSample> samples, const TgConfig& cfg) {
  std::vector<Example> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(make_example(s, cfg));
  return out;
}

// ---------------------------------------------------------------------------
// Forward and backward passes

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

MatrixXd apply(Activation a, const MatrixXd& z) {
  return z.unaryExpr([a](double v) { return activate(a, v); });
}

MatrixXd apply_derivative(Activation a, const MatrixXd& z) {
  return z.unaryExpr([a](double v) { return activate_derivative(a, v); });
}

struct RecurrentCache {
  MatrixXd input;   // D x m
  MatrixXd gates;   // rnn: pre-activation H x m; lstm: activated [i f g o] 4H x m
  MatrixXd cell;    // lstm: c_t, H x m
  MatrixXd tanh_c;  // lstm: tanh(c_t)
  MatrixXd h;       // H x m
};

// Sequence runs over columns of `input`.
MatrixXd recurrent_forward(TimeCell kind, const MatrixXd& w_in, const MatrixXd& w_rec,
                           const MatrixXd& b, const MatrixXd& input, RecurrentCache& c) {
  const Index hidden = w_rec.cols();
  const Index steps = input.cols();
  c.input = input;
  c.h.resize(hidden, steps);
  c.gates.resize(w_in.rows(), steps);
  VectorXd h_prev = VectorXd::Zero(hidden);
  if (kind == TimeCell::Rnn) {
    for (Index t = 0; t < steps; ++t) {
      c.gates.col(t) = w_in * input.col(t) + w_rec * h_prev + b.col(0);
      c.h.col(t) = c.gates.col(t).array().tanh();
      h_prev = c.h.col(t);
    }
    return c.h;
  }
  c.cell.resize(hidden, steps);
  c.tanh_c.resize(hidden, steps);
  VectorXd c_prev = VectorXd::Zero(hidden);
  for (Index t = 0; t < steps; ++t) {
    VectorXd a = w_in * input.col(t) + w_rec * h_prev + b.col(0);
    for (Index k = 0; k < hidden; ++k) {
      a(k) = sigmoid(a(k));                          // input gate
      a(hidden + k) = sigmoid(a(hidden + k));        // forget gate
      a(2 * hidden + k) = std::tanh(a(2 * hidden + k));  // candidate
      a(3 * hidden + k) = sigmoid(a(3 * hidden + k));    // output gate
    }
    c.gates.col(t) = a;
    c.cell.col(t) = a.segment(hidden, hidden).cwiseProduct(c_prev) +
                    a.segment(0, hidden).cwiseProduct(a.segment(2 * hidden, hidden));
    c.tanh_c.col(t) = c.cell.col(t).array().tanh();
    c.h.col(t) = a.segment(3 * hidden, hidden).cwiseProduct(c.tanh_c.col(t));
    h_prev = c.h.col(t);
    c_prev = c.cell.col(t);
  }
  return c.h;
}

// Back-propagation through time. `d_h` holds dLoss/dh_t per column.
MatrixXd recurrent_backward(TimeCell kind, const MatrixXd& w_in, const MatrixXd& w_rec,
                            const RecurrentCache& c, const MatrixXd& d_h, MatrixXd& g_in,
                            MatrixXd& g_rec, MatrixXd& g_b) {
  const Index hidden = w_rec.cols();
  const Index steps = c.input.cols();
  MatrixXd d_input(c.input.rows(), steps);
  VectorXd dh_next = VectorXd::Zero(hidden);
  VectorXd dc_next = VectorXd::Zero(hidden);
  VectorXd da(w_in.rows());
  for (Index t = steps - 1; t >= 0; --t) {
    const VectorXd dh = d_h.col(t) + dh_next;
    if (kind == TimeCell::Rnn) {
      da = dh.array() * (1.0 - c.h.col(t).array().square());
    } else {
      const auto gi = c.gates.col(t).segment(0, hidden).array();
      const auto gf = c.gates.col(t).segment(hidden, hidden).array();
      const auto gg = c.gates.col(t).segment(2 * hidden, hidden).array();
      const auto go = c.gates.col(t).segment(3 * hidden, hidden).array();
      const auto tc = c.tanh_c.col(t).array();
      const VectorXd dc = (dh.array() * go * (1.0 - tc.square())).matrix() + dc_next;
      const VectorXd c_prev = t > 0 ? VectorXd(c.cell.col(t - 1)) : VectorXd::Zero(hidden);
      da.segment(0, hidden) = dc.array() * gg * gi * (1.0 - gi);
      da.segment(hidden, hidden) = dc.array() * c_prev.array() * gf * (1.0 - gf);
      da.segment(2 * hidden, hidden) = dc.array() * gi * (1.0 - gg.square());
      da.segment(3 * hidden, hidden) = dh.array() * tc * go * (1.0 - go);
      dc_next = dc.array() * gf;
    }
    g_in.noalias() += da * c.input.col(t).transpose();
    if (t > 0) g_rec.noalias() += da * c.h.col(t - 1).transpose();
    g_b.col(0) += da;
    d_input.col(t) = w_in.transpose() * da;
    dh_next = w_rec.transpose() * da;
  }
  return d_input;
}

struct TimeCache {
  std::vector<RecurrentCache> layers;
  MatrixXd proj_pre;  // F' x m
};

struct GeoCache {
  std::vector<MatrixXd> h;    // h[0] = x; h[l] post-activation, m x d
  std::vector<MatrixXd> ah;   // a_hat * h[l-1]
  std::vector<MatrixXd> pre;  // ah * theta
  RecurrentCache lstm;
};

struct FcCache {
  VectorXd input;
  std::vector<VectorXd> pre;
  std::vector<VectorXd> out;  // after activation and dropout
  std::vector<VectorXd> mask;  // empty when dropout is off
};

MatrixXd time_forward(const MatrixXd& x, const ParamSet& p, const TgConfig& cfg, TimeCache& cache) {
  if (static_cast<std::size_t>(x.cols()) != cfg.features)
    throw DimensionError("feature matrix has " + std::to_string(x.cols()) + " columns, expected " +
                         std::to_string(cfg.features));
  cache.layers.resize(cfg.time_layers);
  MatrixXd seq = x.transpose();
  for (std::size_t l = 0; l < cfg.time_layers; ++l)
    seq = recurrent_forward(cfg.time_cell, p[time_name(l, "W_in")], p[time_name(l, "W_rec")],
                            p[time_name(l, "b")], seq, cache.layers[l]);
  cache.proj_pre = p["time.proj.W"] * seq;
  cache.proj_pre.colwise() += p["time.proj.b"].col(0);
  return apply(cfg.activation, cache.proj_pre).transpose();
}

void time_backward(const MatrixXd& d_out, const ParamSet& p, const TgConfig& cfg,
                   const TimeCache& cache, ParamSet& g) {
  const MatrixXd d_pre =
      d_out.transpose().cwiseProduct(apply_derivative(cfg.activation, cache.proj_pre));
  const auto& top = cache.layers.back().h;
  g["time.proj.W"].noalias() += d_pre * top.transpose();
  g["time.proj.b"].col(0) += d_pre.rowwise().sum();
  MatrixXd d_seq = p["time.proj.W"].transpose() * d_pre;
  for (std::size_t l = cfg.time_layers; l-- > 0;) {
    d_seq = recurrent_backward(cfg.time_cell, p[time_name(l, "W_in")], p[time_name(l, "W_rec")],
                               cache.layers[l], d_seq, g[time_name(l, "W_in")],
                               g[time_name(l, "W_rec")], g[time_name(l, "b")]);
  }
}

MatrixXd geo_forward(const MatrixXd& a_hat, const MatrixXd& x, const ParamSet& p,
                     const TgConfig& cfg, GeoCache& cache) {
  if (a_hat.rows() != x.rows() || a_hat.cols() != x.rows())
    throw DimensionError("adjacency is " + std::to_string(a_hat.rows()) + "x" +
                         std::to_string(a_hat.cols()) + ", window has " +
                         std::to_string(x.rows()) + " rows");
  cache.h.assign(1, x);
  cache.ah.clear();
  cache.pre.clear();
  for (std::size_t l = 0; l < cfg.gcn_layers; ++l) {
    cache.ah.push_back(a_hat * cache.h.back());
    cache.pre.push_back(cache.ah.back() * p[gcn_name(l)]);
    cache.h.push_back(apply(cfg.gcn_activation, cache.pre.back()));
  }
  const MatrixXd hidden = recurrent_forward(TimeCell::Lstm, p["geo.lstm.W_in"], p["geo.lstm.W_rec"],
                                            p["geo.lstm.b"], cache.h.back().transpose(), cache.lstm);
  MatrixXd out = p["geo.proj.W"] * hidden;
  out.colwise() += p["geo.proj.b"].col(0);
  return out.transpose();
}

void geo_backward(const MatrixXd& d_out, const ParamSet& p, const TgConfig& cfg,
                  const MatrixXd& a_hat, const GeoCache& cache, ParamSet& g) {
  const MatrixXd d_proj = d_out.transpose();  // F' x m
  g["geo.proj.W"].noalias() += d_proj * cache.lstm.h.transpose();
  g["geo.proj.b"].col(0) += d_proj.rowwise().sum();
  const MatrixXd d_hidden = p["geo.proj.W"].transpose() * d_proj;
  MatrixXd d_h = recurrent_backward(TimeCell::Lstm, p["geo.lstm.W_in"], p["geo.lstm.W_rec"],
                                    cache.lstm, d_hidden, g["geo.lstm.W_in"], g["geo.lstm.W_rec"],
                                    g["geo.lstm.b"])
                     .transpose();
  for (std::size_t l = cfg.gcn_layers; l-- > 0;) {
    const MatrixXd d_pre = d_h.cwiseProduct(apply_derivative(cfg.gcn_activation, cache.pre[l]));
    g[gcn_name(l)].noalias() += cache.ah[l].transpose() * d_pre;
    if (l > 0) d_h = a_hat.transpose() * d_pre * p[gcn_name(l)].transpose();
  }
}

VectorXd fc_forward(const MatrixXd& time_pattern, const MatrixXd& graph_pattern, const MatrixXd& x,
                    const ParamSet& p, const TgConfig& cfg, FcCache& cache, std::mt19937_64* rng) {
  if (time_pattern.rows() != x.rows() || time_pattern.cols() != x.cols() ||
      graph_pattern.rows() != x.rows() || graph_pattern.cols() != x.cols())
    throw DimensionError("pattern matrices must match the feature matrix shape");
  const Index m = x.rows();
  const Index f = x.cols();
  const Index width = cfg.skip_layer ? 2 * f : f;
  if (m * width != fc_input_width(cfg)) throw DimensionError("window shape differs from model config");
  cache.input.resize(m * width);
  for (Index r = 0; r < m; ++r) {
    for (Index c = 0; c < f; ++c) cache.input(r * width + c) = time_pattern(r, c) + graph_pattern(r, c);
    if (cfg.skip_layer)
      for (Index c = 0; c < f; ++c) cache.input(r * width + f + c) = x(r, c);
  }
  const bool drop = cfg.dropout && cfg.dropout_rate > 0.0 && rng != nullptr;
  std::bernoulli_distribution keep(1.0 - cfg.dropout_rate);
  cache.pre.clear();
  cache.out.clear();
  cache.mask.clear();
  VectorXd v = cache.input;
  for (std::size_t l = 0; l < cfg.fc_widths.size(); ++l) {
    VectorXd z = p[fc_name(l, "W")] * v + p[fc_name(l, "b")].col(0);
    v = apply(cfg.activation, z);
    if (drop) {
      VectorXd mask(v.size());
      for (Index i = 0; i < v.size(); ++i)
        mask(i) = keep(*rng) ? 1.0 / (1.0 - cfg.dropout_rate) : 0.0;
      v = v.cwiseProduct(mask);
      cache.mask.push_back(std::move(mask));
    }
    cache.pre.push_back(std::move(z));
    cache.out.push_back(v);
  }
  return p["head.W"] * v + p["head.b"].col(0);
}

// Returns dLoss/d(pattern sum), shaped m x F'.
MatrixXd fc_backward(const VectorXd& d_yhat, const ParamSet& p, const TgConfig& cfg,
                     const FcCache& cache, ParamSet& g, Index m, Index f) {
  const VectorXd& last = cache.out.empty() ? cache.input : cache.out.back();
  g["head.W"].noalias() += d_yhat * last.transpose();
  g["head.b"].col(0) += d_yhat;
  VectorXd dv = p["head.W"].transpose() * d_yhat;
  for (std::size_t l = cfg.fc_widths.size(); l-- > 0;) {
    if (!cache.mask.empty()) dv = dv.cwiseProduct(cache.mask[l]);
    const VectorXd dz = dv.cwiseProduct(apply_derivative(cfg.activation, cache.pre[l]));
    const VectorXd& in = l == 0 ? cache.input : cache.out[l - 1];
    g[fc_name(l, "W")].noalias() += dz * in.transpose();
    g[fc_name(l, "b")].col(0) += dz;
    dv = p[fc_name(l, "W")].transpose() * dz;
  }
  const Index width = cfg.skip_layer ? 2 * f : f;
  MatrixXd d_sum(m, f);
  for (Index r = 0; r < m; ++r)
    for (Index c = 0; c < f; ++c) d_sum(r, c) = dv(r * width + c);
  return d_sum;
}

}  // namespace

MatrixXd gcn_layer(const MatrixXd& a_hat, const MatrixXd& h, const MatrixXd& theta, Activation rho) {
  if (a_hat.rows() != a_hat.cols() || a_hat.cols() != h.rows() || h.cols() != theta.rows())
    throw DimensionError("gcn_layer shape mismatch");
  return apply(rho, a_hat * h * theta);
}

MatrixXd time_component_forward(const MatrixXd& x, const ParamSet& p, const TgConfig& cfg) {
  TimeCache cache;
  return time_forward(x, p, cfg, cache);
}

MatrixXd geometric_component_forward(const MatrixXd& a_hat, const MatrixXd& x, const ParamSet& p,
                                     const TgConfig& cfg) {
  GeoCache cache;
  return geo_forward(a_hat, x, p, cfg, cache);
}

VectorXd fc_component_forward(const MatrixXd& time_pattern, const MatrixXd& graph_pattern,
                              const MatrixXd& x, const ParamSet& p, const TgConfig& cfg) {
  FcCache cache;
  return fc_forward(time_pattern, graph_pattern, x, p, cfg, cache, nullptr);
}

VectorXd tg_forward(const Example& ex, const ParamSet& p, const TgConfig& cfg) {
  const MatrixXd t = time_component_forward(ex.x, p, cfg);
  const MatrixXd g = geometric_component_forward(ex.a_hat, ex.x, p, cfg);
  return fc_component_forward(t, g, ex.x, p, cfg);
}

VectorXd baseline_forward(const Example& ex, const ParamSet& p, const TgConfig& cfg) {
  const MatrixXd t = time_component_forward(ex.x, p, cfg);
  return fc_component_forward(t, MatrixXd::Zero(t.rows(), t.cols()), ex.x, p, cfg);
}

VectorXd forward(const Example& ex, const ParamSet& p, const TgConfig& cfg, ModelKind kind) {
  return kind == ModelKind::TimeGeometric ? tg_forward(ex, p, cfg) : baseline_forward(ex, p, cfg);
}

double penalty(const ParamSet& p) {
  double s = 0.0;
  for (const auto& e : p.entries())
    if (e.penalized) s += e.value.squaredNorm();
  return s;
}

double loss(const VectorXd& yhat, const VectorXd& y, const ParamSet& p, double l2) {
  if (yhat.size() != y.size()) throw DimensionError("prediction and target lengths differ");
  const double mse = (yhat - y).squaredNorm() / static_cast<double>(y.size());
  return l2 > 0.0 ? mse + l2 * penalty(p) : mse;
}

namespace {

// Data-term loss and gradient only; the L2 term is added by the callers.
double accumulate_gradient(const Example& ex, const ParamSet& p, const TgConfig& cfg,
                           ModelKind kind, ParamSet& g, std::mt19937_64* rng) {
  if (ex.target.size() != static_cast<Index>(cfg.q))
    throw DimensionError("example target length differs from q");
  TimeCache tc;
  GeoCache gc;
  FcCache fc;
  const MatrixXd t = time_forward(ex.x, p, cfg, tc);
  const MatrixXd geo = kind == ModelKind::TimeGeometric ? geo_forward(ex.a_hat, ex.x, p, cfg, gc)
                                                        : MatrixXd::Zero(t.rows(), t.cols());
  const VectorXd yhat = fc_forward(t, geo, ex.x, p, cfg, fc, rng);
  const VectorXd diff = yhat - ex.target;
  const double q = static_cast<double>(cfg.q);
  const VectorXd d_yhat = 2.0 / q * diff;
  const MatrixXd d_sum = fc_backward(d_yhat, p, cfg, fc, g, ex.x.rows(), ex.x.cols());
  time_backward(d_sum, p, cfg, tc, g);
  if (kind == ModelKind::TimeGeometric) geo_backward(d_sum, p, cfg, ex.a_hat, gc, g);
  return diff.squaredNorm() / q;
}

void add_penalty_gradient(const ParamSet& p, double l2, ParamSet& g) {
  if (l2 <= 0.0) return;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p.entries()[i].penalized) g.entries()[i].value += 2.0 * l2 * p.entries()[i].value;
}

void check_finite(const ParamSet& g) {
  for (const auto& e : g.entries())
    if (!e.value.allFinite()) throw NumericalError("non-finite gradient in parameter " + e.name);
}

}  // namespace

GradientResult gradients(const Example& ex, const ParamSet& p, const TgConfig& cfg, ModelKind kind,
                         std::mt19937_64* rng) {
  GradientResult r;
  r.grads = p.zeros_like();
  r.loss = accumulate_gradient(ex, p, cfg, kind, r.grads, rng);
  if (cfg.l2 > 0.0) r.loss += cfg.l2 * penalty(p);
  add_penalty_gradient(p, cfg.l2, r.grads);
  check_finite(r.grads);
  return r;
}

GradientResult batch_gradients(std::span<const Example> data, std::span<const std::size_t> idx,
                               const ParamSet& p, const TgConfig& cfg, ModelKind kind,
                               std::mt19937_64* rng) {
  if (idx.empty()) throw ArgumentError("empty batch");
  GradientResult r;
  r.grads = p.zeros_like();
  for (auto i : idx) r.loss += accumulate_gradient(data[i], p, cfg, kind, r.grads, rng);
  const double inv = 1.0 / static_cast<double>(idx.size());
  r.loss *= inv;
  for (auto& e : r.grads.entries()) e.value *= inv;
  if (cfg.l2 > 0.0) r.loss += cfg.l2 * penalty(p);
  add_penalty_gradient(p, cfg.l2, r.grads);
  check_finite(r.grads);
  return r;
}

}  // namespace vistat
