#include "vistat/visgraph.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <ostream>
#include <random>
#include <string>

#include "vistat/error.hpp"

namespace vistat {

VisibilityGraph::VisibilityGraph(std::size_t n, bool directed)
    : n_(n), directed_(directed), adj_(n * n, 0) {}

void VisibilityGraph::add_edge(std::size_t u, std::size_t v) {
  if (u >= n_ || v >= n_ || u == v) throw ArgumentError("invalid edge endpoints");
  if (directed_) {
    if (u > v) throw ArgumentError("directed visibility arcs must point left to right");
    adj_[u * n_ + v] = 1;
  } else {
    adj_[u * n_ + v] = 1;
    adj_[v * n_ + u] = 1;
  }
}

void VisibilityGraph::remove_edge(std::size_t u, std::size_t v) {
  adj_[u * n_ + v] = 0;
  if (!directed_) adj_[v * n_ + u] = 0;
}

std::vector<std::pair<std::size_t, std::size_t>> VisibilityGraph::edges() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t u = 0; u < n_; ++u)
    for (std::size_t v = u + 1; v < n_; ++v)
      if (has_edge(u, v)) out.emplace_back(u, v);
  return out;
}

std::size_t VisibilityGraph::edge_count() const {
  std::size_t c = 0;
  for (std::size_t u = 0; u < n_; ++u)
    for (std::size_t v = u + 1; v < n_; ++v) c += has_edge(u, v);
  return c;
}

VisibilityGraph VisibilityGraph::symmetrized() const {
  VisibilityGraph g(n_, false);
  for (std::size_t u = 0; u < n_; ++u)
    for (std::size_t v = u + 1; v < n_; ++v)
      if (has_edge(u, v) || has_edge(v, u)) g.add_edge(u, v);
  return g;
}

Eigen::MatrixXd VisibilityGraph::dense() const {
  Eigen::MatrixXd a(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
  for (std::size_t u = 0; u < n_; ++u)
    for (std::size_t v = 0; v < n_; ++v)
      a(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v)) = adj_[u * n_ + v];
  return a;
}

bool is_visible(std::span<const double> values, std::size_t i, std::size_t j) {
  if (i >= j) throw ArgumentError("is_visible requires i < j");
  if (j >= values.size()) throw ArgumentError("is_visible index out of range");
  const double si = values[i];
  const double sj = values[j];
  const double span = static_cast<double>(j - i);
  for (std::size_t k = i + 1; k < j; ++k) {
    const double chord = si + (sj - si) * static_cast<double>(k - i) / span;
    if (!(values[k] < chord)) return false;
  }
  return true;
}

namespace {

void check_series(std::span<const double> values) {
  if (values.size() < 2)
    throw ArgumentError("visibility graph needs at least 2 observations");
  for (std::size_t i = 0; i < values.size(); ++i)
    if (!std::isfinite(values[i]))
      throw DomainError("non-finite value at index " + std::to_string(i));
}

}  // namespace

VisibilityGraph build_vg(std::span<const double> values, bool directed) {
  check_series(values);
  const std::size_t n = values.size();
  VisibilityGraph g(n, directed);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    double max_slope = -std::numeric_limits<double>::infinity();
    for (std::size_t j = i + 1; j < n; ++j) {
      const double slope = (values[j] - values[i]) / static_cast<double>(j - i);
      if (slope > max_slope) {
        g.add_edge(i, j);
        max_slope = slope;
      }
    }
  }
  return g;
}

VisibilityGraph build_vg_bruteforce(std::span<const double> values, bool directed) {
  check_series(values);
  const std::size_t n = values.size();
  VisibilityGraph g(n, directed);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (is_visible(values, i, j)) g.add_edge(i, j);
  return g;
}

DegreeStats degree_stats(const VisibilityGraph& g) {
  const std::size_t n = g.size();
  DegreeStats s;
  s.degrees.assign(n, 0);
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = 0; v < n; ++v)
      if (g.has_edge(u, v)) {
        ++s.degrees[u];
        if (g.directed()) ++s.degrees[v];
      }
  if (n == 0) return s;
  double sum = 0.0;
  for (auto d : s.degrees) {
    sum += static_cast<double>(d);
    ++s.histogram[d];
  }
  s.mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (auto d : s.degrees) ss += (static_cast<double>(d) - s.mean) * (static_cast<double>(d) - s.mean);
  s.variance = ss / static_cast<double>(n);
  return s;
}

bool is_connected(const VisibilityGraph& g) {
  const std::size_t n = g.size();
  if (n == 0) return true;
  std::vector<bool> seen(n, false);
  std::deque<std::size_t> frontier{0};
  seen[0] = true;
  std::size_t reached = 1;
  while (!frontier.empty()) {
    const auto u = frontier.front();
    frontier.pop_front();
    for (std::size_t v = 0; v < n; ++v)
      if (!seen[v] && (g.has_edge(u, v) || g.has_edge(v, u))) {
        seen[v] = true;
        ++reached;
        frontier.push_back(v);
      }
  }
  return reached == n;
}

VisibilityGraph gen_regular(std::size_t n, std::size_t k) {
  if (k >= n || (n * k) % 2 != 0)
    throw ArgumentError("regular graph needs k < n and n*k even");
  VisibilityGraph g(n, false);
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t j = 1; j <= k / 2; ++j) g.add_edge(u, (u + j) % n);
  // Odd k (so n even): also join each node to its diametric opposite.
  if (k % 2 == 1)
    for (std::size_t u = 0; u < n / 2; ++u) g.add_edge(u, u + n / 2);
  return g;
}

VisibilityGraph gen_random(std::size_t n, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("edge probability must lie in [0,1]");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  VisibilityGraph g(n, false);
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v)
      if (unif(rng) < p) g.add_edge(u, v);
  return g;
}

VisibilityGraph gen_small_world(std::size_t n, std::size_t k, double p_rewire,
                                std::uint64_t seed) {
  if (k % 2 != 0 || k >= n) throw ArgumentError("small-world graph needs even k < n");
  if (!(p_rewire >= 0.0 && p_rewire <= 1.0))
    throw ArgumentError("rewiring probability must lie in [0,1]");
  VisibilityGraph g = gen_regular(n, k);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::size_t> candidates;
  for (std::size_t j = 1; j <= k / 2; ++j) {
    for (std::size_t u = 0; u < n; ++u) {
      const std::size_t v = (u + j) % n;
      if (!g.has_edge(u, v) || !(unif(rng) < p_rewire)) continue;
      candidates.clear();
      for (std::size_t w = 0; w < n; ++w)
        if (w != u && !g.has_edge(u, w)) candidates.push_back(w);
      // A saturated node keeps its lattice edge.
      if (candidates.empty()) continue;
      std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
      g.remove_edge(u, v);
      g.add_edge(u, candidates[pick(rng)]);
    }
  }
  return g;
}

void write_edge_list(std::ostream& out, const VisibilityGraph& g) {
  out << "src,dst\n";
  for (const auto& [u, v] : g.edges()) out << u << ',' << v << '\n';
}

void write_dense(std::ostream& out, const VisibilityGraph& g) {
  for (std::size_t u = 0; u < g.size(); ++u) {
    for (std::size_t v = 0; v < g.size(); ++v) {
      if (v) out << ',';
      out << (g.has_edge(u, v) ? 1 : 0);
    }
    out << '\n';
  }
}

}  // namespace vistat
