#pragma once

// Natural visibility graphs over a window of observations, plus the
// reference random-graph generators used to compare degree distributions.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace vistat {

/// Binary adjacency over n time-ordered nodes; node u is window offset u
/// (oldest = 0). Directed graphs only carry arcs u -> v with u < v.
class VisibilityGraph {
 public:
  VisibilityGraph() = default;
  VisibilityGraph(std::size_t n, bool directed);

  std::size_t size() const { return n_; }
  bool directed() const { return directed_; }

  bool has_edge(std::size_t u, std::size_t v) const { return adj_[u * n_ + v] != 0; }

  /// Adds u -> v for directed graphs (u < v required), or u -- v otherwise.
  void add_edge(std::size_t u, std::size_t v);
  void remove_edge(std::size_t u, std::size_t v);

  /// Undirected: pairs (u, v) with u < v. Directed: arcs. Lexicographic order.
  std::vector<std::pair<std::size_t, std::size_t>> edges() const;
  std::size_t edge_count() const;

  /// Undirected graph with an edge wherever either orientation exists.
  VisibilityGraph symmetrized() const;

  Eigen::MatrixXd dense() const;

  friend bool operator==(const VisibilityGraph&, const VisibilityGraph&) = default;

 private:
  std::size_t n_ = 0;
  bool directed_ = false;
  std::vector<std::uint8_t> adj_;  // row-major n x n
};

/// Line-of-sight test between observations i < j: every intermediate point
/// must lie strictly below the chord joining (i, s_i) and (j, s_j).
bool is_visible(std::span<const double> values, std::size_t i, std::size_t j);

/// O(n^2) construction by a per-source maximum-slope scan.
VisibilityGraph build_vg(std::span<const double> values, bool directed = false);

/// O(n^3) construction from pairwise is_visible; the reference for build_vg.
VisibilityGraph build_vg_bruteforce(std::span<const double> values, bool directed = false);

struct DegreeStats {
  std::vector<std::size_t> degrees;
  double mean = 0.0;
  double variance = 0.0;  // population variance over nodes
  std::map<std::size_t, std::size_t> histogram;
};

/// Degrees k_u = sum_v a_uv; for directed graphs in- and out-arcs both count.
DegreeStats degree_stats(const VisibilityGraph& g);

/// Breadth-first reachability from node 0, ignoring arc direction.
bool is_connected(const VisibilityGraph& g);

VisibilityGraph gen_regular(std::size_t n, std::size_t k);
VisibilityGraph gen_random(std::size_t n, double p, std::uint64_t seed);
VisibilityGraph gen_small_world(std::size_t n, std::size_t k, double p_rewire,
                                std::uint64_t seed);

/// `src,dst` header then one row per edge (undirected edges listed once).
void write_edge_list(std::ostream& out, const VisibilityGraph& g);
/// n rows of comma-separated 0/1.
void write_dense(std::ostream& out, const VisibilityGraph& g);

}  // namespace vistat
