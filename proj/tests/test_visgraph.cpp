#include <doctest.h>

#include <random>
#include <set>
#include <sstream>

#include "vistat/error.hpp"
#include "vistat/visgraph.hpp"

using namespace vistat;
using Edges = std::vector<std::pair<std::size_t, std::size_t>>;

TEST_CASE("is_visible") {
  const std::vector<double> a{3, 1, 2};
  CHECK(is_visible(a, 0, 2));
  const std::vector<double> b{1, 3, 1};
  CHECK_FALSE(is_visible(b, 0, 2));
  for (std::size_t i = 0; i + 1 < b.size(); ++i) CHECK(is_visible(b, i, i + 1));
  // Collinear intermediate blocks.
  const std::vector<double> c{1, 2, 3};
  CHECK_FALSE(is_visible(c, 0, 2));
  CHECK_THROWS_AS(is_visible(a, 2, 1), ArgumentError);
  CHECK_THROWS_AS(is_visible(a, 1, 1), ArgumentError);
}

TEST_CASE("build_vg examples") {
  const std::vector<double> a{3, 1, 2};
  CHECK(build_vg(a).edges() == Edges{{0, 1}, {0, 2}, {1, 2}});

  const std::vector<double> zig{1, 3, 1, 3, 1};
  const auto g = build_vg(zig);
  CHECK(g.edges() == Edges{{0, 1}, {1, 2}, {1, 3}, {2, 3}, {3, 4}});
  CHECK(degree_stats(g).degrees == std::vector<std::size_t>{1, 3, 2, 3, 1});

  const auto d = build_vg(zig, true);
  CHECK(d.directed());
  CHECK(d.edges() == Edges{{0, 1}, {1, 2}, {1, 3}, {2, 3}, {3, 4}});
  CHECK_FALSE(d.has_edge(1, 0));
  CHECK(d.symmetrized() == g);

  CHECK_THROWS_AS(build_vg(std::vector<double>{1.0}), ArgumentError);
  CHECK_THROWS_AS(build_vg(std::vector<double>{1.0, std::nan("")}), DomainError);
}

TEST_CASE("fast scan agrees with the pairwise oracle on ties and plateaus") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> small(0, 3);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> v(2 + trial % 20);
    for (auto& x : v) x = small(rng);
    CHECK(build_vg(v) == build_vg_bruteforce(v));
    CHECK(build_vg(v, true) == build_vg_bruteforce(v, true));
  }
}

TEST_CASE("strictly convex series gives the complete graph") {
  std::vector<double> v;
  for (int i = 0; i < 12; ++i) v.push_back((i - 5.5) * (i - 5.5));
  const auto g = build_vg(v);
  CHECK(g.edge_count() == 12 * 11 / 2);
}

TEST_CASE("adjacency invariants") {
  const std::vector<double> v{0.3, -1.0, 2.2, 0.1, 0.5, 1.7, -0.4};
  const auto a = build_vg(v).dense();
  CHECK(a.diagonal().isZero());
  CHECK(a == a.transpose());
  const auto d = build_vg(v, true).dense();
  for (int i = 0; i < d.rows(); ++i)
    for (int j = 0; j <= i; ++j) CHECK(d(i, j) == 0.0);
}

TEST_CASE("degree_stats") {
  VisibilityGraph k3(3, false);
  k3.add_edge(0, 1);
  k3.add_edge(1, 2);
  k3.add_edge(0, 2);
  const auto s = degree_stats(k3);
  CHECK(s.degrees == std::vector<std::size_t>{2, 2, 2});
  CHECK(s.variance == 0.0);

  VisibilityGraph path(4, false);
  for (std::size_t i = 0; i < 3; ++i) path.add_edge(i, i + 1);
  const auto p = degree_stats(path);
  CHECK(p.degrees == std::vector<std::size_t>{1, 2, 2, 1});
  CHECK(p.mean == doctest::Approx(1.5));
  CHECK(p.variance == doctest::Approx(0.25));

  const auto z = degree_stats(build_vg(std::vector<double>{1, 3, 1, 3, 1}));
  CHECK(z.histogram == std::map<std::size_t, std::size_t>{{1, 2}, {2, 1}, {3, 2}});
  std::size_t sum = 0;
  for (auto d : z.degrees) sum += d;
  CHECK(sum == 2 * 5);

  const auto dz = degree_stats(build_vg(std::vector<double>{1, 3, 1, 3, 1}, true));
  CHECK(dz.degrees == std::vector<std::size_t>{1, 3, 2, 3, 1});
}

TEST_CASE("generators") {
  const auto reg = gen_regular(100, 30);
  for (auto d : degree_stats(reg).degrees) CHECK(d == 30);
  CHECK(reg.symmetrized() == reg);
  const auto odd = gen_regular(10, 3);
  for (auto d : degree_stats(odd).degrees) CHECK(d == 3);
  CHECK_THROWS_AS(gen_regular(5, 3), ArgumentError);
  CHECK_THROWS_AS(gen_regular(5, 5), ArgumentError);

  const auto rnd = gen_random(100, 0.2, 42);
  const double mean = degree_stats(rnd).mean;
  CHECK(mean >= 16.8);
  CHECK(mean <= 22.8);
  CHECK(gen_random(100, 0.2, 42) == rnd);
  CHECK(gen_random(10, 0.0, 1).edge_count() == 0);
  CHECK(gen_random(10, 1.0, 1).edge_count() == 45);
  CHECK_THROWS_AS(gen_random(10, 1.5, 1), ArgumentError);

  const auto sw = gen_small_world(100, 10, 0.1, 7);
  CHECK(degree_stats(sw).mean == 10.0);
  CHECK(sw.edge_count() == 500);
  CHECK_FALSE(sw == gen_regular(100, 10));
  CHECK(gen_small_world(100, 10, 0.0, 7) == gen_regular(100, 10));
  CHECK_THROWS_AS(gen_small_world(100, 9, 0.1, 7), ArgumentError);
}

TEST_CASE("exports") {
  const auto g = build_vg(std::vector<double>{3, 1, 2});
  std::ostringstream edges, dense;
  write_edge_list(edges, g);
  CHECK(edges.str() == "src,dst\n0,1\n0,2\n1,2\n");
  write_dense(dense, g);
  CHECK(dense.str() == "0,1,1\n1,0,1\n1,1,0\n");
  std::ostringstream arcs;
  write_edge_list(arcs, build_vg(std::vector<double>{1, 3, 1, 3, 1}, true));
  CHECK(arcs.str() == "src,dst\n0,1\n1,2\n1,3\n2,3\n3,4\n");
}
