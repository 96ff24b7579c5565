#include "roadtoll/network.hpp"

#include <random>

#include "doctest.h"
#include "oracles.hpp"

using namespace roadtoll;

namespace {

const NetworkSpec kTwoParallel{2, {{1, 2}, {1, 2}}, 1, 2};
const NetworkSpec kSingleEdge{2, {{1, 2}}, 1, 2};
// V={1..4}, E={(1,2),(1,3),(2,4),(3,4),(2,3)}
const NetworkSpec kBraess{4, {{1, 2}, {1, 3}, {2, 4}, {3, 4}, {2, 3}}, 1, 4};

}  // namespace

TEST_CASE("enumerate_paths: two parallel edges give two single-edge paths") {
  const PathSet ps = enumerate_paths(kTwoParallel);
  REQUIRE(ps.count() == 2);
  CHECK(ps.paths[0] == Path{0});
  CHECK(ps.paths[1] == Path{1});
}

TEST_CASE("enumerate_paths: single edge") {
  const PathSet ps = enumerate_paths(kSingleEdge);
  REQUIRE(ps.count() == 1);
  CHECK(ps.paths[0] == Path{0});
}

TEST_CASE("enumerate_paths: Braess network, lexicographic order") {
  const PathSet ps = enumerate_paths(kBraess);
  REQUIRE(ps.count() == 3);
  CHECK(ps.paths[0] == Path{0, 2});     // e1,e3
  CHECK(ps.paths[1] == Path{0, 4, 3});  // e1,e5,e4
  CHECK(ps.paths[2] == Path{1, 3});     // e2,e4
  CHECK(ps.paths == oracles::brute_force_paths(kBraess));
}

TEST_CASE("enumerate_paths: no path throws EmptyPathSet") {
  const NetworkSpec disconnected{3, {{2, 3}}, 1, 3};
  CHECK_THROWS_AS(enumerate_paths(disconnected), EmptyPathSet);
}

TEST_CASE("enumerate_paths: invalid specs rejected") {
  CHECK_THROWS_AS(enumerate_paths(NetworkSpec{2, {{1, 2}}, 1, 1}), ValidationError);
  CHECK_THROWS_AS(enumerate_paths(NetworkSpec{2, {{1, 3}}, 1, 2}), ValidationError);
  CHECK_THROWS_AS(enumerate_paths(NetworkSpec{0, {}, 1, 2}), ValidationError);
}

TEST_CASE("incidence_matrix examples") {
  SUBCASE("two parallel edges -> identity") {
    const PathSet ps = enumerate_paths(kTwoParallel);
    CHECK(incidence_matrix(kTwoParallel, ps) == Mat<int>::identity(2));
  }
  SUBCASE("single edge") {
    const PathSet ps = enumerate_paths(kSingleEdge);
    CHECK(incidence_matrix(kSingleEdge, ps) == Mat<int>{{1}});
  }
  SUBCASE("Braess column for e1,e5,e4") {
    const PathSet ps = enumerate_paths(kBraess);
    const IncidenceMatrix delta = incidence_matrix(kBraess, ps);
    REQUIRE(delta.rows() == 5);
    // path [e1,e5,e4] sits at index 1 of the lexicographic listing
    CHECK(delta(0, 1) == 1);
    CHECK(delta(1, 1) == 0);
    CHECK(delta(2, 1) == 0);
    CHECK(delta(3, 1) == 1);
    CHECK(delta(4, 1) == 1);
  }
}

TEST_CASE("overlap_matrix examples") {
  SUBCASE("identity incidence -> identity overlap") {
    CHECK(overlap_matrix(Mat<int>::identity(2)) == Mat<int>::identity(2));
  }
  SUBCASE("single one-edge path") {
    CHECK(overlap_matrix(Mat<int>{{1}}) == Mat<int>{{1}});
  }
  SUBCASE("Braess") {
    const PathSet ps = enumerate_paths(kBraess);
    const OverlapMatrix phi = overlap_matrix(incidence_matrix(kBraess, ps));
    CHECK(phi == Mat<int>{{2, 1, 0}, {1, 3, 1}, {0, 1, 2}});
    CHECK(phi == oracles::brute_force_overlap(ps.paths));
  }
}

TEST_CASE("link_loads examples") {
  SUBCASE("identity incidence") {
    const std::vector<double> y =
        link_loads(Mat<int>::identity(2), std::vector<double>{0.3, 0.7});
    CHECK(y == std::vector<double>{0.3, 0.7});
  }
  SUBCASE("single edge") {
    CHECK(link_loads(Mat<int>{{1}}, std::vector<double>{1.0}) ==
          std::vector<double>{1.0});
  }
  SUBCASE("Braess") {
    const PathSet ps = enumerate_paths(kBraess);
    const IncidenceMatrix delta = incidence_matrix(kBraess, ps);
    // masses 0.2 on [e1,e3], 0.3 on [e2,e4], 0.5 on [e1,e5,e4]
    const std::vector<double> y = link_loads(delta, std::vector<double>{0.2, 0.5, 0.3});
    CHECK(y == std::vector<double>{0.7, 0.3, 0.2, 0.8, 0.5});
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(link_loads(Mat<int>::identity(2), std::vector<double>{1.0}),
                    DimensionMismatch);
  }
}

TEST_CASE("paths chain tail->head and never repeat an edge") {
  std::mt19937_64 rng(20240601);
  for (int trial = 0; trial < 120; ++trial) {
    const NetworkSpec net = oracles::random_network(rng);
    const PathSet ps = enumerate_paths(net);
    for (const Path& path : ps.paths) {
      REQUIRE(!path.empty());
      int node = net.origin;
      std::set<int> used;
      for (int e : path) {
        CHECK(net.edges[e].first == node);
        CHECK(used.insert(e).second);
        node = net.edges[e].second;
      }
      CHECK(node == net.destination);
    }
    CHECK(ps.paths == oracles::brute_force_paths(net));
  }
}

TEST_CASE("overlap equals brute-force intersection counts on random networks") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 120; ++trial) {
    const NetworkSpec net = oracles::random_network(rng);
    const PathSet ps = enumerate_paths(net);
    const OverlapMatrix phi = overlap_matrix(incidence_matrix(net, ps));
    CHECK(phi == oracles::brute_force_overlap(ps.paths));
    // diagonal is the edge count, off-diagonals bounded by it
    for (int k = 0; k < phi.rows(); ++k) {
      CHECK(phi(k, k) == static_cast<int>(ps.paths[k].size()));
      for (int l = 0; l < phi.cols(); ++l)
        CHECK(phi(k, l) <= std::min(phi(k, k), phi(l, l)));
    }
  }
}

TEST_CASE("link loads are exact on rational aggregates") {
  using oracles::Rat;
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const NetworkSpec net = oracles::random_network(rng);
    const PathSet ps = enumerate_paths(net);
    const IncidenceMatrix delta = incidence_matrix(net, ps);
    std::uniform_int_distribution<int> num(0, 9), den(1, 9);
    std::vector<Rat> x(ps.count());
    for (Rat& v : x) v = Rat(num(rng), den(rng));
    const std::vector<Rat> y = link_loads(delta, x);
    for (int j = 0; j < delta.rows(); ++j) {
      Rat expected{};
      for (int k = 0; k < delta.cols(); ++k)
        if (delta(j, k)) expected += x[k];
      CHECK(y[j] == expected);
    }
  }
}
