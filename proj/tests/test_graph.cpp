#include <doctest.h>

#include <random>
#include <sstream>

#include "pcctp/evaluator.hpp"
#include "pcctp/graph.hpp"
#include "pcctp/graph_io.hpp"
#include "support/instance_gen.hpp"
#include "test_fixtures.hpp"

using namespace pcctp;

namespace {

std::vector<std::size_t> all_edges(const StochasticGraph& g) {
  std::vector<std::size_t> out(g.edges().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = i;
  return out;
}

std::set<std::pair<int, int>> edge_pairs(const StochasticGraph& g,
                                         const std::vector<std::size_t>& ix) {
  std::set<std::pair<int, int>> out;
  for (std::size_t e : ix) {
    const Edge& ed = g.edges()[e];
    out.insert({std::min(ed.u, ed.v), std::max(ed.u, ed.v)});
  }
  return out;
}

}  // namespace

TEST_CASE("graph validation rejects malformed inputs") {
  std::vector<Node> nodes{{0, 0, 0}, {1, 0, 0}};
  CHECK_THROWS_AS(StochasticGraph(nodes, {{0, 5, 1.0, 0.0}}, 0, {1}),
                  std::invalid_argument);
  CHECK_THROWS_AS(StochasticGraph(nodes, {{0, 1, -1.0, 0.0}}, 0, {1}),
                  std::invalid_argument);
  CHECK_THROWS_AS(StochasticGraph(nodes, {{0, 1, 1.0, 1.5}}, 0, {1}),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      StochasticGraph(nodes, {{0, 1, 1.0, 0.0}, {1, 0, 2.0, 0.0}}, 0, {1}),
      std::invalid_argument);
  CHECK_THROWS_AS(StochasticGraph(nodes, {{0, 1, 1.0, 0.0}}, 7, {1}),
                  std::invalid_argument);
  CHECK_THROWS_AS(StochasticGraph({{0, 0, 0}, {0, 0, 0}}, {}, 0, {}),
                  std::invalid_argument);
}

TEST_CASE("stochastic index follows edge order") {
  auto g = make_g2();
  REQUIRE(g.k() == 2);
  CHECK(g.edges()[g.stochastic_edge(0)].u == 2);
  CHECK(g.edges()[g.stochastic_edge(1)].u == 4);
}

TEST_CASE("information vector refines monotonically") {
  InformationVector info(2);
  CHECK(info.all_ambiguous());
  auto refined = info.refined(0, EdgeState::Traversable);
  CHECK(refined.to_string() == "TA");
  CHECK_THROWS_AS(refined.refined(0, EdgeState::Untraversable),
                  std::logic_error);
  CHECK_THROWS_AS(info.refined(0, EdgeState::Ambiguous),
                  std::invalid_argument);
  CHECK(InformationVector::from_string("TUA").to_string() == "TUA");
}

TEST_CASE("known subgraph excludes ambiguous and blocked edges") {
  auto g = make_g1();

  SUBCASE("no stochastic edges means everything is known") {
    StochasticGraph flat({{0, 0, 0}, {1, 0, 0}}, {{0, 1, 1.0, 0.0}}, 0, {1});
    CHECK(known_subgraph(flat, flat.all_ambiguous()).size() == 1);
  }
  SUBCASE("ambiguous stochastic edge excluded") {
    auto edges = known_subgraph(g, InformationVector::from_string("A"));
    CHECK(edge_pairs(g, edges) ==
          std::set<std::pair<int, int>>{{0, 2}, {1, 3}, {0, 1}});
  }
  SUBCASE("traversable stochastic edge included") {
    auto edges = known_subgraph(g, InformationVector::from_string("T"));
    CHECK(edges.size() == 4);
  }
  SUBCASE("length mismatch rejected") {
    CHECK_THROWS_AS(known_subgraph(g, InformationVector(3)),
                    std::invalid_argument);
  }
}

TEST_CASE("shortest path over edge subsets") {
  auto g = make_g1();

  SUBCASE("identity") {
    auto r = shortest_path(g, all_edges(g), 0, 0);
    REQUIRE(r.has_value());
    CHECK(r->cost == 0.0);
    CHECK(r->path == std::vector<int>{0});
  }
  SUBCASE("deterministic edges only") {
    auto edges = known_subgraph(g, InformationVector::from_string("A"));
    auto r = shortest_path(g, edges, 0, 1);
    REQUIRE(r.has_value());
    CHECK(r->cost == doctest::Approx(10.0));
    CHECK(r->path == std::vector<int>{0, 1});
  }
  SUBCASE("channel open") {
    auto r = shortest_path(g, all_edges(g), 0, 1);
    REQUIRE(r.has_value());
    CHECK(r->cost == doctest::Approx(4.0));
    CHECK(r->path == std::vector<int>{0, 2, 3, 1});
  }
  SUBCASE("unreachable is distinct") {
    auto r = shortest_path(g, {}, 0, 1);
    CHECK_FALSE(r.has_value());
  }
  SUBCASE("unknown node id") {
    CHECK_THROWS_AS(shortest_path(g, all_edges(g), 0, 42),
                    std::invalid_argument);
  }
}

TEST_CASE("reachability under partial knowledge") {
  auto g = make_g1();
  SUBCASE("ambiguous edges count for reachable_set") {
    CHECK(reachable_set(g, 0, InformationVector::from_string("A")) ==
          std::set<int>{1});
    CHECK(reachable_set(g, 0, InformationVector::from_string("U")) ==
          std::set<int>{1});
  }
  SUBCASE("without the long detour the blocked world cuts the target off") {
    StochasticGraph cut(
        {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}},
        {{0, 2, 2.0, 0.0}, {3, 1, 1.0, 0.0}, {2, 3, 1.0, 0.4}}, 0, {1});
    CHECK(reachable_set(cut, 0, InformationVector::from_string("U")) ==
          std::set<int>{});
    CHECK(reachable_set(cut, 0, InformationVector::from_string("A")) ==
          std::set<int>{1});
    CHECK(definitively_reachable_set(cut, 0,
                                     InformationVector::from_string("A")) ==
          std::set<int>{});
  }
  SUBCASE("definitively reachable excludes ambiguous edges") {
    CHECK(definitively_reachable_set(g, 0,
                                     InformationVector::from_string("A")) ==
          std::set<int>{1});
  }
}

TEST_CASE("reachability properties on random instances") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 60; ++trial) {
    auto g = testgen::random_instance(5000 + trial);
    InformationVector info(g.k());
    // random partial refinement
    std::uniform_int_distribution<int> die(0, 2);
    for (std::size_t i = 0; i < g.k(); ++i) {
      int r = die(rng);
      if (r == 1) info = info.refined(i, EdgeState::Traversable);
      if (r == 2) info = info.refined(i, EdgeState::Untraversable);
    }
    for (const Node& n : g.nodes()) {
      auto def = definitively_reachable_set(g, n.id, info);
      auto opt = reachable_set(g, n.id, info);
      for (int t : def) CHECK(opt.count(t) == 1);
    }
    // refining ambiguous -> traversable never shrinks reachable_set;
    // ambiguous -> untraversable never grows it
    for (std::size_t i = 0; i < g.k(); ++i) {
      if (info[i] != EdgeState::Ambiguous) continue;
      auto base = reachable_set(g, g.start(), info);
      auto open = reachable_set(g, g.start(),
                                info.refined(i, EdgeState::Traversable));
      auto shut = reachable_set(g, g.start(),
                                info.refined(i, EdgeState::Untraversable));
      for (int t : base) CHECK(open.count(t) == 1);
      for (int t : shut) CHECK(base.count(t) == 1);
    }
    // triangle inequality over the metric closure
    auto edges = all_edges(g);
    std::vector<std::vector<double>> d(g.nodes().size());
    for (std::size_t i = 0; i < g.nodes().size(); ++i) {
      for (std::size_t j = 0; j < g.nodes().size(); ++j) {
        auto r = shortest_path(g, edges, g.nodes()[i].id, g.nodes()[j].id);
        d[i].push_back(r ? r->cost
                         : std::numeric_limits<double>::infinity());
      }
    }
    for (std::size_t a = 0; a < d.size(); ++a) {
      for (std::size_t b = 0; b < d.size(); ++b) {
        for (std::size_t c = 0; c < d.size(); ++c) {
          CHECK(d[a][c] <= d[a][b] + d[b][c] + 1e-9);
        }
      }
    }
  }
}

TEST_CASE("world probabilities sum to one") {
  for (int trial = 0; trial < 20; ++trial) {
    auto g = testgen::random_instance(6000 + trial);
    KahanSum sum;
    for (const World& w : enumerate_worlds(g)) sum.add(w.probability);
    CHECK(sum.value() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("graph json round trip") {
  auto g = make_g1();
  auto j = graph_to_json(g);
  auto g2 = graph_from_json(j);
  CHECK(g2.nodes().size() == g.nodes().size());
  CHECK(g2.edges().size() == g.edges().size());
  CHECK(g2.start() == g.start());
  CHECK(g2.targets() == g.targets());
  CHECK(g2.k() == g.k());
  CHECK(graph_to_json(g2) == j);

  CHECK_THROWS_AS(graph_from_json(nlohmann::json::parse("{}")),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      graph_from_json(nlohmann::json::parse(
          R"({"nodes":[{"id":0}],"edges":[],"start":1,"targets":[]})")),
      std::invalid_argument);
}
