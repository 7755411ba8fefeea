#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "pcctp/evaluator.hpp"
#include "pcctp/solver.hpp"
#include "pcctp/tsp.hpp"
#include "support/expectimax_oracle.hpp"
#include "support/instance_gen.hpp"
#include "test_fixtures.hpp"

using namespace pcctp;

namespace {

StochasticGraph deterministic_triangle() {
  return StochasticGraph(
      {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}},
      {{0, 1, 4.0, 0.0}, {1, 2, 3.0, 0.0}, {0, 2, 5.0, 0.0}}, 0, {1, 2});
}

const AONode& child_of(const AOTree& tree, int node, std::size_t i) {
  return tree[tree[node].children.at(i).child];
}

}  // namespace

TEST_CASE("size guard rejects oversized instances up front") {
  testgen::InstanceParams p;
  p.min_nodes = 14;
  p.max_nodes = 14;
  p.exact_stochastic = 13;
  auto g = testgen::random_instance(123, p);
  REQUIRE(g.k() == 13);
  CHECK_THROWS_AS(PcctpSolver(g), SizeCapError);
  SolveOptions raised;
  raised.k_cap = 13;
  CHECK_NOTHROW(PcctpSolver(g, raised));
}

TEST_CASE("select_node on a fresh tree returns the root") {
  auto g = make_g1();
  PcctpSolver solver(g);
  CHECK(solver.select_node() == solver.tree().root);
}

TEST_CASE("expanding the g1 root") {
  auto g = make_g1();
  PcctpSolver solver(g);
  int root = solver.tree().root;
  solver.expand(root);
  solver.backprop(root);
  const AOTree& tree = solver.tree();

  // the disambiguation child approached over the short edge, arc cost 2.0
  bool found_and = false, found_leaf = false;
  for (const Arc& arc : tree[root].children) {
    const AONode& c = tree[arc.child];
    if (c.kind == NodeKind::And && c.at == 2 && c.visited == 0) {
      found_and = true;
      CHECK(arc.cost == doctest::Approx(2.0));
      CHECK(c.attempt_edge == 0);
    }
    // the direct tour 0-1-0 as the finishing leaf
    if (c.kind == NodeKind::Leaf) {
      found_leaf = true;
      CHECK(arc.cost == doctest::Approx(20.0));
      CHECK(c.at == 0);
    }
  }
  CHECK(found_and);
  CHECK(found_leaf);

  // the most promising child is the cheap disambiguation, not the tour
  int next = solver.select_node();
  CHECK(tree[next].kind == NodeKind::And);
  CHECK(tree[next].at == 2);

  CHECK_THROWS_AS(solver.expand(root), std::logic_error);
}

TEST_CASE("expand_or with everything known yields a single tour leaf") {
  SUBCASE("no stochastic edges") {
    auto g = deterministic_triangle();
    PcctpSolver solver(g);
    int root = solver.tree().root;
    auto children = solver.expand(root);
    REQUIRE(children.size() == 1);
    const AONode& leaf = solver.tree()[children[0]];
    CHECK(leaf.kind == NodeKind::Leaf);
    CHECK(solver.tree()[root].children[0].cost == doctest::Approx(12.0));
  }
  SUBCASE("g1 after observing the channel blocked") {
    // reach node 2 state first, then walk the U branch to a childless OR
    auto g = make_g1();
    PcctpSolver solver(g);
    solver.backprop(solver.tree().root);
    int root = solver.tree().root;
    solver.expand(root);
    solver.backprop(root);
    int and2 = solver.select_node();
    solver.expand(and2);
    solver.backprop(and2);
    const AOTree& tree = solver.tree();
    int u_branch = tree[and2].children.at(1).child;
    CHECK(tree[u_branch].info.to_string() == "U");
    auto children = solver.expand(u_branch);
    // only the finishing leaf remains: visit 1 over 2-0-1 and return
    REQUIRE(children.size() == 1);
    CHECK(tree[tree[u_branch].children[0].child].kind == NodeKind::Leaf);
    CHECK(tree[u_branch].children[0].cost == doctest::Approx(22.0));
  }
}

TEST_CASE("expand_and produces both outcomes of the attempt") {
  auto g = make_g1();
  PcctpSolver solver(g);
  int root = solver.tree().root;
  solver.expand(root);
  solver.backprop(root);
  int and2 = solver.select_node();
  solver.expand(and2);
  const AOTree& tree = solver.tree();
  REQUIRE(tree[and2].children.size() == 2);

  const Arc& t_arc = tree[and2].children[0];
  const AONode& t_child = tree[t_arc.child];
  CHECK(t_child.at == 3);
  CHECK(t_child.info.to_string() == "T");
  CHECK(t_arc.cost == doctest::Approx(1.0));
  CHECK(t_arc.prob == doctest::Approx(0.6));

  const Arc& u_arc = tree[and2].children[1];
  const AONode& u_child = tree[u_arc.child];
  CHECK(u_child.at == 2);
  CHECK(u_child.info.to_string() == "U");
  CHECK(u_arc.cost == doctest::Approx(1.0));
  CHECK(u_arc.prob == doctest::Approx(0.4));

  CHECK_THROWS_AS(solver.expand(and2), std::logic_error);
}

TEST_CASE("a certainly blocked edge keeps both branches for shape") {
  StochasticGraph g(
      {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}},
      {{0, 2, 2.0, 0.0},
       {3, 1, 1.0, 0.0},
       {0, 1, 10.0, 0.0},
       {2, 3, 1.0, 1.0}},
      0, {1});
  PcctpSolver solver(g);
  auto res = solver.solve();
  REQUIRE(res.status == SolveStatus::Solved);
  // attempting the dead channel can never help: policy is the direct tour
  CHECK(res.expected_cost == doctest::Approx(20.0));
  // any AND node expanded for it carries probabilities 0 and 1
  for (const AONode& n : res.tree.nodes) {
    if (n.kind != NodeKind::And || n.children.empty()) continue;
    CHECK(n.children[0].prob == doctest::Approx(0.0));
    CHECK(n.children[1].prob == doctest::Approx(1.0));
  }
}

TEST_CASE("backprop arithmetic") {
  auto g = make_g1();
  PcctpSolver solver(g);
  int root = solver.tree().root;
  solver.expand(root);
  solver.backprop(root);
  // after one expansion the root bound includes the 20.0 tour option
  CHECK(solver.tree()[root].f <= 20.0 + 1e-12);

  int and2 = solver.select_node();
  solver.expand(and2);
  solver.backprop(and2);
  const AOTree& tree = solver.tree();
  // AND expectation: children f 5 and 22, probabilities 0.6/0.4, edge cost 1
  CHECK(child_of(tree, and2, 0).f == doctest::Approx(5.0));
  CHECK(child_of(tree, and2, 1).f == doctest::Approx(22.0));
  CHECK(tree[and2].f == doctest::Approx(0.6 * 6.0 + 0.4 * 23.0));
  CHECK(tree[and2].f == doctest::Approx(12.8));
  CHECK_FALSE(tree[and2].solved);
}

TEST_CASE("and nodes are solved exactly when both children are") {
  auto g = make_g1();
  PcctpSolver solver(g);
  auto res = solver.solve();
  for (const AONode& n : res.tree.nodes) {
    if (n.kind != NodeKind::And || n.children.empty()) continue;
    bool both = res.tree[n.children[0].child].solved &&
                res.tree[n.children[1].child].solved;
    CHECK(n.solved == both);
  }
}

TEST_CASE("select prefers the cheaper unexplored branch") {
  auto g = make_g2();
  PcctpSolver solver(g);
  int root = solver.tree().root;
  solver.expand(root);
  solver.backprop(root);
  // two disambiguation options: left channel from node 2, right from node 4
  int left = solver.select_node();
  CHECK(solver.tree()[left].at == 2);
  solver.expand(left);
  solver.backprop(left);
  // the left branch bound rose above the untouched right branch
  int next = solver.select_node();
  CHECK(solver.tree()[next].at == 4);
}

TEST_CASE("heuristic values") {
  auto g = make_g1();
  PcctpSolver solver(g);

  SUBCASE("terminal state") {
    RobotState s{0, {1}, InformationVector::from_string("U")};
    CHECK(*solver.heuristic(s) == 0.0);
  }
  SUBCASE("no stochastic edges means the exact tour") {
    auto flat = deterministic_triangle();
    PcctpSolver fs(flat);
    RobotState s{0, {}, InformationVector(0)};
    CHECK(*fs.heuristic(s) == doctest::Approx(12.0));
  }
  SUBCASE("root bound uses the optimistic metric") {
    // target 1 is reachable without the channel, so the relaxed plan is the
    // optimistic tour 0-2-3-1 and back: 8.0, a lower bound on f* = 14.8
    RobotState s{0, {}, InformationVector::from_string("A")};
    CHECK(*solver.heuristic(s) == doctest::Approx(8.0));
    CHECK(*solver.heuristic(s) <= 14.8);
  }
  SUBCASE("blocked channel leaves the long detour") {
    RobotState s{2, {}, InformationVector::from_string("U")};
    CHECK(*solver.heuristic(s) == doctest::Approx(22.0));
  }
  SUBCASE("length mismatch") {
    RobotState s{0, {}, InformationVector(3)};
    CHECK_THROWS_AS(solver.heuristic(s), std::invalid_argument);
  }
}

TEST_CASE("solving g1 matches the two-world computation") {
  auto g = make_g1();
  PcctpSolver solver(g);
  auto res = solver.solve();
  REQUIRE(res.status == SolveStatus::Solved);
  CHECK(res.expected_cost == doctest::Approx(14.8).epsilon(1e-12));
  REQUIRE(res.policy.has_value());
  CHECK(res.policy->expected_cost == doctest::Approx(14.8).epsilon(1e-12));

  // policy: attempt the channel; on success tour 0-2-3-1-3-2-0, on failure
  // give up on the channel and take the long edge out and back
  const Policy& p = *res.policy;
  const PolicyNode& root = p.nodes[static_cast<std::size_t>(p.root)];
  REQUIRE(root.kind == NodeKind::Or);
  REQUIRE(root.children.size() == 1);
  const PolicyNode& attempt =
      p.nodes[static_cast<std::size_t>(root.children[0].child)];
  CHECK(attempt.kind == NodeKind::And);
  CHECK(attempt.at == 2);
  CHECK(attempt.attempt_edge == 0);
  int and_nodes = 0, leaves = 0;
  for (const PolicyNode& n : p.nodes) {
    if (n.kind == NodeKind::And) ++and_nodes;
    if (n.kind == NodeKind::Leaf) ++leaves;
  }
  CHECK(and_nodes == 1);
  CHECK(leaves == 2);

  // world traces through the policy
  World open{{EdgeState::Traversable}, 0.6};
  World shut{{EdgeState::Untraversable}, 0.4};
  auto r_open = execute_policy(p, g, open);
  CHECK(r_open.cost == doctest::Approx(8.0));
  CHECK(r_open.trajectory == std::vector<int>{0, 2, 3, 1, 3, 2, 0});
  auto r_shut = execute_policy(p, g, shut);
  CHECK(r_shut.cost == doctest::Approx(25.0));
  CHECK(r_shut.trajectory == std::vector<int>{0, 2, 2, 0, 1, 0});
}

TEST_CASE("solving a deterministic instance is the exact tour") {
  auto g = deterministic_triangle();
  PcctpSolver solver(g);
  auto res = solver.solve();
  CHECK(res.expected_cost == doctest::Approx(12.0));
  // linear chain policy: root, leaf
  CHECK(res.policy->nodes.size() == 2);
}

TEST_CASE("g2 disambiguates the cheaper route first and falls back") {
  auto g = make_g2();
  PcctpSolver solver(g);
  auto res = solver.solve();
  REQUIRE(res.status == SolveStatus::Solved);

  oracle::Expectimax oracle(g);
  CHECK(res.expected_cost == doctest::Approx(oracle.root_value()).epsilon(1e-12));
  CHECK(res.expected_cost == doctest::Approx(9.5).epsilon(1e-12));

  const Policy& p = *res.policy;
  const PolicyNode& root = p.nodes[static_cast<std::size_t>(p.root)];
  const PolicyNode& first =
      p.nodes[static_cast<std::size_t>(root.children[0].child)];
  CHECK(first.kind == NodeKind::And);
  CHECK(first.attempt_edge == 0);  // the left, cheaper channel
  // on failure the policy moves to the other channel
  const PolicyNode& after_fail =
      p.nodes[static_cast<std::size_t>(first.children[1].child)];
  REQUIRE(after_fail.children.size() == 1);
  const PolicyNode& second =
      p.nodes[static_cast<std::size_t>(after_fail.children[0].child)];
  CHECK(second.kind == NodeKind::And);
  CHECK(second.attempt_edge == 1);

  // bound-pruned branches stay out of the policy
  CHECK(p.nodes.size() < res.tree.size());
}

TEST_CASE("extract_policy requires a solved tree") {
  auto g = make_g1();
  PcctpSolver solver(g);
  CHECK_THROWS_AS(solver.extract_policy(), std::logic_error);
}

TEST_CASE("policy json carries states, actions and arcs") {
  auto g = make_g1();
  PcctpSolver solver(g);
  auto res = solver.solve();
  auto j = policy_to_json(*res.policy, g);
  CHECK(j["expected_cost"].get<double>() == doctest::Approx(14.8));
  CHECK(j["k"].get<std::size_t>() == 1);
  REQUIRE(j["nodes"].is_array());
  const auto& root = j["nodes"][static_cast<std::size_t>(
      j["root"].get<int>())];
  CHECK(root["kind"] == "or");
  CHECK(root["state"]["info"] == "A");
  CHECK(root["action"]["type"] == "move_and_attempt");
  CHECK(root["arc_cost"].is_null());
}

TEST_CASE("dot export distinguishes policy, expanded and frontier nodes") {
  auto g = make_g2();
  PcctpSolver solver(g);
  auto res = solver.solve();
  std::string dot = ao_tree_to_dot(res.tree, g);
  CHECK(dot.find("class=\"policy\"") != std::string::npos);
  CHECK(dot.find("class=\"expanded\"") != std::string::npos);
  CHECK(dot.find("class=\"frontier\"") != std::string::npos);
}

TEST_CASE("scaling costs scales the value and keeps the policy shape") {
  for (int trial = 0; trial < 10; ++trial) {
    auto g = testgen::random_instance(9100 + trial);
    const double factor = 3.75;
    std::vector<Edge> scaled = g.edges();
    for (Edge& e : scaled) e.cost *= factor;
    StochasticGraph gs(g.nodes(), scaled, g.start(), g.targets());

    PcctpSolver a(g), b(gs);
    auto ra = a.solve(), rb = b.solve();
    CHECK(rb.expected_cost ==
          doctest::Approx(factor * ra.expected_cost).epsilon(1e-9));
    REQUIRE(ra.policy->nodes.size() == rb.policy->nodes.size());
    for (std::size_t i = 0; i < ra.policy->nodes.size(); ++i) {
      const PolicyNode& na = ra.policy->nodes[i];
      const PolicyNode& nb = rb.policy->nodes[i];
      CHECK(na.kind == nb.kind);
      CHECK(na.at == nb.at);
      CHECK(na.attempt_edge == nb.attempt_edge);
      CHECK(na.info.to_string() == nb.info.to_string());
    }
  }
}

TEST_CASE("solver matches the expectimax oracle on random instances") {
  for (int trial = 0; trial < 60; ++trial) {
    auto g = testgen::random_instance(12000 + trial);
    PcctpSolver solver(g);
    auto res = solver.solve();
    REQUIRE(res.status == SolveStatus::Solved);
    oracle::Expectimax oracle(g);
    CHECK(res.expected_cost ==
          doctest::Approx(oracle.root_value()).epsilon(1e-11));
  }
}

TEST_CASE("root bound only tightens upward") {
  for (int trial = 0; trial < 25; ++trial) {
    auto g = testgen::random_instance(13000 + trial);
    PcctpSolver solver(g);
    double last = -1.0;
    while (!solver.tree()[solver.tree().root].solved) {
      int n = solver.select_node();
      solver.expand(n);
      solver.backprop(n);
      double f = solver.tree()[solver.tree().root].f;
      CHECK(f >= last - 1e-9);
      last = f;
    }
  }
}

TEST_CASE("heuristic is admissible against the oracle") {
  for (int trial = 0; trial < 25; ++trial) {
    auto g = testgen::random_instance(14000 + trial);
    PcctpSolver solver(g);
    auto res = solver.solve();
    oracle::Expectimax oracle(g);
    for (const AONode& n : res.tree.nodes) {
      RobotState s{n.at, visited_ids(g, n.visited), n.info};
      auto h = solver.heuristic(s);
      if (!h) continue;
      double exact = oracle.value(s.at, s.visited, s.info.to_string());
      CHECK(*h <= exact + 1e-9);
    }
  }
}

TEST_CASE("select_node refuses a solved tree") {
  auto g = deterministic_triangle();
  PcctpSolver solver(g);
  solver.solve();
  CHECK_THROWS_AS(solver.select_node(), std::logic_error);
}
