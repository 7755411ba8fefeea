#include <doctest.h>

#include <sstream>

#include "pcctp/evaluator.hpp"
#include "support/expectimax_oracle.hpp"
#include "support/instance_gen.hpp"
#include "test_fixtures.hpp"

using namespace pcctp;

TEST_CASE("enumerate_worlds") {
  SUBCASE("no stochastic edges yields the single certain world") {
    StochasticGraph g({{0, 0, 0}, {1, 0, 0}}, {{0, 1, 1.0, 0.0}}, 0, {1});
    auto worlds = enumerate_worlds(g);
    REQUIRE(worlds.size() == 1);
    CHECK(worlds[0].probability == 1.0);
  }
  SUBCASE("g1 splits 0.6 / 0.4") {
    auto worlds = enumerate_worlds(make_g1());
    REQUIRE(worlds.size() == 2);
    CHECK(worlds[0].to_string() == "T");
    CHECK(worlds[0].probability == doctest::Approx(0.6));
    CHECK(worlds[1].to_string() == "U");
    CHECK(worlds[1].probability == doctest::Approx(0.4));
  }
  SUBCASE("three fair coins") {
    testgen::InstanceParams p;
    p.exact_stochastic = 3;
    p.min_block_prob = 0.5;
    p.max_block_prob = 0.5;
    auto g = testgen::random_instance(5, p);
    auto worlds = enumerate_worlds(g);
    REQUIRE(worlds.size() == 8);
    for (const World& w : worlds) {
      CHECK(w.probability == doctest::Approx(0.125));
    }
  }
  SUBCASE("cap enforced") {
    testgen::InstanceParams p;
    p.min_nodes = 14;
    p.max_nodes = 14;
    p.exact_stochastic = 13;
    auto g = testgen::random_instance(123, p);
    CHECK_THROWS_AS(enumerate_worlds(g, 12), std::invalid_argument);
  }
}

TEST_CASE("privileged planner knows every edge state") {
  auto g = make_g1();
  CHECK(privileged_cost(g, {{EdgeState::Traversable}, 0.6}) ==
        doctest::Approx(8.0));
  CHECK(privileged_cost(g, {{EdgeState::Untraversable}, 0.4}) ==
        doctest::Approx(20.0));

  // no reachable target: nothing to do
  StochasticGraph marooned(
      {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}},
      {{0, 1, 2.0, 0.5}, {1, 2, 1.0, 0.0}}, 0, {2});
  CHECK(privileged_cost(marooned, {{EdgeState::Untraversable}, 0.5}) == 0.0);
}

TEST_CASE("execute_policy through both g1 worlds") {
  auto g = make_g1();
  PcctpSolver solver(g);
  auto res = solver.solve();
  const Policy& p = *res.policy;
  CHECK(execute_policy(p, g, {{EdgeState::Traversable}, 0.6}).cost ==
        doctest::Approx(8.0));
  CHECK(execute_policy(p, g, {{EdgeState::Untraversable}, 0.4}).cost ==
        doctest::Approx(25.0));

  KahanSum expectation;
  for (const World& w : enumerate_worlds(g)) {
    expectation.add(w.probability * execute_policy(p, g, w).cost);
  }
  CHECK(expectation.value() == doctest::Approx(14.8).epsilon(1e-12));

  World wrong;
  wrong.assignment = {EdgeState::Traversable, EdgeState::Traversable};
  CHECK_THROWS_AS(execute_policy(p, g, wrong), std::invalid_argument);
}

TEST_CASE("g1 expected regret") {
  auto g = make_g1();
  auto report = expected_regret(g, Algorithm::Pcctp);
  CHECK(report.algorithm == "pcctp");
  REQUIRE(report.rows.size() == 2);
  CHECK(report.rows[0].regret == doctest::Approx(0.0));
  CHECK(report.rows[1].regret == doctest::Approx(5.0));
  CHECK(report.expected_regret == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(report.expected_cost == doctest::Approx(14.8).epsilon(1e-12));

  auto greedy = expected_regret(g, Algorithm::Greedy);
  CHECK(greedy.expected_regret >= report.expected_regret - 1e-9);
}

TEST_CASE("report aggregates equal the weighted row sums") {
  for (int trial = 0; trial < 12; ++trial) {
    auto g = testgen::random_instance(23000 + trial);
    for (Algorithm algo : {Algorithm::Pcctp, Algorithm::Greedy,
                           Algorithm::OptimisticTsp,
                           Algorithm::CyclicRouting}) {
      auto report = expected_regret(g, algo);
      KahanSum cost, regret, prob;
      for (const ReportRow& r : report.rows) {
        cost.add(r.probability * r.cost);
        regret.add(r.probability * r.regret);
        prob.add(r.probability);
        CHECK(r.regret >= -1e-9);
        CHECK(r.regret == doctest::Approx(r.cost - r.privileged));
      }
      CHECK(prob.value() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(report.expected_cost == doctest::Approx(cost.value()).epsilon(1e-12));
      CHECK(report.expected_regret ==
            doctest::Approx(regret.value()).epsilon(1e-12));
    }
  }
}

TEST_CASE("pcctp expected cost equals the solver value") {
  for (int trial = 0; trial < 12; ++trial) {
    auto g = testgen::random_instance(24000 + trial);
    PcctpSolver solver(g);
    auto res = solver.solve();
    auto report = expected_regret(g, Algorithm::Pcctp);
    CHECK(report.expected_cost ==
          doctest::Approx(res.expected_cost).epsilon(1e-11));
  }
}

TEST_CASE("csv and json report serialization") {
  auto g = make_g1();
  auto report = expected_regret(g, Algorithm::Pcctp);
  std::string csv = report_to_csv(report);
  CHECK(csv.find("world,probability,cost,privileged_cost,regret\n") == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);  // header + 2 rows
  auto j = report_to_json(report);
  CHECK(j["algorithm"] == "pcctp");
  CHECK(j["worlds"].size() == 2);
  CHECK(j["expected_regret"].get<double>() == doctest::Approx(2.0));
}

TEST_CASE("seeded monte carlo estimate approaches the exact value") {
  auto g = make_g1();
  double est1 = estimate_expected_cost(g, Algorithm::Pcctp, 4000, 7);
  double est2 = estimate_expected_cost(g, Algorithm::Pcctp, 4000, 7);
  CHECK(est1 == est2);  // fixed seed, bit-stable
  CHECK(est1 == doctest::Approx(14.8).epsilon(0.05));
}

TEST_CASE("algorithm names round trip") {
  for (Algorithm a : {Algorithm::Pcctp, Algorithm::Greedy,
                      Algorithm::OptimisticTsp, Algorithm::CyclicRouting}) {
    CHECK(algorithm_from_string(to_string(a)) == a);
  }
  CHECK_THROWS_AS(algorithm_from_string("dijkstra"), std::invalid_argument);
}
