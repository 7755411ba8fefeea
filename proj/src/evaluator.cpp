#include "pcctp/evaluator.hpp"

#include <random>
#include <sstream>
#include <stdexcept>

#include "pcctp/tsp.hpp"

namespace pcctp {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

std::vector<World> enumerate_worlds(const StochasticGraph& g,
                                    std::size_t cap) {
  std::size_t k = g.k();
  if (k > cap) {
    throw std::invalid_argument(
        "instance has " + std::to_string(k) +
        " stochastic edges, exhaustive enumeration capped at " +
        std::to_string(cap));
  }
  std::vector<World> worlds;
  worlds.reserve(std::size_t{1} << k);
  for (std::size_t bits = 0; bits < (std::size_t{1} << k); ++bits) {
    World w;
    w.assignment.resize(k);
    double p = 1.0;
    for (std::size_t i = 0; i < k; ++i) {
      const Edge& e = g.edges()[g.stochastic_edge(i)];
      bool blocked = (bits >> i) & 1;
      w.assignment[i] =
          blocked ? EdgeState::Untraversable : EdgeState::Traversable;
      p *= blocked ? e.block_prob : 1.0 - e.block_prob;
    }
    w.probability = p;
    worlds.push_back(std::move(w));
  }
  return worlds;
}

RunResult execute_policy(const Policy& policy, const StochasticGraph& g,
                         const World& world) {
  if (world.assignment.size() != policy.k) {
    throw std::invalid_argument("world does not match policy");
  }
  RunResult run;
  int cur = policy.root;
  run.trajectory.push_back(policy.nodes[static_cast<std::size_t>(cur)].at);
  while (true) {
    const PolicyNode& n = policy.nodes[static_cast<std::size_t>(cur)];
    if (n.kind == NodeKind::Leaf) break;
    const PolicyArc* taken = nullptr;
    if (n.kind == NodeKind::Or) {
      taken = &n.children.at(0);
    } else {
      bool blocked = world.blocked(static_cast<std::size_t>(n.attempt_edge));
      taken = &n.children.at(blocked ? 1 : 0);
    }
    run.cost += taken->cost;
    for (std::size_t i = 1; i < taken->via.size(); ++i) {
      run.trajectory.push_back(taken->via[i]);
    }
    if (taken->via.size() <= 1 && !taken->via.empty()) {
      // bounced attempt: position unchanged
      run.trajectory.push_back(taken->via.back());
    }
    cur = taken->child;
  }
  return run;
}

double privileged_cost(const StochasticGraph& g, const World& world) {
  if (world.assignment.size() != g.k()) {
    throw std::invalid_argument("world does not match graph");
  }
  InformationVector info(g.k());
  for (std::size_t i = 0; i < g.k(); ++i) {
    info = info.refined(i, world.assignment[i]);
  }
  std::vector<std::size_t> open = known_subgraph(g, info);
  std::set<int> reachable = definitively_reachable_set(g, g.start(), info);
  std::vector<int> ids{g.start()};
  std::vector<int> required;
  for (int t : reachable) {
    if (t == g.start()) continue;
    required.push_back(static_cast<int>(ids.size()));
    ids.push_back(t);
  }
  if (required.empty()) return 0.0;
  DistanceMatrix d(ids.size(), std::vector<double>(ids.size(), kInf));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = 0; j < ids.size(); ++j) {
      if (i == j) {
        d[i][j] = 0.0;
        continue;
      }
      auto p = shortest_path(g, open, ids[i], ids[j]);
      if (p) d[i][j] = p->cost;
    }
  }
  auto tour = path_tsp(d, 0, required, 0);
  if (!tour) {
    throw std::logic_error("reachable targets must admit a tour");
  }
  return *tour;
}

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Pcctp:
      return "pcctp";
    case Algorithm::Greedy:
      return "greedy";
    case Algorithm::OptimisticTsp:
      return "tsp";
    case Algorithm::CyclicRouting:
      return "cr";
  }
  return "?";
}

Algorithm algorithm_from_string(const std::string& s) {
  if (s == "pcctp") return Algorithm::Pcctp;
  if (s == "greedy") return Algorithm::Greedy;
  if (s == "tsp" || s == "optimistic-tsp") return Algorithm::OptimisticTsp;
  if (s == "cr" || s == "cyclic-routing") return Algorithm::CyclicRouting;
  throw std::invalid_argument("unknown algorithm: " + s);
}

namespace {

double world_cost(const StochasticGraph& g, Algorithm algo,
                  const Policy* policy, const World& w,
                  const EvaluateOptions& opts) {
  BaselineOptions bopts{opts.blocked_cost_factor};
  switch (algo) {
    case Algorithm::Pcctp: {
      return execute_policy(*policy, g, w).cost;
    }
    case Algorithm::Greedy: {
      WorldOracle oracle(w);
      return run_greedy(g, oracle, bopts).cost;
    }
    case Algorithm::OptimisticTsp: {
      WorldOracle oracle(w);
      return run_optimistic_tsp(g, oracle, bopts).cost;
    }
    case Algorithm::CyclicRouting: {
      WorldOracle oracle(w);
      return run_cyclic_routing(g, oracle, bopts).cost;
    }
  }
  throw std::logic_error("unhandled algorithm");
}

}  // namespace

EvaluationReport expected_regret(const StochasticGraph& g, Algorithm algo,
                                 const EvaluateOptions& opts) {
  std::optional<Policy> policy;
  if (algo == Algorithm::Pcctp) {
    SolveOptions sopts;
    sopts.blocked_cost_factor = opts.blocked_cost_factor;
    sopts.k_cap = opts.k_cap;
    PcctpSolver solver(g, sopts);
    SolveResult res = solver.solve();
    if (res.status != SolveStatus::Solved) {
      throw NoSolutionError("instance has no solution");
    }
    policy = std::move(*res.policy);
  }

  EvaluationReport report;
  report.algorithm = to_string(algo);
  KahanSum cost_sum, regret_sum;
  for (const World& w : enumerate_worlds(g, opts.world_cap)) {
    ReportRow row;
    row.world = w.to_string();
    row.probability = w.probability;
    row.cost = world_cost(g, algo, policy ? &*policy : nullptr, w, opts);
    row.privileged = privileged_cost(g, w);
    row.regret = row.cost - row.privileged;
    cost_sum.add(w.probability * row.cost);
    regret_sum.add(w.probability * row.regret);
    report.rows.push_back(std::move(row));
  }
  report.expected_cost = cost_sum.value();
  report.expected_regret = regret_sum.value();
  return report;
}

double estimate_expected_cost(const StochasticGraph& g, Algorithm algo,
                              std::size_t samples, std::uint64_t seed,
                              const EvaluateOptions& opts) {
  std::optional<Policy> policy;
  if (algo == Algorithm::Pcctp) {
    SolveOptions sopts;
    sopts.blocked_cost_factor = opts.blocked_cost_factor;
    sopts.k_cap = opts.k_cap;
    PcctpSolver solver(g, sopts);
    SolveResult res = solver.solve();
    if (res.status != SolveStatus::Solved) {
      throw NoSolutionError("instance has no solution");
    }
    policy = std::move(*res.policy);
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  KahanSum sum;
  for (std::size_t s = 0; s < samples; ++s) {
    World w;
    w.assignment.resize(g.k());
    w.probability = 1.0;
    for (std::size_t i = 0; i < g.k(); ++i) {
      const Edge& e = g.edges()[g.stochastic_edge(i)];
      w.assignment[i] = unif(rng) < e.block_prob ? EdgeState::Untraversable
                                                 : EdgeState::Traversable;
    }
    sum.add(world_cost(g, algo, policy ? &*policy : nullptr, w, opts));
  }
  return samples == 0 ? 0.0 : sum.value() / static_cast<double>(samples);
}

std::string report_to_csv(const EvaluationReport& report) {
  std::ostringstream out;
  out << "world,probability,cost,privileged_cost,regret\n";
  out.precision(17);
  for (const ReportRow& r : report.rows) {
    out << r.world << "," << r.probability << "," << r.cost << ","
        << r.privileged << "," << r.regret << "\n";
  }
  return out.str();
}

nlohmann::ordered_json report_to_json(const EvaluationReport& report) {
  nlohmann::ordered_json j;
  j["algorithm"] = report.algorithm;
  j["expected_cost"] = report.expected_cost;
  j["expected_regret"] = report.expected_regret;
  j["worlds"] = nlohmann::ordered_json::array();
  for (const ReportRow& r : report.rows) {
    j["worlds"].push_back({{"world", r.world},
                           {"probability", r.probability},
                           {"cost", r.cost},
                           {"privileged_cost", r.privileged},
                           {"regret", r.regret}});
  }
  return j;
}

}  // namespace pcctp
