#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "pcctp/baselines.hpp"
#include "pcctp/graph.hpp"
#include "pcctp/solver.hpp"

namespace pcctp {

/// Compensated (Kahan) accumulator for probability-weighted sums.
class KahanSum {
 public:
  void add(double x) {
    double y = x - c_;
    double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  double value() const { return s_; }

 private:
  double s_ = 0.0;
  double c_ = 0.0;
};

/// All 2^k worlds in binary counting order (edge 0 is the lowest bit,
/// Traversable before Untraversable). Probabilities multiply per edge.
std::vector<World> enumerate_worlds(const StochasticGraph& g,
                                    std::size_t cap = 12);

/// Walks the policy tree through one world, branching at AND nodes on the
/// true state of the attempted edge.
RunResult execute_policy(const Policy& policy, const StochasticGraph& g,
                         const World& world);

/// Cost of the optimal tour of a planner that knows every edge state:
/// visits exactly the targets reachable in the revealed graph and returns
/// to start. Zero when no target is reachable.
double privileged_cost(const StochasticGraph& g, const World& world);

enum class Algorithm { Pcctp, Greedy, OptimisticTsp, CyclicRouting };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);

struct ReportRow {
  std::string world;       // assignment as a T/U string
  double probability = 0;
  double cost = 0;         // algorithm cost in this world
  double privileged = 0;   // privileged planner cost
  double regret = 0;       // cost - privileged
};

struct EvaluationReport {
  std::string algorithm;
  std::vector<ReportRow> rows;
  double expected_cost = 0;
  double expected_regret = 0;
};

struct EvaluateOptions {
  double blocked_cost_factor = 1.0;
  std::size_t world_cap = 12;
  std::size_t k_cap = 12;
};

/// Exhaustive per-world evaluation of one algorithm against the privileged
/// planner.
EvaluationReport expected_regret(const StochasticGraph& g, Algorithm algo,
                                 const EvaluateOptions& opts = {});

/// Seeded Monte-Carlo estimate of the expected cost for instances beyond the
/// exhaustive cap.
double estimate_expected_cost(const StochasticGraph& g, Algorithm algo,
                              std::size_t samples, std::uint64_t seed,
                              const EvaluateOptions& opts = {});

std::string report_to_csv(const EvaluationReport& report);
nlohmann::ordered_json report_to_json(const EvaluationReport& report);

}  // namespace pcctp
