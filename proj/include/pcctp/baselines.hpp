#pragma once

#include <utility>
#include <vector>

#include "pcctp/graph.hpp"

namespace pcctp {

/// Reveals true edge states on demand and records every query. Repeated
/// queries of the same edge always return the same state.
class WorldOracle {
 public:
  explicit WorldOracle(World world);

  std::size_t k() const { return world_.assignment.size(); }
  EdgeState query(std::size_t stochastic_index);
  const std::vector<std::pair<std::size_t, EdgeState>>& log() const {
    return log_;
  }

 private:
  World world_;
  std::vector<std::pair<std::size_t, EdgeState>> log_;
};

struct BaselineOptions {
  double blocked_cost_factor = 1.0;
};

struct RunResult {
  double cost = 0.0;
  std::vector<int> trajectory;  // node ids, starts and ends at start
};

/// Repeatedly heads to the nearest unvisited target assuming every ambiguous
/// edge is traversable, disambiguating edges it runs into and giving up on
/// targets that become unreachable.
RunResult run_greedy(const StochasticGraph& g, WorldOracle& oracle,
                     const BaselineOptions& opts = {});

/// Like greedy, but follows the exact optimal optimistic tour over the
/// remaining targets, replanned after every disambiguation or visit.
RunResult run_optimistic_tsp(const StochasticGraph& g, WorldOracle& oracle,
                             const BaselineOptions& opts = {});

/// Fixed target sequence computed once from an exact tour; targets are
/// attempted in sequence order, skipped when proven unreachable.
RunResult run_cyclic_routing(const StochasticGraph& g, WorldOracle& oracle,
                             const BaselineOptions& opts = {});

}  // namespace pcctp
