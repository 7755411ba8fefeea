#include "pcctp/baselines.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "pcctp/tsp.hpp"

namespace pcctp {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

WorldOracle::WorldOracle(World world) : world_(std::move(world)) {
  for (EdgeState s : world_.assignment) {
    if (s == EdgeState::Ambiguous) {
      throw std::invalid_argument("world assignment may not be ambiguous");
    }
  }
}

EdgeState WorldOracle::query(std::size_t stochastic_index) {
  EdgeState s = world_.assignment.at(stochastic_index);
  log_.push_back({stochastic_index, s});
  return s;
}

namespace {

/// Shared machinery for the online baselines: position, knowledge, visited
/// bookkeeping and route execution with disambiguation en route.
class OnlineRun {
 public:
  OnlineRun(const StochasticGraph& g, WorldOracle& oracle,
            const BaselineOptions& opts)
      : g_(g), oracle_(oracle), opts_(opts), info_(g.k()), at_(g.start()) {
    if (oracle.k() != g.k()) {
      throw std::invalid_argument("world does not match graph");
    }
    trajectory_.push_back(at_);
    visit_if_target(at_);
    newly_visited_ = false;
  }

  int at() const { return at_; }
  const InformationVector& info() const { return info_; }
  double cost() const { return cost_; }

  std::vector<int> unvisited_reachable() const {
    std::vector<int> out;
    for (int t : reachable_set(g_, at_, info_)) {
      if (!visited_.count(t)) out.push_back(t);
    }
    return out;
  }

  bool reachable(int target) const {
    auto r = reachable_set(g_, at_, info_);
    return r.count(target) > 0;
  }

  bool is_visited(int t) const { return visited_.count(t) > 0; }

  /// Optimistic distance matrix over the given node ids.
  DistanceMatrix optimistic_matrix(const std::vector<int>& ids) const {
    DistanceMatrix d(ids.size(), std::vector<double>(ids.size(), kInf));
    auto edges = optimistic_subgraph(g_, info_);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      for (std::size_t j = 0; j < ids.size(); ++j) {
        if (i == j) {
          d[i][j] = 0.0;
          continue;
        }
        auto p = shortest_path(g_, edges, ids[i], ids[j]);
        d[i][j] = p ? p->cost : kInf;
      }
    }
    return d;
  }

  double optimistic_distance(int to) const {
    auto p = shortest_path(g_, optimistic_subgraph(g_, info_), at_, to);
    return p ? p->cost : kInf;
  }

  /// Follows the optimistic shortest path towards `dest` until a target is
  /// visited or a stochastic edge is disambiguated. Returns false when no
  /// such event happened because `dest` was unreachable.
  bool advance_towards(int dest) {
    auto route = shortest_path(g_, optimistic_subgraph(g_, info_), at_, dest);
    if (!route) return false;
    const auto& path = route->path;
    for (std::size_t i = 1; i < path.size(); ++i) {
      int next = path[i];
      std::size_t e = find_edge(path[i - 1], next);
      const Edge& ed = g_.edges()[e];
      int si = stochastic_index_of(e);
      if (si >= 0 && info_[static_cast<std::size_t>(si)] ==
                         EdgeState::Ambiguous) {
        EdgeState s = oracle_.query(static_cast<std::size_t>(si));
        info_ = info_.refined(static_cast<std::size_t>(si), s);
        if (s == EdgeState::Traversable) {
          cost_ += ed.cost;
          move_to(next);
        } else {
          cost_ += ed.cost * opts_.blocked_cost_factor;
          trajectory_.push_back(at_);  // bounced attempt
        }
        return true;
      }
      cost_ += ed.cost;
      move_to(next);
      if (newly_visited_) {
        newly_visited_ = false;
        return true;
      }
    }
    return true;  // arrived without events (dest not a target: plain move)
  }

  /// Walks home over edges of known state. Must be called when every
  /// reachable target is visited.
  void return_home() {
    if (at_ == g_.start()) return;
    auto route = shortest_path(g_, known_subgraph(g_, info_), at_, g_.start());
    if (!route) {
      throw std::logic_error("no known route back to start");
    }
    for (std::size_t i = 1; i < route->path.size(); ++i) {
      std::size_t e = find_edge(route->path[i - 1], route->path[i]);
      cost_ += g_.edges()[e].cost;
      move_to(route->path[i]);
    }
  }

  RunResult finish() && {
    return RunResult{cost_, std::move(trajectory_)};
  }

 private:
  void visit_if_target(int node) {
    if (g_.is_target(node) && visited_.insert(node).second) {
      newly_visited_ = true;
    }
  }

  void move_to(int node) {
    at_ = node;
    trajectory_.push_back(node);
    visit_if_target(node);
  }

  std::size_t find_edge(int u, int v) const {
    for (std::size_t e : g_.incident(u)) {
      if (g_.edges()[e].touches(v)) return e;
    }
    throw std::logic_error("route uses a nonexistent edge");
  }

  int stochastic_index_of(std::size_t edge) const {
    const auto& idx = g_.stochastic_index();
    auto it = std::find(idx.begin(), idx.end(), edge);
    return it == idx.end() ? -1 : static_cast<int>(it - idx.begin());
  }

  const StochasticGraph& g_;
  WorldOracle& oracle_;
  BaselineOptions opts_;
  InformationVector info_;
  int at_;
  double cost_ = 0.0;
  std::set<int> visited_;
  std::vector<int> trajectory_;
  bool newly_visited_ = false;
};

}  // namespace

RunResult run_greedy(const StochasticGraph& g, WorldOracle& oracle,
                     const BaselineOptions& opts) {
  OnlineRun run(g, oracle, opts);
  while (true) {
    std::vector<int> candidates = run.unvisited_reachable();
    if (candidates.empty()) break;
    int best = -1;
    double best_d = kInf;
    for (int t : candidates) {
      double d = run.optimistic_distance(t);
      if (d < best_d || (d == best_d && (best < 0 || t < best))) {
        best = t;
        best_d = d;
      }
    }
    if (best < 0) break;  // defensive: nothing reachable even optimistically
    run.advance_towards(best);
  }
  run.return_home();
  return std::move(run).finish();
}

RunResult run_optimistic_tsp(const StochasticGraph& g, WorldOracle& oracle,
                             const BaselineOptions& opts) {
  OnlineRun run(g, oracle, opts);
  while (true) {
    std::vector<int> candidates = run.unvisited_reachable();
    if (candidates.empty()) break;
    // Exact tour over the remaining targets in the optimistic metric,
    // starting here and ending at start; head for its first stop.
    std::vector<int> ids{run.at()};
    std::vector<int> required;
    for (int t : candidates) {
      required.push_back(static_cast<int>(ids.size()));
      ids.push_back(t);
    }
    ids.push_back(g.start());
    DistanceMatrix d = run.optimistic_matrix(ids);
    auto tour = path_tsp_order(d, 0, required,
                               static_cast<int>(ids.size()) - 1);
    if (!tour) break;  // defensive: candidates were reachable
    int first_stop = ids[static_cast<std::size_t>(tour->second.front())];
    run.advance_towards(first_stop);
  }
  run.return_home();
  return std::move(run).finish();
}

RunResult run_cyclic_routing(const StochasticGraph& g, WorldOracle& oracle,
                             const BaselineOptions& opts) {
  OnlineRun run(g, oracle, opts);
  // Fixed visiting sequence from an exact optimistic tour computed once.
  std::vector<int> sequence;
  {
    std::vector<int> ids{g.start()};
    std::vector<int> required;
    for (int t : g.targets()) {
      if (t == g.start()) continue;
      required.push_back(static_cast<int>(ids.size()));
      ids.push_back(t);
    }
    DistanceMatrix d = run.optimistic_matrix(ids);
    auto tour = path_tsp_order(d, 0, required, 0);
    if (tour) {
      for (int ix : tour->second) {
        sequence.push_back(ids[static_cast<std::size_t>(ix)]);
      }
    } else {
      // Disconnected even optimistically; keep a deterministic order anyway.
      for (int t : g.targets()) {
        if (t != g.start()) sequence.push_back(t);
      }
    }
  }
  for (int target : sequence) {
    // Persist with each target until it is visited or proven unreachable.
    while (!run.is_visited(target) && run.reachable(target)) {
      if (!run.advance_towards(target)) break;
    }
  }
  run.return_home();
  return std::move(run).finish();
}

}  // namespace pcctp
