#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace pcctp {

/// Knowledge state of a single stochastic edge.
enum class EdgeState : std::uint8_t { Ambiguous, Traversable, Untraversable };

char to_char(EdgeState s);
EdgeState edge_state_from_char(char c);

struct Node {
  int id = 0;
  double x = 0.0;
  double y = 0.0;
};

struct Edge {
  int u = 0;
  int v = 0;
  double cost = 0.0;
  double block_prob = 0.0;

  bool stochastic() const { return block_prob > 0.0; }
  int other(int node) const { return node == u ? v : u; }
  bool touches(int node) const { return node == u || node == v; }
};

/// Per-stochastic-edge knowledge vector. Length is always the number of
/// stochastic edges of the graph it belongs to. States only refine from
/// Ambiguous to Traversable/Untraversable, never back.
class InformationVector {
 public:
  InformationVector() = default;
  explicit InformationVector(std::size_t k)
      : states_(k, EdgeState::Ambiguous) {}

  std::size_t size() const { return states_.size(); }
  EdgeState operator[](std::size_t i) const { return states_.at(i); }

  bool all_ambiguous() const;
  std::size_t ambiguous_count() const;

  /// Returns a copy with stochastic edge `i` resolved to `s`. Throws if the
  /// edge is already resolved or `s` is Ambiguous.
  InformationVector refined(std::size_t i, EdgeState s) const;

  /// Base-3 encoding, unique per vector for k <= 20.
  std::uint64_t encode() const;

  std::string to_string() const;
  static InformationVector from_string(const std::string& s);

  bool operator==(const InformationVector& o) const {
    return states_ == o.states_;
  }

 private:
  std::vector<EdgeState> states_;
};

struct RobotState {
  int at = 0;
  std::set<int> visited;
  InformationVector info;
};

/// One full assignment of traversability to every stochastic edge.
struct World {
  std::vector<EdgeState> assignment;  // Traversable or Untraversable only
  double probability = 1.0;

  bool blocked(std::size_t i) const {
    return assignment.at(i) == EdgeState::Untraversable;
  }
  std::string to_string() const;
};

/// Undirected graph with per-edge cost (meters) and blocking probability.
/// Immutable after construction; all query operations are const.
class StochasticGraph {
 public:
  StochasticGraph() = default;
  StochasticGraph(std::vector<Node> nodes, std::vector<Edge> edges, int start,
                  std::vector<int> targets);

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  int start() const { return start_; }
  const std::vector<int>& targets() const { return targets_; }
  bool is_target(int node) const;

  /// Number of stochastic edges.
  std::size_t k() const { return stochastic_index_.size(); }

  /// Edge index (into edges()) of the i-th stochastic edge.
  std::size_t stochastic_edge(std::size_t i) const {
    return stochastic_index_.at(i);
  }
  const std::vector<std::size_t>& stochastic_index() const {
    return stochastic_index_;
  }

  bool has_node(int id) const;
  const Node& node(int id) const;
  int node_index(int id) const;

  /// Edge indices incident to `node`.
  const std::vector<std::size_t>& incident(int node) const;

  InformationVector all_ambiguous() const {
    return InformationVector(k());
  }

 private:
  void validate() const;
  void build_index();

  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  int start_ = 0;
  std::vector<int> targets_;  // sorted, unique
  std::vector<std::size_t> stochastic_index_;
  std::vector<int> id_to_index_;  // dense map, -1 for absent
  int min_id_ = 0;
  std::vector<std::vector<std::size_t>> adjacency_;  // by node index
};

struct PathResult {
  double cost = 0.0;
  std::vector<int> path;  // node ids, includes both endpoints
};

/// Edges usable without further disambiguation: deterministic edges plus
/// stochastic edges known Traversable.
std::vector<std::size_t> known_subgraph(const StochasticGraph& g,
                                        const InformationVector& info);

/// Edges not known Untraversable (deterministic, Traversable or Ambiguous).
std::vector<std::size_t> optimistic_subgraph(const StochasticGraph& g,
                                             const InformationVector& info);

/// Dijkstra over the given edge subset. Unreachable is a distinct result,
/// never a sentinel cost. Ties are broken toward lower node ids so paths are
/// reproducible.
std::optional<PathResult> shortest_path(const StochasticGraph& g,
                                        const std::vector<std::size_t>& edges,
                                        int from, int to);

/// Targets connected to `at` through edges not known Untraversable.
std::set<int> reachable_set(const StochasticGraph& g, int at,
                            const InformationVector& info);

/// Targets connected to `at` through known edges only (Ambiguous excluded).
std::set<int> definitively_reachable_set(const StochasticGraph& g, int at,
                                         const InformationVector& info);

}  // namespace pcctp
