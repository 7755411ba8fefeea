#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "pcctp/graph.hpp"

namespace pcctp {

enum class NodeKind : std::uint8_t { Or, And, Leaf };

std::string to_string(NodeKind k);

/// Arc of the AO tree. `prob` is negative on arcs leaving OR nodes and the
/// outcome probability on arcs leaving AND nodes. `label_node` records where
/// the move ends before any implicit return leg (used to reconstruct routes
/// at policy extraction).
struct Arc {
  int child = -1;
  double cost = 0.0;
  double prob = -1.0;
  int label_node = -1;
};

struct AONode {
  NodeKind kind = NodeKind::Or;
  int at = 0;
  std::uint32_t visited = 0;  // bitmask over StochasticGraph::targets()
  InformationVector info;
  double f = 0.0;
  bool solved = false;
  int attempt_edge = -1;  // stochastic index, AND nodes only
  int parent = -1;
  int best_child = -1;    // argmin arc index, maintained for OR nodes
  std::vector<Arc> children;

  bool expanded() const { return !children.empty() || kind == NodeKind::Leaf; }
};

struct AOTree {
  std::vector<AONode> nodes;
  int root = 0;

  const AONode& operator[](int i) const {
    return nodes.at(static_cast<std::size_t>(i));
  }
  AONode& operator[](int i) { return nodes.at(static_cast<std::size_t>(i)); }
  std::size_t size() const { return nodes.size(); }
};

std::uint32_t visited_mask(const StochasticGraph& g, const std::set<int>& ids);
std::set<int> visited_ids(const StochasticGraph& g, std::uint32_t mask);

struct PolicyArc {
  int child = -1;
  double cost = 0.0;
  double prob = -1.0;
  std::vector<int> via;
};

/// Contingency tree extracted from a solved AO tree. OR nodes keep exactly
/// the chosen action arc; AND nodes keep both outcome branches, Traversable
/// first.
struct PolicyNode {
  NodeKind kind = NodeKind::Or;
  int at = 0;
  std::uint32_t visited = 0;
  InformationVector info;
  int attempt_edge = -1;
  double f = 0.0;
  std::vector<PolicyArc> children;
};

struct Policy {
  std::vector<PolicyNode> nodes;
  int root = 0;
  double expected_cost = 0.0;
  std::size_t k = 0;
};

struct SolveOptions {
  /// Cost multiplier applied to a failed disambiguation attempt.
  double blocked_cost_factor = 1.0;
  /// Instances with more stochastic edges are rejected up front.
  std::size_t k_cap = 12;
  std::size_t max_iterations = 5'000'000;
};

/// Raised when the instance exceeds the configured stochastic-edge cap.
struct SizeCapError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised by callers that require a solvable instance.
struct NoSolutionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class SolveStatus { Solved, NoSolution };

struct SolveResult {
  SolveStatus status = SolveStatus::Solved;
  AOTree tree;
  std::optional<Policy> policy;
  double expected_cost = 0.0;
  std::size_t iterations = 0;
};

/// Best-first AND-OR search for the minimum expected-cost mission policy.
/// The tree alternates OR nodes (choice of which ambiguous edge to approach
/// and disambiguate, or finishing the remaining tour) and AND nodes (the two
/// outcomes of an attempt). Once every target still reachable is visited the
/// policy returns to start over edges of known state.
class PcctpSolver {
 public:
  explicit PcctpSolver(const StochasticGraph& g, SolveOptions opts = {});

  SolveResult solve();

  const AOTree& tree() const { return tree_; }
  const SolveOptions& options() const { return opts_; }

  /// Descends from the root along the most promising unsolved subtree and
  /// returns an unexpanded node. Throws std::logic_error on a solved tree.
  int select_node() const;

  /// Expands a node in place and returns the indices of the new children.
  std::vector<int> expand(int node);

  /// Recomputes cost-to-go and solved flags from `node` up to the root.
  void backprop(int node);

  /// Admissible lower bound on the cost-to-go of a state: the exact optimal
  /// route, in the metric where every ambiguous edge counts as traversable,
  /// that covers all definitively reachable unvisited targets, reaches one
  /// critical-edge endpoint for each target whose reachability is still
  /// unresolved, and returns to start. nullopt when the relaxed problem is
  /// disconnected.
  std::optional<double> heuristic(const RobotState& state);

  /// Keeps the argmin arc of each OR node and both branches of each AND
  /// node, reconstructing the node routes of each kept arc. Requires a
  /// solved tree.
  Policy extract_policy();

 private:
  struct Closure {
    std::vector<double> dist;         // by node index
    std::vector<int> prev;            // predecessor node index, -1 at source
    std::vector<std::uint32_t> tmask; // targets on the source->v path
  };

  /// Label-correcting tables over (visited subset, location of interest).
  struct LabelTables {
    std::vector<int> hot;             // node ids, ascending
    std::vector<char> amb_endpoint;   // per hot entry
    std::uint32_t reach = 0;
    std::uint32_t base = 0;           // visited on entry, incl. current node
    std::vector<int> free_bits;       // target bit positions still free
    std::vector<std::vector<double>> cost;  // [subset][hot]

    std::size_t compress(std::uint32_t full) const;
    std::uint32_t expand(std::size_t subset) const;
    int hot_index(int id) const;
  };

  void init_root();
  int add_node(AONode n);
  std::vector<int> expand_or(int node);
  std::vector<int> expand_and(int node);
  void recompute(int node);
  int or_best_child(const AONode& n) const;

  LabelTables label_search(int at, std::uint32_t visited,
                           const InformationVector& info);
  std::vector<int> reconstruct_route(const AONode& parent, const Arc& arc,
                                     const AONode& child);

  double heuristic_value(int at, std::uint32_t visited,
                         const InformationVector& info);
  std::vector<std::size_t> critical_edges(int at, int target,
                                          const InformationVector& info);
  const Closure& closure(bool optimistic, const InformationVector& info,
                         int from);
  std::vector<int> closure_path(const Closure& c, int from, int to) const;
  std::uint32_t mask_of(const std::set<int>& ids) const;
  std::uint32_t target_bit(int node) const;
  bool terminal(int at, std::uint32_t visited,
                const InformationVector& info) const;

  struct PairHash {
    std::size_t operator()(const std::pair<std::uint64_t, std::uint64_t>& p)
        const {
      std::size_t h = std::hash<std::uint64_t>{}(p.first);
      return h ^ (std::hash<std::uint64_t>{}(p.second) + 0x9e3779b97f4a7c15ULL +
                  (h << 6) + (h >> 2));
    }
  };
  using Key = std::pair<std::uint64_t, std::uint64_t>;

  const StochasticGraph& g_;
  SolveOptions opts_;
  AOTree tree_;
  std::vector<std::uint32_t> target_bit_by_index_;  // node index -> bit or 0
  std::unordered_map<Key, Closure, PairHash> closure_cache_;
  std::unordered_map<Key, double, PairHash> h_cache_;
  std::unordered_map<Key, std::vector<std::size_t>, PairHash> crit_cache_;
};

nlohmann::ordered_json policy_to_json(const Policy& policy,
                                      const StochasticGraph& g);

/// Graphviz export of the search tree. Nodes carry a `class` attribute:
/// "policy" for nodes on the extracted policy, "expanded" for other interior
/// nodes, "frontier" for nodes never expanded.
std::string ao_tree_to_dot(const AOTree& tree, const StochasticGraph& g);

}  // namespace pcctp
