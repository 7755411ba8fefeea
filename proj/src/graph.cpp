#include "pcctp/graph.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <unordered_set>

namespace pcctp {

char to_char(EdgeState s) {
  switch (s) {
    case EdgeState::Ambiguous:
      return 'A';
    case EdgeState::Traversable:
      return 'T';
    case EdgeState::Untraversable:
      return 'U';
  }
  return '?';
}

EdgeState edge_state_from_char(char c) {
  switch (c) {
    case 'A':
      return EdgeState::Ambiguous;
    case 'T':
      return EdgeState::Traversable;
    case 'U':
      return EdgeState::Untraversable;
    default:
      throw std::invalid_argument(std::string("unknown edge state '") + c +
                                  "'");
  }
}

bool InformationVector::all_ambiguous() const {
  return std::all_of(states_.begin(), states_.end(),
                     [](EdgeState s) { return s == EdgeState::Ambiguous; });
}

std::size_t InformationVector::ambiguous_count() const {
  return static_cast<std::size_t>(
      std::count(states_.begin(), states_.end(), EdgeState::Ambiguous));
}

InformationVector InformationVector::refined(std::size_t i,
                                             EdgeState s) const {
  if (i >= states_.size()) {
    throw std::out_of_range("stochastic edge index out of range");
  }
  if (states_[i] != EdgeState::Ambiguous) {
    throw std::logic_error("stochastic edge already disambiguated");
  }
  if (s == EdgeState::Ambiguous) {
    throw std::invalid_argument("refinement must resolve the edge");
  }
  InformationVector out = *this;
  out.states_[i] = s;
  return out;
}

std::uint64_t InformationVector::encode() const {
  std::uint64_t code = 0;
  for (auto it = states_.rbegin(); it != states_.rend(); ++it) {
    code = code * 3 + static_cast<std::uint64_t>(*it);
  }
  return code;
}

std::string InformationVector::to_string() const {
  std::string s;
  s.reserve(states_.size());
  for (EdgeState e : states_) s.push_back(to_char(e));
  return s;
}

InformationVector InformationVector::from_string(const std::string& s) {
  InformationVector out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    out.states_[i] = edge_state_from_char(s[i]);
  }
  return out;
}

std::string World::to_string() const {
  std::string s;
  s.reserve(assignment.size());
  for (EdgeState e : assignment) s.push_back(to_char(e));
  return s;
}

StochasticGraph::StochasticGraph(std::vector<Node> nodes,
                                 std::vector<Edge> edges, int start,
                                 std::vector<int> targets)
    : nodes_(std::move(nodes)),
      edges_(std::move(edges)),
      start_(start),
      targets_(std::move(targets)) {
  std::sort(targets_.begin(), targets_.end());
  targets_.erase(std::unique(targets_.begin(), targets_.end()),
                 targets_.end());
  build_index();
  validate();
}

void StochasticGraph::build_index() {
  int lo = 0, hi = -1;
  if (!nodes_.empty()) {
    lo = nodes_.front().id;
    hi = nodes_.front().id;
    for (const Node& n : nodes_) {
      lo = std::min(lo, n.id);
      hi = std::max(hi, n.id);
    }
  }
  min_id_ = lo;
  id_to_index_.assign(static_cast<std::size_t>(hi - lo + 1), -1);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    std::size_t slot = static_cast<std::size_t>(nodes_[i].id - lo);
    if (id_to_index_[slot] != -1) {
      throw std::invalid_argument("duplicate node id " +
                                  std::to_string(nodes_[i].id));
    }
    id_to_index_[slot] = static_cast<int>(i);
  }
  adjacency_.assign(nodes_.size(), {});
  stochastic_index_.clear();
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    adjacency_[static_cast<std::size_t>(node_index(edges_[e].u))].push_back(e);
    adjacency_[static_cast<std::size_t>(node_index(edges_[e].v))].push_back(e);
    if (edges_[e].stochastic()) stochastic_index_.push_back(e);
  }
}

void StochasticGraph::validate() const {
  std::unordered_set<std::uint64_t> seen_pairs;
  for (const Edge& e : edges_) {
    if (!has_node(e.u) || !has_node(e.v)) {
      throw std::invalid_argument("edge references unknown node");
    }
    if (e.u == e.v) {
      throw std::invalid_argument("self-loop edge on node " +
                                  std::to_string(e.u));
    }
    if (!(e.cost >= 0.0)) {
      throw std::invalid_argument("edge cost must be >= 0");
    }
    if (!(e.block_prob >= 0.0 && e.block_prob <= 1.0)) {
      throw std::invalid_argument("block_prob must be in [0,1]");
    }
    int a = node_index(e.u), b = node_index(e.v);
    std::uint64_t key =
        (static_cast<std::uint64_t>(std::min(a, b)) << 32) |
        static_cast<std::uint64_t>(std::max(a, b));
    if (!seen_pairs.insert(key).second) {
      throw std::invalid_argument("duplicate edge between nodes " +
                                  std::to_string(e.u) + " and " +
                                  std::to_string(e.v));
    }
  }
  if (!has_node(start_)) {
    throw std::invalid_argument("start node not in graph");
  }
  for (int t : targets_) {
    if (!has_node(t)) {
      throw std::invalid_argument("target node " + std::to_string(t) +
                                  " not in graph");
    }
  }
}

bool StochasticGraph::has_node(int id) const {
  std::size_t slot = static_cast<std::size_t>(id - min_id_);
  return id >= min_id_ && slot < id_to_index_.size() &&
         id_to_index_[slot] >= 0;
}

int StochasticGraph::node_index(int id) const {
  if (!has_node(id)) {
    throw std::invalid_argument("unknown node id " + std::to_string(id));
  }
  return id_to_index_[static_cast<std::size_t>(id - min_id_)];
}

const Node& StochasticGraph::node(int id) const {
  return nodes_[static_cast<std::size_t>(node_index(id))];
}

bool StochasticGraph::is_target(int node) const {
  return std::binary_search(targets_.begin(), targets_.end(), node);
}

const std::vector<std::size_t>& StochasticGraph::incident(int node) const {
  return adjacency_[static_cast<std::size_t>(node_index(node))];
}

std::vector<std::size_t> known_subgraph(const StochasticGraph& g,
                                        const InformationVector& info) {
  if (info.size() != g.k()) {
    throw std::invalid_argument("information vector length does not match k");
  }
  std::vector<std::size_t> out;
  std::size_t si = 0;
  for (std::size_t e = 0; e < g.edges().size(); ++e) {
    if (!g.edges()[e].stochastic()) {
      out.push_back(e);
    } else {
      if (info[si] == EdgeState::Traversable) out.push_back(e);
      ++si;
    }
  }
  return out;
}

std::vector<std::size_t> optimistic_subgraph(const StochasticGraph& g,
                                             const InformationVector& info) {
  if (info.size() != g.k()) {
    throw std::invalid_argument("information vector length does not match k");
  }
  std::vector<std::size_t> out;
  std::size_t si = 0;
  for (std::size_t e = 0; e < g.edges().size(); ++e) {
    if (!g.edges()[e].stochastic()) {
      out.push_back(e);
    } else {
      if (info[si] != EdgeState::Untraversable) out.push_back(e);
      ++si;
    }
  }
  return out;
}

std::optional<PathResult> shortest_path(const StochasticGraph& g,
                                        const std::vector<std::size_t>& edges,
                                        int from, int to) {
  int src = g.node_index(from);
  int dst = g.node_index(to);
  std::size_t n = g.nodes().size();
  std::vector<std::vector<std::pair<int, double>>> adj(n);
  for (std::size_t e : edges) {
    const Edge& ed = g.edges().at(e);
    int a = g.node_index(ed.u), b = g.node_index(ed.v);
    adj[static_cast<std::size_t>(a)].push_back({b, ed.cost});
    adj[static_cast<std::size_t>(b)].push_back({a, ed.cost});
  }
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(n, kInf);
  std::vector<int> prev(n, -1);
  using Item = std::pair<double, int>;  // (dist, node index)
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
  dist[static_cast<std::size_t>(src)] = 0.0;
  pq.push({0.0, src});
  while (!pq.empty()) {
    auto [d, u] = pq.top();
    pq.pop();
    if (d > dist[static_cast<std::size_t>(u)]) continue;
    for (auto [v, w] : adj[static_cast<std::size_t>(u)]) {
      double nd = d + w;
      if (nd < dist[static_cast<std::size_t>(v)]) {
        dist[static_cast<std::size_t>(v)] = nd;
        prev[static_cast<std::size_t>(v)] = u;
        pq.push({nd, v});
      }
    }
  }
  if (dist[static_cast<std::size_t>(dst)] == kInf) return std::nullopt;
  PathResult res;
  res.cost = dist[static_cast<std::size_t>(dst)];
  for (int cur = dst; cur != -1; cur = prev[static_cast<std::size_t>(cur)]) {
    res.path.push_back(g.nodes()[static_cast<std::size_t>(cur)].id);
  }
  std::reverse(res.path.begin(), res.path.end());
  return res;
}

namespace {

std::set<int> connected_targets(const StochasticGraph& g, int at,
                                const std::vector<std::size_t>& edges) {
  std::size_t n = g.nodes().size();
  std::vector<std::vector<int>> adj(n);
  for (std::size_t e : edges) {
    int a = g.node_index(g.edges()[e].u), b = g.node_index(g.edges()[e].v);
    adj[static_cast<std::size_t>(a)].push_back(b);
    adj[static_cast<std::size_t>(b)].push_back(a);
  }
  std::vector<char> seen(n, 0);
  std::vector<int> stack{g.node_index(at)};
  seen[static_cast<std::size_t>(g.node_index(at))] = 1;
  while (!stack.empty()) {
    int u = stack.back();
    stack.pop_back();
    for (int v : adj[static_cast<std::size_t>(u)]) {
      if (!seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = 1;
        stack.push_back(v);
      }
    }
  }
  std::set<int> out;
  for (int t : g.targets()) {
    if (seen[static_cast<std::size_t>(g.node_index(t))]) out.insert(t);
  }
  return out;
}

}  // namespace

std::set<int> reachable_set(const StochasticGraph& g, int at,
                            const InformationVector& info) {
  return connected_targets(g, at, optimistic_subgraph(g, info));
}

std::set<int> definitively_reachable_set(const StochasticGraph& g, int at,
                                         const InformationVector& info) {
  return connected_targets(g, at, known_subgraph(g, info));
}

}  // namespace pcctp
