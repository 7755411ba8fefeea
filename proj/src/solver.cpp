#include "pcctp/solver.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <numeric>
#include <queue>
#include <sstream>

#include "pcctp/tsp.hpp"

namespace pcctp {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

std::string to_string(NodeKind k) {
  switch (k) {
    case NodeKind::Or:
      return "or";
    case NodeKind::And:
      return "and";
    case NodeKind::Leaf:
      return "leaf";
  }
  return "?";
}

std::uint32_t visited_mask(const StochasticGraph& g, const std::set<int>& ids) {
  std::uint32_t mask = 0;
  for (int id : ids) {
    auto it = std::find(g.targets().begin(), g.targets().end(), id);
    if (it == g.targets().end()) {
      throw std::invalid_argument("visited node " + std::to_string(id) +
                                  " is not a target");
    }
    mask |= 1u << (it - g.targets().begin());
  }
  return mask;
}

std::set<int> visited_ids(const StochasticGraph& g, std::uint32_t mask) {
  std::set<int> out;
  for (std::size_t i = 0; i < g.targets().size(); ++i) {
    if (mask & (1u << i)) out.insert(g.targets()[i]);
  }
  return out;
}

PcctpSolver::PcctpSolver(const StochasticGraph& g, SolveOptions opts)
    : g_(g), opts_(opts) {
  if (g_.targets().size() > 31) {
    throw std::invalid_argument("at most 31 targets supported");
  }
  if (g_.k() > 30) {
    throw std::invalid_argument("at most 30 stochastic edges supported");
  }
  if (g_.k() > opts_.k_cap) {
    throw SizeCapError("instance has " + std::to_string(g_.k()) +
                       " stochastic edges, cap is " +
                       std::to_string(opts_.k_cap) +
                       " (raise k_cap to override)");
  }
  target_bit_by_index_.assign(g_.nodes().size(), 0);
  for (std::size_t i = 0; i < g_.targets().size(); ++i) {
    target_bit_by_index_[static_cast<std::size_t>(
        g_.node_index(g_.targets()[i]))] = 1u << i;
  }
  init_root();
}

std::uint32_t PcctpSolver::mask_of(const std::set<int>& ids) const {
  return visited_mask(g_, ids);
}

std::uint32_t PcctpSolver::target_bit(int node) const {
  return target_bit_by_index_[static_cast<std::size_t>(g_.node_index(node))];
}

bool PcctpSolver::terminal(int at, std::uint32_t visited,
                           const InformationVector& info) const {
  if (at != g_.start()) return false;
  std::uint32_t reach = 0;
  for (int t : reachable_set(g_, at, info)) {
    reach |= target_bit(t);
  }
  return (reach & ~visited) == 0;
}

void PcctpSolver::init_root() {
  AONode root;
  root.at = g_.start();
  root.visited = 0;
  root.info = g_.all_ambiguous();
  if (terminal(root.at, root.visited, root.info)) {
    root.kind = NodeKind::Leaf;
    root.f = 0.0;
    root.solved = true;
  } else {
    root.kind = NodeKind::Or;
    root.f = heuristic_value(root.at, root.visited, root.info);
    root.solved = false;
  }
  tree_.nodes.clear();
  tree_.nodes.push_back(std::move(root));
  tree_.root = 0;
}

int PcctpSolver::add_node(AONode n) {
  tree_.nodes.push_back(std::move(n));
  return static_cast<int>(tree_.nodes.size()) - 1;
}

const PcctpSolver::Closure& PcctpSolver::closure(bool optimistic,
                                                 const InformationVector& info,
                                                 int from) {
  Key key{info.encode() * 2 + (optimistic ? 1 : 0),
          static_cast<std::uint64_t>(g_.node_index(from))};
  auto it = closure_cache_.find(key);
  if (it != closure_cache_.end()) return it->second;

  std::vector<std::size_t> edges =
      optimistic ? optimistic_subgraph(g_, info) : known_subgraph(g_, info);
  std::size_t n = g_.nodes().size();
  Closure c;
  c.dist.assign(n, kInf);
  c.prev.assign(n, -1);
  c.tmask.assign(n, 0);
  std::vector<std::vector<std::pair<int, double>>> adj(n);
  for (std::size_t e : edges) {
    const Edge& ed = g_.edges()[e];
    int a = g_.node_index(ed.u), b = g_.node_index(ed.v);
    adj[static_cast<std::size_t>(a)].push_back({b, ed.cost});
    adj[static_cast<std::size_t>(b)].push_back({a, ed.cost});
  }
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
  int src = g_.node_index(from);
  c.dist[static_cast<std::size_t>(src)] = 0.0;
  pq.push({0.0, src});
  while (!pq.empty()) {
    auto [d, u] = pq.top();
    pq.pop();
    if (d > c.dist[static_cast<std::size_t>(u)]) continue;
    for (auto [v, w] : adj[static_cast<std::size_t>(u)]) {
      double nd = d + w;
      if (nd < c.dist[static_cast<std::size_t>(v)]) {
        c.dist[static_cast<std::size_t>(v)] = nd;
        c.prev[static_cast<std::size_t>(v)] = u;
        pq.push({nd, v});
      }
    }
  }
  // targets collected along each shortest path, following the final
  // predecessor tree
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return c.dist[static_cast<std::size_t>(a)] <
           c.dist[static_cast<std::size_t>(b)];
  });
  for (int v : order) {
    if (c.dist[static_cast<std::size_t>(v)] == kInf) break;
    std::uint32_t bit = target_bit_by_index_[static_cast<std::size_t>(v)];
    if (v == src) {
      c.tmask[static_cast<std::size_t>(v)] = bit;
    } else {
      c.tmask[static_cast<std::size_t>(v)] =
          c.tmask[static_cast<std::size_t>(c.prev[static_cast<std::size_t>(v)])] |
          bit;
    }
  }
  return closure_cache_.emplace(key, std::move(c)).first->second;
}

std::vector<int> PcctpSolver::closure_path(const Closure& c, int from,
                                           int to) const {
  std::vector<int> path;
  int cur = g_.node_index(to);
  while (cur != -1) {
    path.push_back(g_.nodes()[static_cast<std::size_t>(cur)].id);
    cur = c.prev[static_cast<std::size_t>(cur)];
  }
  std::reverse(path.begin(), path.end());
  if (path.empty() || path.front() != from) {
    throw std::logic_error("closure path reconstruction failed");
  }
  return path;
}

std::vector<std::size_t> PcctpSolver::critical_edges(
    int at, int target, const InformationVector& info) {
  Key key{info.encode(),
          (static_cast<std::uint64_t>(g_.node_index(at)) << 32) |
              static_cast<std::uint64_t>(g_.node_index(target))};
  auto memo = crit_cache_.find(key);
  if (memo != crit_cache_.end()) return memo->second;

  // Ambiguous edges lying on at least one simple path from `at` to `target`
  // in the graph where no edge is known untraversable. Enumerated by DFS;
  // beyond a step budget we fall back to every ambiguous edge in the
  // component, a superset that keeps the bound a lower bound.
  std::size_t n = g_.nodes().size();
  struct Hop {
    int node;
    int stoch;  // stochastic index of the edge used, -1 if deterministic
  };
  std::vector<std::vector<Hop>> adj(n);
  std::vector<char> in_component(n, 0);
  {
    std::vector<int> edge_to_stoch(g_.edges().size(), -1);
    for (std::size_t i = 0; i < g_.k(); ++i) {
      edge_to_stoch[g_.stochastic_edge(i)] = static_cast<int>(i);
    }
    for (std::size_t e : optimistic_subgraph(g_, info)) {
      const Edge& ed = g_.edges()[e];
      int a = g_.node_index(ed.u), b = g_.node_index(ed.v);
      adj[static_cast<std::size_t>(a)].push_back({b, edge_to_stoch[e]});
      adj[static_cast<std::size_t>(b)].push_back({a, edge_to_stoch[e]});
    }
    std::vector<int> stack{g_.node_index(at)};
    in_component[static_cast<std::size_t>(g_.node_index(at))] = 1;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (const Hop& hop : adj[static_cast<std::size_t>(u)]) {
        if (!in_component[static_cast<std::size_t>(hop.node)]) {
          in_component[static_cast<std::size_t>(hop.node)] = 1;
          stack.push_back(hop.node);
        }
      }
    }
  }
  std::set<std::size_t> ambiguous_here;
  for (std::size_t i = 0; i < g_.k(); ++i) {
    if (info[i] != EdgeState::Ambiguous) continue;
    const Edge& e = g_.edges()[g_.stochastic_edge(i)];
    if (in_component[static_cast<std::size_t>(g_.node_index(e.u))]) {
      ambiguous_here.insert(i);
    }
  }

  std::set<std::size_t> critical;
  const std::size_t budget = 200000;
  std::size_t steps = 0;
  bool blown = false;
  std::vector<char> on_path(n, 0);
  std::vector<int> path_stoch;
  int goal = g_.node_index(target);

  std::function<void(int)> dfs = [&](int u) {
    if (blown || critical.size() == ambiguous_here.size()) return;
    if (++steps > budget) {
      blown = true;
      return;
    }
    if (u == goal) {
      for (int si : path_stoch) critical.insert(static_cast<std::size_t>(si));
      return;
    }
    on_path[static_cast<std::size_t>(u)] = 1;
    for (const Hop& hop : adj[static_cast<std::size_t>(u)]) {
      if (on_path[static_cast<std::size_t>(hop.node)]) continue;
      bool amb = hop.stoch >= 0 &&
                 info[static_cast<std::size_t>(hop.stoch)] ==
                     EdgeState::Ambiguous;
      if (amb) path_stoch.push_back(hop.stoch);
      dfs(hop.node);
      if (amb) path_stoch.pop_back();
      if (blown) break;
    }
    on_path[static_cast<std::size_t>(u)] = 0;
  };
  if (in_component[static_cast<std::size_t>(goal)]) {
    dfs(g_.node_index(at));
  }

  std::vector<std::size_t> result;
  if (blown) {
    result.assign(ambiguous_here.begin(), ambiguous_here.end());
  } else {
    result.assign(critical.begin(), critical.end());
  }
  crit_cache_.emplace(key, result);
  return result;
}

double PcctpSolver::heuristic_value(int at, std::uint32_t visited,
                                    const InformationVector& info) {
  Key key{info.encode(),
          (static_cast<std::uint64_t>(g_.node_index(at)) << 32) |
              static_cast<std::uint64_t>(visited)};
  auto it = h_cache_.find(key);
  if (it != h_cache_.end()) return it->second;

  std::uint32_t reach = 0, def = 0;
  for (int t : reachable_set(g_, at, info)) reach |= target_bit(t);
  for (int t : definitively_reachable_set(g_, at, info)) def |= target_bit(t);
  std::uint32_t remaining = reach & ~visited;

  const Closure& opt = closure(true, info, at);
  double h = kInf;
  if (remaining == 0) {
    h = at == g_.start()
            ? 0.0
            : opt.dist[static_cast<std::size_t>(g_.node_index(g_.start()))];
  } else {
    // Relaxed problem in the metric where every ambiguous edge counts as
    // traversable: visit each definitively reachable unvisited target, and
    // for each target whose reachability is unresolved visit an endpoint of
    // one of its critical ambiguous edges (any plan must disambiguate one of
    // them before visiting or abandoning the target).
    std::vector<int> ids{at};
    std::vector<std::vector<int>> groups;
    auto index_in_ids = [&](int id) {
      for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] == id) return static_cast<int>(i);
      }
      ids.push_back(id);
      return static_cast<int>(ids.size()) - 1;
    };
    for (std::size_t i = 0; i < g_.targets().size(); ++i) {
      if ((def & remaining) & (1u << i)) {
        groups.push_back({index_in_ids(g_.targets()[i])});
      }
    }
    for (std::size_t i = 0; i < g_.targets().size(); ++i) {
      if (!((remaining & ~def) & (1u << i))) continue;
      std::vector<int> group;
      for (std::size_t si : critical_edges(at, g_.targets()[i], info)) {
        const Edge& e = g_.edges()[g_.stochastic_edge(si)];
        group.push_back(index_in_ids(e.u));
        group.push_back(index_in_ids(e.v));
      }
      groups.push_back(std::move(group));
    }
    int start_ix = index_in_ids(g_.start());

    DistanceMatrix d(ids.size(), std::vector<double>(ids.size(), 0.0));
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const Closure& ci = closure(true, info, ids[i]);
      for (std::size_t j = 0; j < ids.size(); ++j) {
        d[i][j] = ci.dist[static_cast<std::size_t>(g_.node_index(ids[j]))];
      }
    }
    auto v = set_tsp(d, 0, groups, start_ix);
    if (v) h = *v;
  }
  h_cache_.emplace(key, h);
  return h;
}

std::optional<double> PcctpSolver::heuristic(const RobotState& state) {
  if (state.info.size() != g_.k()) {
    throw std::invalid_argument("information vector length does not match k");
  }
  double h = heuristic_value(state.at, mask_of(state.visited), state.info);
  if (h == kInf) return std::nullopt;
  return h;
}

std::size_t PcctpSolver::LabelTables::compress(std::uint32_t full) const {
  std::size_t idx = 0;
  for (std::size_t i = 0; i < free_bits.size(); ++i) {
    if (full & (1u << free_bits[i])) idx |= std::size_t{1} << i;
  }
  return idx;
}

std::uint32_t PcctpSolver::LabelTables::expand(std::size_t subset) const {
  std::uint32_t full = base;
  for (std::size_t i = 0; i < free_bits.size(); ++i) {
    if (subset & (std::size_t{1} << i)) full |= 1u << free_bits[i];
  }
  return full;
}

int PcctpSolver::LabelTables::hot_index(int id) const {
  auto it = std::lower_bound(hot.begin(), hot.end(), id);
  if (it == hot.end() || *it != id) return -1;
  return static_cast<int>(it - hot.begin());
}

PcctpSolver::LabelTables PcctpSolver::label_search(
    int at, std::uint32_t visited, const InformationVector& info) {
  LabelTables t;
  for (int tgt : reachable_set(g_, at, info)) t.reach |= target_bit(tgt);
  t.base = visited | target_bit(at);

  std::set<int> hot_ids{at};
  for (std::size_t i = 0; i < g_.targets().size(); ++i) {
    if ((t.reach & ~t.base) & (1u << i)) hot_ids.insert(g_.targets()[i]);
  }
  for (std::size_t si = 0; si < g_.k(); ++si) {
    if (info[si] != EdgeState::Ambiguous) continue;
    const Edge& e = g_.edges()[g_.stochastic_edge(si)];
    hot_ids.insert(e.u);
    hot_ids.insert(e.v);
  }
  t.hot.assign(hot_ids.begin(), hot_ids.end());
  t.amb_endpoint.assign(t.hot.size(), 0);
  for (std::size_t si = 0; si < g_.k(); ++si) {
    if (info[si] != EdgeState::Ambiguous) continue;
    const Edge& e = g_.edges()[g_.stochastic_edge(si)];
    t.amb_endpoint[static_cast<std::size_t>(t.hot_index(e.u))] = 1;
    t.amb_endpoint[static_cast<std::size_t>(t.hot_index(e.v))] = 1;
  }
  std::uint32_t free_mask = t.reach & ~t.base;
  for (int b = 0; b < 31; ++b) {
    if (free_mask & (1u << b)) t.free_bits.push_back(b);
  }
  if (t.free_bits.size() > 20) {
    throw std::invalid_argument("too many open targets for subset expansion");
  }

  std::size_t rows = std::size_t{1} << t.free_bits.size();
  std::size_t cols = t.hot.size();
  t.cost.assign(rows, std::vector<double>(cols, kInf));

  std::deque<std::pair<std::size_t, std::size_t>> queue;
  std::size_t at_hi = static_cast<std::size_t>(t.hot_index(at));
  t.cost[0][at_hi] = 0.0;
  queue.push_back({0, at_hi});
  while (!queue.empty()) {
    auto [sidx, hi] = queue.front();
    queue.pop_front();
    double base_cost = t.cost[sidx][hi];
    std::uint32_t s_full = t.expand(sidx);
    const Closure& cl = closure(false, info, t.hot[hi]);
    for (std::size_t hj = 0; hj < cols; ++hj) {
      if (hj == hi) continue;
      int dest = t.hot[hj];
      std::uint32_t tb = target_bit(dest);
      bool unvisited_target = tb != 0 && !(s_full & tb);
      if (!unvisited_target && !t.amb_endpoint[hj]) continue;
      std::size_t dix = static_cast<std::size_t>(g_.node_index(dest));
      double d = cl.dist[dix];
      if (d == kInf) continue;
      std::uint32_t s2 = s_full | (cl.tmask[dix] & t.reach);
      std::size_t sidx2 = t.compress(s2);
      double nc = base_cost + d;
      if (nc < t.cost[sidx2][hj]) {
        t.cost[sidx2][hj] = nc;
        queue.push_back({sidx2, hj});
      }
    }
  }
  return t;
}

int PcctpSolver::or_best_child(const AONode& n) const {
  int best = -1;
  double best_val = kInf;
  for (std::size_t i = 0; i < n.children.size(); ++i) {
    const Arc& arc = n.children[i];
    double v = tree_[arc.child].f + arc.cost;
    if (best < 0 || v < best_val) {
      best = static_cast<int>(i);
      best_val = v;
    }
  }
  return best;
}

int PcctpSolver::select_node() const {
  if (tree_[tree_.root].solved) {
    throw std::logic_error("select_node called on a solved tree");
  }
  int cur = tree_.root;
  while (!tree_[cur].children.empty()) {
    const AONode& n = tree_[cur];
    if (n.kind == NodeKind::Or) {
      int best = n.best_child >= 0 ? n.best_child : or_best_child(n);
      cur = n.children[static_cast<std::size_t>(best)].child;
    } else {
      int pick = -1;
      double best_val = kInf;
      for (const Arc& arc : n.children) {
        if (tree_[arc.child].solved) continue;
        double v = tree_[arc.child].f + arc.cost;
        if (pick < 0 || v < best_val) {
          pick = arc.child;
          best_val = v;
        }
      }
      if (pick < 0) {
        throw std::logic_error("unsolved AND node with all children solved");
      }
      cur = pick;
    }
  }
  return cur;
}

std::vector<int> PcctpSolver::expand(int node) {
  AONode& n = tree_[node];
  if (n.kind == NodeKind::Leaf) {
    throw std::logic_error("cannot expand a leaf node");
  }
  if (!n.children.empty()) {
    throw std::logic_error("node already expanded");
  }
  return n.kind == NodeKind::Or ? expand_or(node) : expand_and(node);
}

std::vector<int> PcctpSolver::expand_or(int node) {
  const int at = tree_[node].at;
  const std::uint32_t visited0 = tree_[node].visited;
  const InformationVector info = tree_[node].info;

  LabelTables t = label_search(at, visited0, info);
  std::size_t rows = t.cost.size();
  std::vector<int> created;

  // One AND child per (ambiguous edge, endpoint, visited subset): move there
  // over known edges and disambiguate. Children are generated even when the
  // state already covers every reachable target, since a revealed shortcut
  // can still pay for itself on the way home. A subset is dropped when
  // another subset at the same endpoint is a superset at no extra cost;
  // cost-to-go is monotone in the visited set, so such arcs can never be the
  // strict minimum.
  for (std::size_t si = 0; si < g_.k(); ++si) {
    if (info[si] != EdgeState::Ambiguous) continue;
    const Edge& e = g_.edges()[g_.stochastic_edge(si)];
    for (int w : {e.u, e.v}) {
      std::size_t hi = static_cast<std::size_t>(t.hot_index(w));
      for (std::size_t sidx = 0; sidx < rows; ++sidx) {
        double c = t.cost[sidx][hi];
        if (c == kInf) continue;
        bool dominated = false;
        for (std::size_t other = 0; other < rows && !dominated; ++other) {
          if (other == sidx) continue;
          dominated = (other & sidx) == sidx && t.cost[other][hi] <= c;
        }
        if (dominated) continue;
        AONode child;
        child.kind = NodeKind::And;
        child.at = w;
        child.visited = t.expand(sidx);
        child.info = info;
        child.attempt_edge = static_cast<int>(si);
        child.parent = node;
        child.f = heuristic_value(w, child.visited, info);
        child.solved = false;
        int idx = add_node(std::move(child));
        Arc arc;
        arc.child = idx;
        arc.cost = c;
        arc.label_node = w;
        tree_[node].children.push_back(arc);
        created.push_back(idx);
      }
    }
  }

  // Leaf child: cheapest way to finish covering every reachable target over
  // known edges and return to start.
  double best_final = kInf;
  int best_node = -1;
  std::uint32_t best_visited = 0;
  for (std::size_t sidx = 0; sidx < rows; ++sidx) {
    std::uint32_t s_full = t.expand(sidx);
    if ((t.reach & ~s_full) != 0) continue;
    for (std::size_t hi = 0; hi < t.hot.size(); ++hi) {
      double c = t.cost[sidx][hi];
      if (c == kInf) continue;
      const Closure& cl = closure(false, info, t.hot[hi]);
      double home =
          cl.dist[static_cast<std::size_t>(g_.node_index(g_.start()))];
      if (home == kInf) continue;
      if (c + home < best_final) {
        best_final = c + home;
        best_node = t.hot[hi];
        best_visited = s_full;
      }
    }
  }
  if (best_node >= 0) {
    AONode leaf;
    leaf.kind = NodeKind::Leaf;
    leaf.at = g_.start();
    leaf.visited = best_visited;
    leaf.info = info;
    leaf.parent = node;
    leaf.f = 0.0;
    leaf.solved = true;
    int idx = add_node(std::move(leaf));
    Arc arc;
    arc.child = idx;
    arc.cost = best_final;
    arc.label_node = best_node;
    tree_[node].children.push_back(arc);
    created.push_back(idx);
  }

  if (created.empty()) {
    // Dead end: no ambiguous edge reachable and targets not coverable.
    tree_[node].f = kInf;
    tree_[node].solved = true;
  }
  return created;
}

std::vector<int> PcctpSolver::expand_and(int node) {
  // Copy state up front: add_node may reallocate the node arena.
  const int si = tree_[node].attempt_edge;
  const std::uint32_t visited0 = tree_[node].visited;
  const InformationVector info = tree_[node].info;
  const int a = tree_[node].at;
  if (si < 0 || static_cast<std::size_t>(si) >= g_.k()) {
    throw std::logic_error("AND node without an attempted edge");
  }
  if (info[static_cast<std::size_t>(si)] != EdgeState::Ambiguous) {
    throw std::logic_error("attempted edge is no longer ambiguous");
  }
  const Edge& e = g_.edges()[g_.stochastic_edge(static_cast<std::size_t>(si))];
  if (!e.touches(a)) {
    throw std::invalid_argument("no ambiguous edge incident to current node");
  }
  const int b = e.other(a);
  const double p_block = e.block_prob;

  auto make_child = [&](int at, const InformationVector& child_info) {
    AONode child;
    child.at = at;
    child.visited = visited0 | target_bit(at);
    child.info = child_info;
    child.parent = node;
    if (terminal(child.at, child.visited, child.info)) {
      child.kind = NodeKind::Leaf;
      child.f = 0.0;
      child.solved = true;
    } else {
      child.kind = NodeKind::Or;
      child.f = heuristic_value(child.at, child.visited, child.info);
      child.solved = false;
    }
    return add_node(std::move(child));
  };

  std::vector<int> created;
  {
    int idx = make_child(b, info.refined(static_cast<std::size_t>(si),
                                         EdgeState::Traversable));
    Arc arc;
    arc.child = idx;
    arc.cost = e.cost;
    arc.prob = 1.0 - p_block;
    arc.label_node = b;
    tree_[node].children.push_back(arc);
    created.push_back(idx);
  }
  {
    int idx = make_child(a, info.refined(static_cast<std::size_t>(si),
                                         EdgeState::Untraversable));
    Arc arc;
    arc.child = idx;
    arc.cost = e.cost * opts_.blocked_cost_factor;
    arc.prob = p_block;
    arc.label_node = a;
    tree_[node].children.push_back(arc);
    created.push_back(idx);
  }
  return created;
}

void PcctpSolver::recompute(int node) {
  AONode& n = tree_[node];
  if (n.kind == NodeKind::Leaf || n.children.empty()) return;
  if (n.kind == NodeKind::Or) {
    int best = or_best_child(n);
    const Arc& arc = n.children[static_cast<std::size_t>(best)];
    n.best_child = best;
    n.f = tree_[arc.child].f + arc.cost;
    n.solved = tree_[arc.child].solved;
  } else {
    double f = 0.0;
    bool solved = true;
    for (const Arc& arc : n.children) {
      const AONode& child = tree_[arc.child];
      if (arc.prob > 0.0) f += arc.prob * (child.f + arc.cost);
      solved = solved && child.solved;
    }
    n.f = f;
    n.solved = solved;
  }
}

void PcctpSolver::backprop(int node) {
  int cur = node;
  while (cur >= 0) {
    recompute(cur);
    cur = tree_[cur].parent;
  }
}

SolveResult PcctpSolver::solve() {
  SolveResult result;
  std::size_t iterations = 0;
  while (!tree_[tree_.root].solved) {
    if (++iterations > opts_.max_iterations) {
      throw std::runtime_error("iteration cap exceeded");
    }
    int n = select_node();
    expand(n);
    backprop(n);
  }
  result.iterations = iterations;
  result.expected_cost = tree_[tree_.root].f;
  if (std::isinf(result.expected_cost)) {
    result.status = SolveStatus::NoSolution;
  } else {
    result.status = SolveStatus::Solved;
    result.policy = extract_policy();
  }
  result.tree = tree_;
  return result;
}

std::vector<int> PcctpSolver::reconstruct_route(const AONode& parent,
                                                const Arc& arc,
                                                const AONode& child) {
  if (parent.kind == NodeKind::And) {
    // outcome arcs: crossed to the far endpoint, or bounced in place
    if (child.at == parent.at) return {parent.at};
    return {parent.at, child.at};
  }
  LabelTables t = label_search(parent.at, parent.visited, parent.info);

  // Walk the converged tables backwards from the arc's end label to the
  // origin, taking at each step the first predecessor whose cost plus move
  // length reproduces the label cost exactly.
  std::size_t target_sidx = t.compress(child.visited);
  std::size_t target_hi = static_cast<std::size_t>(t.hot_index(arc.label_node));
  std::vector<int> milestones{t.hot[target_hi]};
  std::size_t cur_s = target_sidx, cur_h = target_hi;
  std::size_t origin_h = static_cast<std::size_t>(t.hot_index(parent.at));
  while (!(cur_s == 0 && cur_h == origin_h)) {
    double cur_cost = t.cost[cur_s][cur_h];
    bool found = false;
    for (std::size_t ps = 0; ps <= cur_s && !found; ++ps) {
      if ((ps & cur_s) != ps) continue;
      for (std::size_t ph = 0; ph < t.hot.size() && !found; ++ph) {
        if (ps == cur_s && ph == cur_h) continue;
        double pc = t.cost[ps][ph];
        if (pc == kInf || pc > cur_cost) continue;
        // transition validity mirrors the forward search
        int dest = t.hot[cur_h];
        std::uint32_t tb = target_bit(dest);
        std::uint32_t ps_full = t.expand(ps);
        bool unvisited_target = tb != 0 && !(ps_full & tb);
        if (!unvisited_target && !t.amb_endpoint[cur_h]) continue;
        const Closure& cl = closure(false, parent.info, t.hot[ph]);
        std::size_t dix = static_cast<std::size_t>(g_.node_index(dest));
        double d = cl.dist[dix];
        if (d == kInf) continue;
        if ((ps_full | (cl.tmask[dix] & t.reach)) != t.expand(cur_s)) continue;
        if (pc + d != cur_cost) continue;
        milestones.push_back(t.hot[ph]);
        cur_s = ps;
        cur_h = ph;
        found = true;
      }
    }
    if (!found) {
      throw std::logic_error("route reconstruction failed");
    }
  }
  std::reverse(milestones.begin(), milestones.end());

  std::vector<int> route{milestones.front()};
  for (std::size_t i = 1; i < milestones.size(); ++i) {
    const Closure& cl = closure(false, parent.info, milestones[i - 1]);
    std::vector<int> seg = closure_path(cl, milestones[i - 1], milestones[i]);
    route.insert(route.end(), seg.begin() + 1, seg.end());
  }
  if (child.kind == NodeKind::Leaf) {
    const Closure& cl = closure(false, parent.info, arc.label_node);
    std::vector<int> home = closure_path(cl, arc.label_node, g_.start());
    route.insert(route.end(), home.begin() + 1, home.end());
  }
  return route;
}

Policy PcctpSolver::extract_policy() {
  const AOTree& tree = tree_;
  const AONode& root = tree[tree.root];
  if (!root.solved) {
    throw std::logic_error("cannot extract a policy from an unsolved tree");
  }
  if (std::isinf(root.f)) {
    throw std::logic_error("tree has no solution");
  }
  Policy policy;
  policy.k = g_.k();
  policy.expected_cost = root.f;

  std::vector<std::pair<int, int>> stack;  // (tree index, policy index)
  auto emit = [&](int tree_idx) {
    const AONode& n = tree[tree_idx];
    PolicyNode pn;
    pn.kind = n.kind;
    pn.at = n.at;
    pn.visited = n.visited;
    pn.info = n.info;
    pn.attempt_edge = n.attempt_edge;
    pn.f = n.f;
    policy.nodes.push_back(std::move(pn));
    return static_cast<int>(policy.nodes.size()) - 1;
  };
  policy.root = emit(tree.root);
  stack.push_back({tree.root, policy.root});
  while (!stack.empty()) {
    auto [ti, pi] = stack.back();
    stack.pop_back();
    const AONode& n = tree[ti];
    if (n.kind == NodeKind::Leaf) continue;
    std::vector<const Arc*> keep;
    if (n.kind == NodeKind::Or) {
      keep.push_back(&n.children[static_cast<std::size_t>(or_best_child(n))]);
    } else {
      for (const Arc& arc : n.children) keep.push_back(&arc);
    }
    for (const Arc* arc : keep) {
      int child_pi = emit(arc->child);
      PolicyArc pa;
      pa.child = child_pi;
      pa.cost = arc->cost;
      pa.prob = arc->prob;
      pa.via = reconstruct_route(n, *arc, tree[arc->child]);
      policy.nodes[static_cast<std::size_t>(pi)].children.push_back(
          std::move(pa));
      stack.push_back({arc->child, child_pi});
    }
  }
  return policy;
}

namespace {

nlohmann::ordered_json action_json(const Policy& policy,
                                   const StochasticGraph& g, int idx) {
  const PolicyNode& n = policy.nodes[static_cast<std::size_t>(idx)];
  nlohmann::ordered_json action;
  if (n.kind == NodeKind::And) {
    const Edge& e =
        g.edges()[g.stochastic_edge(static_cast<std::size_t>(n.attempt_edge))];
    action = {{"type", "disambiguate"},
              {"stochastic_index", n.attempt_edge},
              {"u", e.u},
              {"v", e.v}};
  } else if (n.kind == NodeKind::Or && !n.children.empty()) {
    const PolicyArc& arc = n.children.front();
    const PolicyNode& child = policy.nodes[static_cast<std::size_t>(arc.child)];
    if (child.kind == NodeKind::And) {
      action = {{"type", "move_and_attempt"},
                {"stochastic_index", child.attempt_edge},
                {"endpoint", child.at},
                {"via", arc.via}};
    } else {
      action = {{"type", "visit_remaining_and_return"}, {"via", arc.via}};
    }
  } else {
    action = nullptr;
  }
  return action;
}

}  // namespace

nlohmann::ordered_json policy_to_json(const Policy& policy,
                                      const StochasticGraph& g) {
  nlohmann::ordered_json j;
  j["expected_cost"] = policy.expected_cost;
  j["root"] = policy.root;
  j["k"] = policy.k;
  std::vector<const PolicyArc*> incoming(policy.nodes.size(), nullptr);
  for (const PolicyNode& n : policy.nodes) {
    for (const PolicyArc& arc : n.children) {
      incoming[static_cast<std::size_t>(arc.child)] = &arc;
    }
  }
  j["nodes"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < policy.nodes.size(); ++i) {
    const PolicyNode& n = policy.nodes[i];
    nlohmann::ordered_json jn;
    jn["id"] = i;
    jn["kind"] = to_string(n.kind);
    jn["state"] = {{"at", n.at},
                   {"visited", visited_ids(g, n.visited)},
                   {"info", n.info.to_string()}};
    jn["action"] = action_json(policy, g, static_cast<int>(i));
    if (incoming[i]) {
      jn["arc_cost"] = incoming[i]->cost;
      if (incoming[i]->prob >= 0.0) {
        jn["arc_prob"] = incoming[i]->prob;
      } else {
        jn["arc_prob"] = nullptr;
      }
    } else {
      jn["arc_cost"] = nullptr;
      jn["arc_prob"] = nullptr;
    }
    jn["f"] = n.f;
    nlohmann::ordered_json children = nlohmann::ordered_json::array();
    for (std::size_t c = 0; c < n.children.size(); ++c) {
      nlohmann::ordered_json jc;
      jc["id"] = n.children[c].child;
      if (n.kind == NodeKind::And) jc["outcome"] = c == 0 ? "T" : "U";
      children.push_back(std::move(jc));
    }
    jn["children"] = std::move(children);
    j["nodes"].push_back(std::move(jn));
  }
  return j;
}

std::string ao_tree_to_dot(const AOTree& tree, const StochasticGraph& g) {
  // Recover the policy node set when the tree is solved.
  std::vector<char> in_policy(tree.size(), 0);
  const AONode& root = tree[tree.root];
  if (root.solved && !std::isinf(root.f)) {
    std::vector<int> stack{tree.root};
    while (!stack.empty()) {
      int ti = stack.back();
      stack.pop_back();
      in_policy[static_cast<std::size_t>(ti)] = 1;
      const AONode& n = tree[ti];
      if (n.kind == NodeKind::Leaf || n.children.empty()) continue;
      if (n.kind == NodeKind::Or) {
        int best = -1;
        double best_val = kInf;
        for (std::size_t i = 0; i < n.children.size(); ++i) {
          double v = tree[n.children[i].child].f + n.children[i].cost;
          if (best < 0 || v < best_val) {
            best = static_cast<int>(i);
            best_val = v;
          }
        }
        stack.push_back(n.children[static_cast<std::size_t>(best)].child);
      } else {
        for (const Arc& arc : n.children) stack.push_back(arc.child);
      }
    }
  }

  std::ostringstream out;
  out << "digraph ao_tree {\n  rankdir=TB;\n  node [style=filled];\n";
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const AONode& n = tree.nodes[i];
    std::string cls, color;
    if (in_policy[i]) {
      cls = "policy";
      color = "palegreen";
    } else if (n.expanded()) {
      cls = "expanded";
      color = "khaki";
    } else {
      cls = "frontier";
      color = "orange";
    }
    std::string shape = n.kind == NodeKind::And
                            ? "ellipse"
                            : (n.kind == NodeKind::Leaf ? "doublecircle"
                                                        : "box");
    out << "  n" << i << " [shape=" << shape << ", fillcolor=" << color
        << ", class=\"" << cls << "\", label=\"" << n.at << " | {";
    bool first = true;
    for (int t : visited_ids(g, n.visited)) {
      if (!first) out << ",";
      out << t;
      first = false;
    }
    out << "} | " << n.info.to_string() << "\\nf=" << n.f << "\"];\n";
  }
  for (std::size_t i = 0; i < tree.size(); ++i) {
    for (const Arc& arc : tree.nodes[i].children) {
      out << "  n" << i << " -> n" << arc.child << " [label=\"" << arc.cost;
      if (arc.prob >= 0.0) out << " p=" << arc.prob;
      out << "\"];\n";
    }
  }
  out << "}\n";
  return out.str();
}

}  // namespace pcctp
