#include "pcctp/tsp.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace pcctp {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<int> dedup(const std::vector<int>& required, int from, int to) {
  std::vector<int> r;
  for (int v : required) {
    if (v == from || v == to) continue;
    if (std::find(r.begin(), r.end(), v) == r.end()) r.push_back(v);
  }
  return r;
}
}  // namespace

std::optional<std::pair<double, std::vector<int>>> path_tsp_order(
    const DistanceMatrix& d, int from, const std::vector<int>& required,
    int to) {
  std::vector<int> r = dedup(required, from, to);
  std::size_t m = r.size();
  if (m > 20) {
    throw std::invalid_argument("subset DP limited to 20 waypoints");
  }
  auto dist = [&](int a, int b) -> double {
    return d.at(static_cast<std::size_t>(a)).at(static_cast<std::size_t>(b));
  };
  if (m == 0) {
    double c = dist(from, to);
    if (c == kInf) return std::nullopt;
    return std::make_pair(c, std::vector<int>{});
  }
  std::size_t full = (std::size_t{1} << m);
  // dp[mask][i]: cheapest way to start at `from`, visit exactly `mask`,
  // ending at r[i].
  std::vector<std::vector<double>> dp(full, std::vector<double>(m, kInf));
  std::vector<std::vector<int>> par(full, std::vector<int>(m, -1));
  for (std::size_t i = 0; i < m; ++i) {
    dp[std::size_t{1} << i][i] = dist(from, r[i]);
  }
  for (std::size_t mask = 1; mask < full; ++mask) {
    for (std::size_t i = 0; i < m; ++i) {
      if (!(mask & (std::size_t{1} << i))) continue;
      double base = dp[mask][i];
      if (base == kInf) continue;
      for (std::size_t j = 0; j < m; ++j) {
        if (mask & (std::size_t{1} << j)) continue;
        double nd = base + dist(r[i], r[j]);
        std::size_t nm = mask | (std::size_t{1} << j);
        if (nd < dp[nm][j]) {
          dp[nm][j] = nd;
          par[nm][j] = static_cast<int>(i);
        }
      }
    }
  }
  double best = kInf;
  int best_end = -1;
  for (std::size_t i = 0; i < m; ++i) {
    double c = dp[full - 1][i];
    if (c == kInf) continue;
    double total = c + dist(r[i], to);
    if (total < best) {
      best = total;
      best_end = static_cast<int>(i);
    }
  }
  if (best_end < 0) return std::nullopt;
  std::vector<int> order;
  std::size_t mask = full - 1;
  int cur = best_end;
  while (cur >= 0) {
    order.push_back(r[static_cast<std::size_t>(cur)]);
    int p = par[mask][static_cast<std::size_t>(cur)];
    mask &= ~(std::size_t{1} << cur);
    cur = p;
  }
  std::reverse(order.begin(), order.end());
  return std::make_pair(best, order);
}

std::optional<double> path_tsp(const DistanceMatrix& d, int from,
                               const std::vector<int>& required, int to) {
  auto res = path_tsp_order(d, from, required, to);
  if (!res) return std::nullopt;
  return res->first;
}

std::optional<double> set_tsp(const DistanceMatrix& d, int from,
                              const std::vector<std::vector<int>>& groups,
                              int to) {
  std::size_t m = groups.size();
  if (m > 20) {
    throw std::invalid_argument("set DP limited to 20 groups");
  }
  auto dist = [&](int a, int b) -> double {
    return d.at(static_cast<std::size_t>(a)).at(static_cast<std::size_t>(b));
  };
  if (m == 0) {
    double c = dist(from, to);
    if (c == kInf) return std::nullopt;
    return c;
  }
  // nodes worth standing on: all group members
  std::vector<int> nodes;
  for (const auto& g : groups) {
    for (int v : g) {
      if (std::find(nodes.begin(), nodes.end(), v) == nodes.end()) {
        nodes.push_back(v);
      }
    }
  }
  std::size_t nn = nodes.size();
  auto sat_bits = [&](int v) {
    std::size_t bits = 0;
    for (std::size_t gi = 0; gi < m; ++gi) {
      if (std::find(groups[gi].begin(), groups[gi].end(), v) !=
          groups[gi].end()) {
        bits |= std::size_t{1} << gi;
      }
    }
    return bits;
  };
  std::size_t full = (std::size_t{1} << m);
  std::vector<std::vector<double>> dp(full, std::vector<double>(nn, kInf));
  for (std::size_t i = 0; i < nn; ++i) {
    double c = dist(from, nodes[i]);
    if (c == kInf) continue;
    std::size_t mask = sat_bits(nodes[i]);
    dp[mask][i] = std::min(dp[mask][i], c);
  }
  for (std::size_t mask = 0; mask < full; ++mask) {
    // moves that satisfy no new group stay within this mask; iterate until
    // stable so chains of them are covered on non-metric matrices
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::size_t i = 0; i < nn; ++i) {
        double base = dp[mask][i];
        if (base == kInf) continue;
        for (std::size_t j = 0; j < nn; ++j) {
          if (i == j) continue;
          std::size_t nm = mask | sat_bits(nodes[j]);
          if (nm != mask) continue;
          double nd = base + dist(nodes[i], nodes[j]);
          if (nd < dp[mask][j]) {
            dp[mask][j] = nd;
            changed = true;
          }
        }
      }
    }
    for (std::size_t i = 0; i < nn; ++i) {
      double base = dp[mask][i];
      if (base == kInf) continue;
      for (std::size_t j = 0; j < nn; ++j) {
        if (i == j) continue;
        std::size_t nm = mask | sat_bits(nodes[j]);
        if (nm == mask) continue;
        double nd = base + dist(nodes[i], nodes[j]);
        if (nd < dp[nm][j]) dp[nm][j] = nd;
      }
    }
  }
  double best = kInf;
  for (std::size_t i = 0; i < nn; ++i) {
    if (dp[full - 1][i] == kInf) continue;
    double c = dist(nodes[i], to);
    if (c == kInf) continue;
    best = std::min(best, dp[full - 1][i] + c);
  }
  if (best == kInf) return std::nullopt;
  return best;
}

}  // namespace pcctp
