#include "pcctp/extractor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <queue>
#include <sstream>

namespace pcctp {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

const int kDx8[] = {1, -1, 0, 0, 1, 1, -1, -1};
const int kDy8[] = {0, 0, 1, -1, 1, -1, 1, -1};
}  // namespace

WaterMaskRaster WaterMaskRaster::parse(std::istream& in) {
  WaterMaskRaster r;
  std::string line;
  int line_no = 0;

  if (!std::getline(in, line)) throw FormatError(1, "empty input");
  ++line_no;
  if (line != "PWM1") {
    throw FormatError(line_no, "expected magic 'PWM1', got '" + line + "'");
  }
  if (!std::getline(in, line)) {
    throw FormatError(line_no + 1, "missing dimension line");
  }
  ++line_no;
  {
    std::istringstream dims(line);
    if (!(dims >> r.width >> r.height >> r.resolution)) {
      throw FormatError(line_no, "expected '<width> <height> <resolution_m>'");
    }
    std::string extra;
    if (dims >> extra) {
      throw FormatError(line_no, "trailing content on dimension line");
    }
    if (r.width <= 0 || r.height <= 0 || r.resolution <= 0) {
      throw FormatError(line_no, "dimensions and resolution must be positive");
    }
  }
  r.probs.reserve(static_cast<std::size_t>(r.width) *
                  static_cast<std::size_t>(r.height));
  for (int row = 0; row < r.height; ++row) {
    if (!std::getline(in, line)) {
      throw FormatError(line_no + 1, "expected " + std::to_string(r.height) +
                                         " rows, got " + std::to_string(row));
    }
    ++line_no;
    std::istringstream vals(line);
    for (int col = 0; col < r.width; ++col) {
      double p;
      if (!(vals >> p)) {
        throw FormatError(line_no, "expected " + std::to_string(r.width) +
                                       " values, got " + std::to_string(col));
      }
      if (!(p >= 0.0 && p <= 1.0)) {
        throw FormatError(line_no, "probability out of [0,1]: column " +
                                       std::to_string(col + 1));
      }
      r.probs.push_back(p);
    }
    std::string extra;
    if (vals >> extra) {
      throw FormatError(line_no, "row has more than " +
                                     std::to_string(r.width) + " values");
    }
  }
  return r;
}

WaterMaskRaster WaterMaskRaster::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open raster file: " + path);
  return parse(in);
}

void WaterMaskRaster::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write raster file: " + path);
  out << "PWM1\n" << width << " " << height << " " << resolution << "\n";
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (x) out << " ";
      out << prob(x, y);
    }
    out << "\n";
  }
}

ClassifiedGrid classify_pixels(const WaterMaskRaster& raster,
                               double det_threshold, double stoch_threshold) {
  if (!(det_threshold > 0 && det_threshold < 1) ||
      !(stoch_threshold > 0 && stoch_threshold < 1) ||
      !(stoch_threshold < det_threshold)) {
    throw std::invalid_argument(
        "thresholds must satisfy 0 < stoch < det < 1");
  }
  if (raster.probs.size() != static_cast<std::size_t>(raster.width) *
                                 static_cast<std::size_t>(raster.height)) {
    throw std::invalid_argument("raster size does not match dimensions");
  }
  ClassifiedGrid g;
  g.width = raster.width;
  g.height = raster.height;
  g.resolution = raster.resolution;
  g.labels.resize(raster.probs.size());
  g.boundary.assign(raster.probs.size(), 0);
  for (std::size_t i = 0; i < raster.probs.size(); ++i) {
    double p = raster.probs[i];
    g.labels[i] = p >= det_threshold ? PixelClass::DeterministicWater
                  : p >= stoch_threshold ? PixelClass::StochasticWater
                                         : PixelClass::Land;
  }
  // Boundary: deterministic water with a 4-neighbour that is not
  // deterministic water; the raster rim counts as non-water.
  const int dx4[] = {1, -1, 0, 0};
  const int dy4[] = {0, 0, 1, -1};
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      if (g.label(x, y) != PixelClass::DeterministicWater) continue;
      bool edge = false;
      for (int d = 0; d < 4 && !edge; ++d) {
        int nx = x + dx4[d], ny = y + dy4[d];
        edge = !g.in_bounds(nx, ny) ||
               g.label(nx, ny) != PixelClass::DeterministicWater;
      }
      if (edge) {
        g.boundary[static_cast<std::size_t>(y) *
                       static_cast<std::size_t>(g.width) +
                   static_cast<std::size_t>(x)] = 1;
      }
    }
  }
  return g;
}

namespace {

double step_cost(int d, double res) {
  return d < 4 ? res : res * std::sqrt(2.0);
}

std::size_t cell_index(const ClassifiedGrid& g, Cell c) {
  return static_cast<std::size_t>(c.second) *
             static_cast<std::size_t>(g.width) +
         static_cast<std::size_t>(c.first);
}

/// Dijkstra from one boundary cell through stochastic water, terminating on
/// boundary cells. Returns reached boundary cells with path and length.
struct StochReach {
  Cell target;
  std::vector<Cell> path;  // from source boundary cell to target
  double length = 0.0;
  double min_prob = 1.0;   // over stochastic interior
};

std::vector<StochReach> stochastic_reach(const ClassifiedGrid& grid,
                                         const WaterMaskRaster& raster,
                                         Cell source, double radius_m) {
  std::size_t n = grid.labels.size();
  std::vector<double> dist(n, kInf);
  std::vector<int> prev(n, -1);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
  std::size_t src = cell_index(grid, source);
  dist[src] = 0.0;
  pq.push({0.0, src});
  std::vector<std::size_t> reached;
  while (!pq.empty()) {
    auto [d, u] = pq.top();
    pq.pop();
    if (d > dist[u]) continue;
    int ux = static_cast<int>(u % static_cast<std::size_t>(grid.width));
    int uy = static_cast<int>(u / static_cast<std::size_t>(grid.width));
    bool u_is_source = u == src;
    bool u_is_terminal = !u_is_source && grid.is_boundary(ux, uy);
    if (u_is_terminal) {
      reached.push_back(u);
      continue;  // do not expand through other boundary cells
    }
    if (!u_is_source &&
        grid.label(ux, uy) != PixelClass::StochasticWater) {
      continue;
    }
    for (int k = 0; k < 8; ++k) {
      int nx = ux + kDx8[k], ny = uy + kDy8[k];
      if (!grid.in_bounds(nx, ny)) continue;
      PixelClass lbl = grid.label(nx, ny);
      bool terminal = grid.is_boundary(nx, ny);
      if (lbl != PixelClass::StochasticWater && !terminal) continue;
      if (k >= 4) {  // no corner cutting through land
        bool ok = grid.in_bounds(ux + kDx8[k], uy) &&
                  grid.label(ux + kDx8[k], uy) != PixelClass::Land &&
                  grid.in_bounds(ux, uy + kDy8[k]) &&
                  grid.label(ux, uy + kDy8[k]) != PixelClass::Land;
        if (!ok) continue;
      }
      double nd = d + step_cost(k, grid.resolution);
      if (nd > radius_m) continue;
      std::size_t v = cell_index(grid, {nx, ny});
      if (nd < dist[v]) {
        dist[v] = nd;
        prev[v] = static_cast<int>(u);
        pq.push({nd, v});
      }
    }
  }
  std::vector<StochReach> out;
  for (std::size_t t : reached) {
    StochReach r;
    r.target = {static_cast<int>(t % static_cast<std::size_t>(grid.width)),
                static_cast<int>(t / static_cast<std::size_t>(grid.width))};
    r.length = dist[t];
    for (int cur = static_cast<int>(t); cur != -1;
         cur = prev[static_cast<std::size_t>(cur)]) {
      std::size_t c = static_cast<std::size_t>(cur);
      int cx = static_cast<int>(c % static_cast<std::size_t>(grid.width));
      int cy = static_cast<int>(c / static_cast<std::size_t>(grid.width));
      r.path.push_back({cx, cy});
    }
    std::reverse(r.path.begin(), r.path.end());
    bool has_interior = false;
    for (std::size_t i = 1; i + 1 < r.path.size(); ++i) {
      auto [cx, cy] = r.path[i];
      if (grid.label(cx, cy) == PixelClass::StochasticWater) {
        has_interior = true;
        r.min_prob = std::min(r.min_prob, raster.prob(cx, cy));
      }
    }
    if (has_interior) out.push_back(std::move(r));
  }
  return out;
}

/// Shortest-path distances through deterministic water from one cell.
std::vector<double> deterministic_distances(const ClassifiedGrid& grid,
                                            Cell source) {
  std::size_t n = grid.labels.size();
  std::vector<double> dist(n, kInf);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
  std::size_t src = cell_index(grid, source);
  dist[src] = 0.0;
  pq.push({0.0, src});
  while (!pq.empty()) {
    auto [d, u] = pq.top();
    pq.pop();
    if (d > dist[u]) continue;
    int ux = static_cast<int>(u % static_cast<std::size_t>(grid.width));
    int uy = static_cast<int>(u / static_cast<std::size_t>(grid.width));
    for (int k = 0; k < 8; ++k) {
      int nx = ux + kDx8[k], ny = uy + kDy8[k];
      if (!grid.is_deterministic(nx, ny)) continue;
      if (k >= 4 && !(grid.is_deterministic(ux + kDx8[k], uy) &&
                      grid.is_deterministic(ux, uy + kDy8[k]))) {
        continue;
      }
      double nd = d + step_cost(k, grid.resolution);
      std::size_t v = cell_index(grid, {nx, ny});
      if (nd < dist[v]) {
        dist[v] = nd;
        pq.push({nd, v});
      }
    }
  }
  return dist;
}

}  // namespace

std::vector<int> dbscan(const std::vector<std::pair<double, double>>& points,
                        double eps, int min_pts) {
  std::size_t n = points.size();
  auto close = [&](std::size_t i, std::size_t j) {
    double dx = points[i].first - points[j].first;
    double dy = points[i].second - points[j].second;
    return std::sqrt(dx * dx + dy * dy) <= eps;
  };
  std::vector<std::vector<std::size_t>> neigh(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (close(i, j)) neigh[i].push_back(j);  // includes i itself
    }
  }
  std::vector<int> cluster(n, -1);
  int next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (cluster[i] != -1) continue;
    if (static_cast<int>(neigh[i].size()) < min_pts) continue;  // not core
    int id = next++;
    std::vector<std::size_t> stack{i};
    cluster[i] = id;
    while (!stack.empty()) {
      std::size_t u = stack.back();
      stack.pop_back();
      if (static_cast<int>(neigh[u].size()) < min_pts) continue;
      for (std::size_t v : neigh[u]) {
        if (cluster[v] == -1) {
          cluster[v] = id;
          stack.push_back(v);
        }
      }
    }
  }
  // keep candidates that fell out as noise
  for (std::size_t i = 0; i < n; ++i) {
    if (cluster[i] == -1) cluster[i] = next++;
  }
  return cluster;
}

std::vector<PixelEdge> detect_pinch_points(const ClassifiedGrid& grid,
                                           const WaterMaskRaster& raster,
                                           const ExtractorConfig& config) {
  // Only boundary cells touching stochastic water can start a pinch path.
  std::vector<Cell> sources;
  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) {
      if (!grid.is_boundary(x, y)) continue;
      bool touches = false;
      for (int k = 0; k < 8 && !touches; ++k) {
        int nx = x + kDx8[k], ny = y + kDy8[k];
        touches = grid.in_bounds(nx, ny) &&
                  grid.label(nx, ny) == PixelClass::StochasticWater;
      }
      if (touches) sources.push_back({x, y});
    }
  }

  // Best candidate per unordered endpoint pair.
  std::map<std::pair<std::size_t, std::size_t>, PixelEdge> by_pair;
  for (Cell b : sources) {
    auto reaches = stochastic_reach(grid, raster, b, config.search_radius_m);
    if (reaches.empty()) continue;
    std::vector<double> det = deterministic_distances(grid, b);
    for (const StochReach& r : reaches) {
      double det_dist = det[cell_index(grid, r.target)];
      if (r.length >= det_dist) continue;  // not a shortcut
      std::size_t ia = cell_index(grid, b), ib = cell_index(grid, r.target);
      auto key = std::minmax(ia, ib);
      PixelEdge e;
      e.a = b;
      e.b = r.target;
      e.path = r.path;
      e.length_m = r.length;
      e.block_prob = 1.0 - r.min_prob;
      e.kind = "pinch_point";
      auto it = by_pair.find({key.first, key.second});
      if (it == by_pair.end() || e.length_m < it->second.length_m) {
        by_pair[{key.first, key.second}] = std::move(e);
      }
    }
  }

  std::vector<PixelEdge> candidates;
  for (auto& [key, e] : by_pair) candidates.push_back(std::move(e));

  // Deduplicate near-identical passages: cluster on midpoints, keep the
  // shortest edge per cluster.
  std::vector<std::pair<double, double>> midpoints;
  for (const PixelEdge& e : candidates) {
    auto [ax, ay] = raster.center(e.a);
    auto [bx, by] = raster.center(e.b);
    midpoints.push_back({(ax + bx) / 2.0, (ay + by) / 2.0});
  }
  std::vector<int> cluster =
      dbscan(midpoints, config.dbscan_eps_m, config.dbscan_min_pts);
  std::map<int, std::size_t> best;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    auto it = best.find(cluster[i]);
    if (it == best.end() ||
        candidates[i].length_m < candidates[it->second].length_m) {
      best[cluster[i]] = i;
    }
  }
  std::vector<PixelEdge> out;
  for (auto [cl, ix] : best) out.push_back(candidates[ix]);
  std::sort(out.begin(), out.end(), [](const PixelEdge& a, const PixelEdge& b) {
    return std::make_tuple(a.a, a.b) < std::make_tuple(b.a, b.b);
  });
  return out;
}

std::vector<double> boundary_distance_m(const ClassifiedGrid& grid) {
  // Exact Euclidean distance transform (two-pass, squared distances).
  constexpr double kBig = 1e18;
  std::size_t w = static_cast<std::size_t>(grid.width);
  std::size_t h = static_cast<std::size_t>(grid.height);
  std::vector<double> f(w * h, kBig);
  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) {
      if (grid.is_boundary(x, y)) f[static_cast<std::size_t>(y) * w + x] = 0.0;
    }
  }
  auto dt1d = [](std::vector<double>& src) {
    std::size_t n = src.size();
    std::vector<double> d(n);
    std::vector<int> v(n);
    std::vector<double> z(n + 1);
    int k = 0;
    v[0] = 0;
    z[0] = -kBig;
    z[1] = kBig;
    for (int q = 1; q < static_cast<int>(n); ++q) {
      double s;
      while (true) {
        int p = v[static_cast<std::size_t>(k)];
        s = ((src[static_cast<std::size_t>(q)] + q * q) -
             (src[static_cast<std::size_t>(p)] + p * p)) /
            (2.0 * q - 2.0 * p);
        if (s <= z[static_cast<std::size_t>(k)]) {
          --k;
        } else {
          break;
        }
      }
      ++k;
      v[static_cast<std::size_t>(k)] = q;
      z[static_cast<std::size_t>(k)] = s;
      z[static_cast<std::size_t>(k) + 1] = kBig;
    }
    k = 0;
    for (int q = 0; q < static_cast<int>(n); ++q) {
      while (z[static_cast<std::size_t>(k) + 1] < q) ++k;
      int p = v[static_cast<std::size_t>(k)];
      d[static_cast<std::size_t>(q)] =
          (q - p) * (q - p) + src[static_cast<std::size_t>(p)];
    }
    src = d;
  };
  // columns then rows
  std::vector<double> col(h);
  for (std::size_t x = 0; x < w; ++x) {
    for (std::size_t y = 0; y < h; ++y) col[y] = f[y * w + x];
    dt1d(col);
    for (std::size_t y = 0; y < h; ++y) f[y * w + x] = col[y];
  }
  std::vector<double> row(w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) row[x] = f[y * w + x];
    dt1d(row);
    for (std::size_t x = 0; x < w; ++x) f[y * w + x] = row[x];
  }
  std::vector<double> out(w * h);
  for (std::size_t i = 0; i < f.size(); ++i) {
    out[i] = std::sqrt(f[i]) * grid.resolution;
  }
  return out;
}

std::optional<std::vector<Cell>> grid_astar(const ClassifiedGrid& grid,
                                            Cell from, Cell to) {
  if (!grid.is_deterministic(from.first, from.second) ||
      !grid.is_deterministic(to.first, to.second)) {
    return std::nullopt;
  }
  auto octile = [&](Cell c) {
    double dx = std::abs(c.first - to.first);
    double dy = std::abs(c.second - to.second);
    return grid.resolution *
           (std::max(dx, dy) + (std::sqrt(2.0) - 1.0) * std::min(dx, dy));
  };
  std::size_t n = grid.labels.size();
  std::vector<double> dist(n, kInf);
  std::vector<int> prev(n, -1);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
  std::size_t src = cell_index(grid, from), dst = cell_index(grid, to);
  dist[src] = 0.0;
  pq.push({octile(from), src});
  while (!pq.empty()) {
    auto [fd, u] = pq.top();
    pq.pop();
    if (u == dst) break;
    int ux = static_cast<int>(u % static_cast<std::size_t>(grid.width));
    int uy = static_cast<int>(u / static_cast<std::size_t>(grid.width));
    if (fd > dist[u] + octile({ux, uy}) + 1e-12) continue;
    for (int k = 0; k < 8; ++k) {
      int nx = ux + kDx8[k], ny = uy + kDy8[k];
      if (!grid.is_deterministic(nx, ny)) continue;
      if (k >= 4 && !(grid.is_deterministic(ux + kDx8[k], uy) &&
                      grid.is_deterministic(ux, uy + kDy8[k]))) {
        continue;
      }
      double nd = dist[u] + step_cost(k, grid.resolution);
      std::size_t v = cell_index(grid, {nx, ny});
      if (nd < dist[v]) {
        dist[v] = nd;
        prev[v] = static_cast<int>(u);
        pq.push({nd + octile({nx, ny}), v});
      }
    }
  }
  if (dist[dst] == kInf) return std::nullopt;
  std::vector<Cell> path;
  for (int cur = static_cast<int>(dst); cur != -1;
       cur = prev[static_cast<std::size_t>(cur)]) {
    std::size_t c = static_cast<std::size_t>(cur);
    path.push_back({static_cast<int>(c % static_cast<std::size_t>(grid.width)),
                    static_cast<int>(c / static_cast<std::size_t>(grid.width))});
  }
  std::reverse(path.begin(), path.end());
  return path;
}

std::vector<Cell> supercover_line(Cell a, Cell b) {
  // All cells a segment between cell centres passes through.
  std::vector<Cell> cells;
  int x0 = a.first, y0 = a.second, x1 = b.first, y1 = b.second;
  int dx = std::abs(x1 - x0), dy = std::abs(y1 - y0);
  int x = x0, y = y0;
  int sx = x1 > x0 ? 1 : -1;
  int sy = y1 > y0 ? 1 : -1;
  cells.push_back({x, y});
  if (dx >= dy) {
    int err = dx;  // 2*err tracking with corner handling
    int e = 0;
    for (int i = 0; i < dx; ++i) {
      x += sx;
      e += 2 * dy;
      if (e > err) {
        y += sy;
        e -= 2 * dx;
        if (e + err < 2 * dx) cells.push_back({x - sx, y});
        else if (e + err > 2 * dx) cells.push_back({x, y - sy});
        else {
          cells.push_back({x - sx, y});
          cells.push_back({x, y - sy});
        }
      }
      cells.push_back({x, y});
    }
  } else {
    int err = dy;
    int e = 0;
    for (int i = 0; i < dy; ++i) {
      y += sy;
      e += 2 * dx;
      if (e > err) {
        x += sx;
        e -= 2 * dy;
        if (e + err < 2 * dy) cells.push_back({x, y - sy});
        else if (e + err > 2 * dy) cells.push_back({x - sx, y});
        else {
          cells.push_back({x, y - sy});
          cells.push_back({x - sx, y});
        }
      }
      cells.push_back({x, y});
    }
  }
  return cells;
}

bool line_of_sight(const ClassifiedGrid& grid, Cell a, Cell b) {
  for (Cell c : supercover_line(a, b)) {
    if (!grid.is_deterministic(c.first, c.second)) return false;
  }
  return true;
}

double polyline_length_m(const std::vector<Cell>& waypoints,
                         double resolution) {
  double len = 0.0;
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    double dx = waypoints[i].first - waypoints[i - 1].first;
    double dy = waypoints[i].second - waypoints[i - 1].second;
    len += std::sqrt(dx * dx + dy * dy) * resolution;
  }
  return len;
}

std::vector<Cell> smooth_path(const ClassifiedGrid& grid,
                              const std::vector<Cell>& path,
                              std::mt19937_64& rng) {
  if (path.size() <= 2) return path;
  std::vector<Cell> wp = path;
  auto segment_len = [&](Cell a, Cell b) {
    double dx = a.first - b.first, dy = a.second - b.second;
    return std::sqrt(dx * dx + dy * dy) * grid.resolution;
  };
  auto try_shortcut = [&](std::size_t i, std::size_t j) {
    if (j <= i + 1) return;
    double current = 0.0;
    for (std::size_t t = i; t < j; ++t) current += segment_len(wp[t], wp[t + 1]);
    double direct = segment_len(wp[i], wp[j]);
    if (direct + 1e-12 >= current) return;
    if (!line_of_sight(grid, wp[i], wp[j])) return;
    wp.erase(wp.begin() + static_cast<std::ptrdiff_t>(i) + 1,
             wp.begin() + static_cast<std::ptrdiff_t>(j));
  };
  try_shortcut(0, wp.size() - 1);
  std::size_t iterations = 4 * path.size();
  for (std::size_t it = 0; it < iterations && wp.size() > 2; ++it) {
    std::uniform_int_distribution<std::size_t> pick(0, wp.size() - 1);
    std::size_t i = pick(rng), j = pick(rng);
    if (i > j) std::swap(i, j);
    try_shortcut(i, j);
  }
  return wp;
}

namespace {

std::optional<Cell> snap_to_water(const ClassifiedGrid& grid, Cell c,
                                  int radius) {
  if (grid.in_bounds(c.first, c.second) &&
      grid.is_deterministic(c.first, c.second)) {
    return c;
  }
  std::optional<Cell> best;
  double best_d = kInf;
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      int nx = c.first + dx, ny = c.second + dy;
      if (!grid.is_deterministic(nx, ny)) continue;
      double d = std::sqrt(static_cast<double>(dx) * dx +
                           static_cast<double>(dy) * dy);
      if (d < best_d) {
        best_d = d;
        best = Cell{nx, ny};
      }
    }
  }
  if (best && best_d <= radius) return best;
  return std::nullopt;
}

struct NodeSeed {
  Cell cell;
  std::string role;  // start | target | endpoint | waypoint
};

}  // namespace

ExtractionResult extract_graph(
    const WaterMaskRaster& raster, std::pair<double, double> start_xy,
    const std::vector<std::pair<double, double>>& targets_xy,
    const ExtractorConfig& config) {
  ClassifiedGrid grid =
      classify_pixels(raster, config.det_threshold, config.stoch_threshold);

  auto to_cell = [&](std::pair<double, double> xy) {
    return Cell{static_cast<int>(std::floor(xy.first / raster.resolution)),
                static_cast<int>(std::floor(xy.second / raster.resolution))};
  };
  auto snapped = [&](std::pair<double, double> xy, const std::string& what) {
    auto cell = snap_to_water(grid, to_cell(xy), config.snap_radius_cells);
    if (!cell) {
      throw std::invalid_argument(
          what + " at (" + std::to_string(xy.first) + ", " +
          std::to_string(xy.second) +
          ") is not on deterministic water (snap radius " +
          std::to_string(config.snap_radius_cells) + " cells)");
    }
    return *cell;
  };

  std::vector<NodeSeed> seeds;
  seeds.push_back({snapped(start_xy, "start"), "start"});
  for (std::size_t i = 0; i < targets_xy.size(); ++i) {
    seeds.push_back(
        {snapped(targets_xy[i], "target " + std::to_string(i)), "target"});
  }

  std::vector<PixelEdge> pinches = detect_pinch_points(grid, raster, config);

  auto seed_index_of_cell = [&](Cell c) -> int {
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      if (seeds[i].cell == c) return static_cast<int>(i);
    }
    return -1;
  };
  struct StochCandidate {
    int a, b;  // seed indices
    PixelEdge pixel;
  };
  std::vector<StochCandidate> stoch;
  for (const PixelEdge& e : pinches) {
    int ia = seed_index_of_cell(e.a);
    if (ia < 0) {
      ia = static_cast<int>(seeds.size());
      seeds.push_back({e.a, "endpoint"});
    }
    int ib = seed_index_of_cell(e.b);
    if (ib < 0) {
      ib = static_cast<int>(seeds.size());
      seeds.push_back({e.b, "endpoint"});
    }
    stoch.push_back({ia, ib, e});
  }

  // Deterministic pixel paths between all node pairs, smoothed with a seeded
  // generator so the pipeline output is reproducible.
  std::mt19937_64 rng(config.seed);
  struct DetCandidate {
    int a, b;
    std::vector<Cell> waypoints;
    std::vector<Cell> cells;  // supercover of the polyline
    double length_m;
    double block_prob = 0.0;
    std::string kind = "deterministic";
  };
  std::vector<DetCandidate> det;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    for (std::size_t j = i + 1; j < seeds.size(); ++j) {
      auto raw = grid_astar(grid, seeds[i].cell, seeds[j].cell);
      if (!raw) continue;
      DetCandidate c;
      c.a = static_cast<int>(i);
      c.b = static_cast<int>(j);
      c.waypoints = smooth_path(grid, *raw, rng);
      c.length_m = polyline_length_m(c.waypoints, grid.resolution);
      for (std::size_t s = 1; s < c.waypoints.size(); ++s) {
        auto seg = supercover_line(c.waypoints[s - 1], c.waypoints[s]);
        if (s > 1) seg.erase(seg.begin());
        c.cells.insert(c.cells.end(), seg.begin(), seg.end());
      }
      if (c.waypoints.size() == 1) c.cells = {c.waypoints.front()};
      det.push_back(std::move(c));
    }
  }

  // Windy reclassification: deterministic edges crossing open water far from
  // any boundary get a small blocking probability.
  std::vector<double> to_boundary = boundary_distance_m(grid);
  for (DetCandidate& c : det) {
    for (Cell cell : c.cells) {
      if (to_boundary[cell_index(grid, cell)] >= config.windy_dist_m) {
        c.kind = "windy";
        c.block_prob = config.wind_block_prob;
        break;
      }
    }
  }

  // Prune stochastic candidates that never strictly shorten a closure
  // distance between mission nodes (start and targets), not even by
  // connecting them. Baseline metric uses strictly deterministic edges.
  std::size_t n_seeds = seeds.size();
  auto closure = [&](const std::vector<std::pair<std::pair<int, int>, double>>&
                         extra) {
    std::vector<std::vector<double>> d(
        n_seeds, std::vector<double>(n_seeds, kInf));
    for (std::size_t i = 0; i < n_seeds; ++i) d[i][i] = 0.0;
    auto relax_edge = [&](int a, int b, double w) {
      std::size_t ia = static_cast<std::size_t>(a);
      std::size_t ib = static_cast<std::size_t>(b);
      d[ia][ib] = std::min(d[ia][ib], w);
      d[ib][ia] = std::min(d[ib][ia], w);
    };
    for (const DetCandidate& c : det) {
      if (c.block_prob == 0.0) relax_edge(c.a, c.b, c.length_m);
    }
    for (const auto& [pair, w] : extra) relax_edge(pair.first, pair.second, w);
    for (std::size_t k = 0; k < n_seeds; ++k) {
      for (std::size_t i = 0; i < n_seeds; ++i) {
        for (std::size_t j = 0; j < n_seeds; ++j) {
          d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
        }
      }
    }
    return d;
  };
  auto base = closure({});
  std::size_t mission_nodes = 1 + targets_xy.size();
  std::vector<StochCandidate> retained;
  for (const StochCandidate& c : stoch) {
    auto with = closure({{{c.a, c.b}, c.pixel.length_m}});
    bool useful = false;
    for (std::size_t i = 0; i < mission_nodes && !useful; ++i) {
      for (std::size_t j = i + 1; j < mission_nodes && !useful; ++j) {
        useful = with[i][j] < base[i][j] - 1e-9 ||
                 (base[i][j] == kInf && with[i][j] < kInf);
      }
    }
    if (useful) retained.push_back(c);
  }

  std::vector<char> seed_used(n_seeds, 0);
  for (std::size_t i = 0; i < mission_nodes; ++i) seed_used[i] = 1;
  for (const StochCandidate& c : retained) {
    seed_used[static_cast<std::size_t>(c.a)] = 1;
    seed_used[static_cast<std::size_t>(c.b)] = 1;
  }

  // Same-pair conflicts between a retained stochastic edge and a
  // deterministic path: split the deterministic path at its midpoint node to
  // keep one record per pair without losing the fallback distance.
  std::set<std::pair<int, int>> stoch_pairs;
  for (const StochCandidate& c : retained) {
    stoch_pairs.insert({std::min(c.a, c.b), std::max(c.a, c.b)});
  }

  struct FinalEdge {
    int a, b;
    double length;
    double block_prob;
    std::string kind;
    std::vector<Cell> cells;
  };
  std::vector<FinalEdge> final_edges;
  std::vector<NodeSeed> extra_nodes;
  for (const DetCandidate& c : det) {
    if (!seed_used[static_cast<std::size_t>(c.a)] ||
        !seed_used[static_cast<std::size_t>(c.b)]) {
      continue;  // endpoint of a pruned pinch path
    }
    std::pair<int, int> key{std::min(c.a, c.b), std::max(c.a, c.b)};
    if (!stoch_pairs.count(key)) {
      final_edges.push_back(
          {c.a, c.b, c.length_m, c.block_prob, c.kind, c.cells});
      continue;
    }
    // Conflict: insert a waypoint node halfway along the parallel
    // deterministic route.
    double half = c.length_m / 2.0;
    double acc = 0.0;
    std::size_t split = 1;
    for (; split + 1 < c.waypoints.size(); ++split) {
      double dx = c.waypoints[split].first - c.waypoints[split - 1].first;
      double dy = c.waypoints[split].second - c.waypoints[split - 1].second;
      acc += std::sqrt(dx * dx + dy * dy) * grid.resolution;
      if (acc >= half) break;
    }
    int mid_seed = static_cast<int>(n_seeds + extra_nodes.size());
    extra_nodes.push_back({c.waypoints[split], "waypoint"});
    std::vector<Cell> first_half(c.waypoints.begin(),
                                 c.waypoints.begin() +
                                     static_cast<std::ptrdiff_t>(split) + 1);
    std::vector<Cell> second_half(c.waypoints.begin() +
                                      static_cast<std::ptrdiff_t>(split),
                                  c.waypoints.end());
    final_edges.push_back({c.a, mid_seed,
                           polyline_length_m(first_half, grid.resolution),
                           c.block_prob, c.kind, first_half});
    final_edges.push_back({mid_seed, c.b,
                           polyline_length_m(second_half, grid.resolution),
                           c.block_prob, c.kind, second_half});
  }
  for (const StochCandidate& c : retained) {
    final_edges.push_back({c.a, c.b, c.pixel.length_m, c.pixel.block_prob,
                           c.pixel.kind, c.pixel.path});
  }

  // Renumber to dense ids: mission nodes and used endpoints keep seed order.
  std::vector<NodeSeed> all_seeds = seeds;
  all_seeds.insert(all_seeds.end(), extra_nodes.begin(), extra_nodes.end());
  std::vector<char> all_used(all_seeds.size(), 0);
  for (std::size_t i = 0; i < n_seeds; ++i) all_used[i] = seed_used[i];
  for (std::size_t i = n_seeds; i < all_seeds.size(); ++i) all_used[i] = 1;
  std::vector<int> new_id(all_seeds.size(), -1);
  std::vector<Node> nodes;
  for (std::size_t i = 0; i < all_seeds.size(); ++i) {
    if (!all_used[i]) continue;
    new_id[i] = static_cast<int>(nodes.size());
    auto [x, y] = raster.center(all_seeds[i].cell);
    nodes.push_back({new_id[i], x, y});
  }
  std::vector<Edge> edges;
  std::vector<EdgeProvenance> provenance;
  std::stable_sort(final_edges.begin(), final_edges.end(),
                   [](const FinalEdge& a, const FinalEdge& b) {
                     bool sa = a.block_prob > 0.0, sb = b.block_prob > 0.0;
                     if (sa != sb) return !sa;  // deterministic first
                     return false;
                   });
  for (const FinalEdge& e : final_edges) {
    edges.push_back({new_id[static_cast<std::size_t>(e.a)],
                     new_id[static_cast<std::size_t>(e.b)], e.length,
                     e.block_prob});
    EdgeProvenance p;
    p.kind = e.kind;
    for (Cell c : e.cells) p.pixel_path.push_back(c);
    provenance.push_back(std::move(p));
  }

  std::vector<int> target_ids;
  for (std::size_t i = 1; i < mission_nodes; ++i) {
    target_ids.push_back(new_id[i]);
  }

  ExtractionResult result{
      StochasticGraph(std::move(nodes), std::move(edges), new_id[0],
                      target_ids),
      std::move(provenance),
      {}};

  // Flag targets that are unreachable even with every stochastic edge open.
  InformationVector all_amb = result.graph.all_ambiguous();
  std::set<int> reach =
      reachable_set(result.graph, result.graph.start(), all_amb);
  for (int t : result.graph.targets()) {
    if (!reach.count(t)) {
      result.warnings.push_back("target node " + std::to_string(t) +
                                " is unreachable even optimistically");
    }
  }
  return result;
}

}  // namespace pcctp
