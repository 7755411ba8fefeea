#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pcctp/graph.hpp"
#include "pcctp/graph_io.hpp"

namespace pcctp {

/// Parse error carrying the 1-based line number of the offending input line.
struct FormatError : std::runtime_error {
  FormatError(int line_number, const std::string& message)
      : std::runtime_error("line " + std::to_string(line_number) + ": " +
                           message),
        line(line_number) {}
  int line;
};

using Cell = std::pair<int, int>;  // (x, y); x = column, y = row from top

/// Gridded water-coverage probabilities. Text format: a "PWM1" magic line,
/// then "<width> <height> <resolution_m>", then `height` rows of `width`
/// probabilities, top row first.
struct WaterMaskRaster {
  int width = 0;
  int height = 0;
  double resolution = 0.0;       // meters per cell
  std::vector<double> probs;     // row-major

  double prob(int x, int y) const {
    return probs[static_cast<std::size_t>(y) *
                     static_cast<std::size_t>(width) +
                 static_cast<std::size_t>(x)];
  }
  bool in_bounds(int x, int y) const {
    return x >= 0 && x < width && y >= 0 && y < height;
  }
  /// Metric coordinates of a cell centre.
  std::pair<double, double> center(Cell c) const {
    return {(c.first + 0.5) * resolution, (c.second + 0.5) * resolution};
  }

  static WaterMaskRaster parse(std::istream& in);
  static WaterMaskRaster load(const std::string& path);
  void save(const std::string& path) const;
};

enum class PixelClass : std::uint8_t { Land, StochasticWater, DeterministicWater };

struct ClassifiedGrid {
  int width = 0;
  int height = 0;
  double resolution = 0.0;
  std::vector<PixelClass> labels;
  std::vector<std::uint8_t> boundary;  // deterministic water on the water edge

  PixelClass label(int x, int y) const {
    return labels[static_cast<std::size_t>(y) *
                      static_cast<std::size_t>(width) +
                  static_cast<std::size_t>(x)];
  }
  bool is_boundary(int x, int y) const {
    return boundary[static_cast<std::size_t>(y) *
                        static_cast<std::size_t>(width) +
                    static_cast<std::size_t>(x)] != 0;
  }
  bool in_bounds(int x, int y) const {
    return x >= 0 && x < width && y >= 0 && y < height;
  }
  bool is_deterministic(int x, int y) const {
    return in_bounds(x, y) && label(x, y) == PixelClass::DeterministicWater;
  }
};

struct ExtractorConfig {
  double det_threshold = 0.9;
  double stoch_threshold = 0.5;
  double search_radius_m = 300.0;
  double dbscan_eps_m = 50.0;
  int dbscan_min_pts = 1;
  double windy_dist_m = 200.0;
  double wind_block_prob = 0.1;
  int snap_radius_cells = 5;
  std::uint64_t seed = 0;
};

/// Thresholds: prob >= det_threshold is deterministic water, prob >=
/// stoch_threshold is stochastic water, anything lower is land. Boundary
/// cells are deterministic water 4-adjacent to a non-deterministic cell or
/// the raster rim.
ClassifiedGrid classify_pixels(const WaterMaskRaster& raster,
                               double det_threshold = 0.9,
                               double stoch_threshold = 0.5);

/// Candidate edge at pixel resolution.
struct PixelEdge {
  Cell a, b;                    // boundary endpoints
  std::vector<Cell> path;      // includes endpoints
  double length_m = 0.0;
  double block_prob = 0.0;
  std::string kind;            // pinch_point | deterministic | windy
};

/// Shortest stochastic-water shortcuts between nearby boundary pixels,
/// deduplicated with DBSCAN over edge midpoints (shortest edge per cluster
/// wins). Blocking probability is one minus the minimum water probability
/// along the stochastic interior.
std::vector<PixelEdge> detect_pinch_points(const ClassifiedGrid& grid,
                                           const WaterMaskRaster& raster,
                                           const ExtractorConfig& config);

/// Exact Euclidean distance (meters) from each cell to the nearest boundary
/// cell.
std::vector<double> boundary_distance_m(const ClassifiedGrid& grid);

/// 8-connected A* over deterministic water; diagonal steps cost sqrt(2) times
/// the resolution.
std::optional<std::vector<Cell>> grid_astar(const ClassifiedGrid& grid,
                                            Cell from, Cell to);

/// Randomized shortcutting: repeatedly replaces waypoint subchains with a
/// straight segment when it stays on deterministic water and is strictly
/// shorter. The first pass always tries the two endpoints, so unobstructed
/// corridors collapse to a single segment.
std::vector<Cell> smooth_path(const ClassifiedGrid& grid,
                              const std::vector<Cell>& path,
                              std::mt19937_64& rng);

double polyline_length_m(const std::vector<Cell>& waypoints,
                         double resolution);

/// True when every cell crossed by the segment is deterministic water.
bool line_of_sight(const ClassifiedGrid& grid, Cell a, Cell b);

/// Cells crossed by the segment from a to b (supercover).
std::vector<Cell> supercover_line(Cell a, Cell b);

/// DBSCAN over 2-d points. Points not density-reachable from any core point
/// form singleton clusters so isolated candidates are kept.
std::vector<int> dbscan(const std::vector<std::pair<double, double>>& points,
                        double eps, int min_pts);

struct ExtractionResult {
  StochasticGraph graph;
  std::vector<EdgeProvenance> provenance;  // aligned with graph.edges()
  std::vector<std::string> warnings;
};

/// Full raster-to-graph pipeline: classify, detect pinch points, generate
/// smoothed deterministic paths between nodes, flag windy edges, prune
/// stochastic edges that never shorten a start/target closure distance.
ExtractionResult extract_graph(
    const WaterMaskRaster& raster, std::pair<double, double> start_xy,
    const std::vector<std::pair<double, double>>& targets_xy,
    const ExtractorConfig& config = {});

}  // namespace pcctp
