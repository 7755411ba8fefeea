#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "pcctp/evaluator.hpp"
#include "pcctp/extractor.hpp"
#include "pcctp/graph_io.hpp"
#include "pcctp/solver.hpp"

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitInputError = 2;
constexpr int kExitNoSolution = 3;
constexpr int kExitSizeCap = 4;

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write " + path);
  out << content;
}

struct ExtractArgs {
  std::string mask_path;
  std::string targets_path;
  double start_x = 0, start_y = 0;
  std::string out_path = "graph.json";
  pcctp::ExtractorConfig config;
};

ordered_json extract_config_json(const pcctp::ExtractorConfig& c) {
  return {{"det_threshold", c.det_threshold},
          {"stoch_threshold", c.stoch_threshold},
          {"search_radius_m", c.search_radius_m},
          {"dbscan_eps_m", c.dbscan_eps_m},
          {"dbscan_min_pts", c.dbscan_min_pts},
          {"windy_dist_m", c.windy_dist_m},
          {"wind_block_prob", c.wind_block_prob},
          {"snap_radius_cells", c.snap_radius_cells},
          {"seed", c.seed}};
}

int cmd_extract(const ExtractArgs& args) {
  pcctp::WaterMaskRaster raster = pcctp::WaterMaskRaster::load(args.mask_path);

  std::ifstream tf(args.targets_path);
  if (!tf) {
    throw std::invalid_argument("cannot open targets file: " +
                                args.targets_path);
  }
  json jt;
  try {
    tf >> jt;
  } catch (const json::exception& ex) {
    throw std::invalid_argument("cannot parse " + args.targets_path + ": " +
                                ex.what());
  }
  std::vector<std::pair<double, double>> targets;
  if (!jt.is_array()) {
    throw std::invalid_argument("targets file must be a JSON list of {x, y}");
  }
  for (const auto& t : jt) {
    targets.push_back({t.at("x").get<double>(), t.at("y").get<double>()});
  }

  pcctp::ExtractionResult result = pcctp::extract_graph(
      raster, {args.start_x, args.start_y}, targets, args.config);
  for (const std::string& w : result.warnings) {
    std::cerr << "warning: " << w << "\n";
  }

  ordered_json j = pcctp::graph_to_json(result.graph, result.provenance);
  j["config"] = extract_config_json(args.config);
  j["config"]["start_x"] = args.start_x;
  j["config"]["start_y"] = args.start_y;
  write_file(args.out_path, j.dump(2) + "\n");
  std::cout << "graph: " << result.graph.nodes().size() << " nodes, "
            << result.graph.edges().size() << " edges, k="
            << result.graph.k() << " -> " << args.out_path << "\n";
  return kExitOk;
}

struct SolveArgs {
  std::string graph_path;
  std::string out_path = "policy.json";
  std::string dot_path;
  double blocked_cost_factor = 1.0;
  std::size_t k_cap = 12;
};

int cmd_solve(const SolveArgs& args) {
  pcctp::StochasticGraph g = pcctp::load_graph(args.graph_path);
  pcctp::SolveOptions opts;
  opts.blocked_cost_factor = args.blocked_cost_factor;
  opts.k_cap = args.k_cap;
  pcctp::PcctpSolver solver(g, opts);
  pcctp::SolveResult result = solver.solve();

  if (!args.dot_path.empty()) {
    write_file(args.dot_path, pcctp::ao_tree_to_dot(result.tree, g));
  }
  if (result.status == pcctp::SolveStatus::NoSolution) {
    std::cerr << "no solution: start cannot cover the reachable targets\n";
    return kExitNoSolution;
  }
  ordered_json j = pcctp::policy_to_json(*result.policy, g);
  j["config"] = {{"blocked_cost_factor", args.blocked_cost_factor},
                 {"k_cap", args.k_cap},
                 {"graph", args.graph_path}};
  j["iterations"] = result.iterations;
  j["tree_nodes"] = result.tree.size();
  write_file(args.out_path, j.dump(2) + "\n");
  std::cout << "expected_cost: " << std::setprecision(12)
            << result.expected_cost << " (" << result.policy->nodes.size()
            << " policy nodes, " << result.tree.size() << " tree nodes) -> "
            << args.out_path << "\n";
  return kExitOk;
}

struct EvaluateArgs {
  std::string graph_path;
  std::string algo = "pcctp";
  std::string out_path = "report.json";
  std::string csv_path;
  double blocked_cost_factor = 1.0;
  std::size_t world_cap = 12;
};

ordered_json evaluate_config_json(const EvaluateArgs& args) {
  return {{"algo", args.algo},
          {"blocked_cost_factor", args.blocked_cost_factor},
          {"world_cap", args.world_cap},
          {"graph", args.graph_path}};
}

int cmd_evaluate(const EvaluateArgs& args) {
  pcctp::StochasticGraph g = pcctp::load_graph(args.graph_path);
  pcctp::EvaluateOptions opts;
  opts.blocked_cost_factor = args.blocked_cost_factor;
  opts.world_cap = args.world_cap;
  opts.k_cap = args.world_cap;
  pcctp::EvaluationReport report =
      pcctp::expected_regret(g, pcctp::algorithm_from_string(args.algo), opts);

  ordered_json j = pcctp::report_to_json(report);
  j["config"] = evaluate_config_json(args);
  write_file(args.out_path, j.dump(2) + "\n");
  if (!args.csv_path.empty()) {
    std::string csv = "# config: " + j["config"].dump() + "\n" +
                      pcctp::report_to_csv(report);
    write_file(args.csv_path, csv);
  }
  std::cout << report.algorithm << ": expected_cost="
            << std::setprecision(12) << report.expected_cost
            << " expected_regret=" << report.expected_regret << " -> "
            << args.out_path << "\n";
  return kExitOk;
}

struct CompareArgs {
  std::string graph_path;
  std::string out_path;
  double blocked_cost_factor = 1.0;
  std::size_t world_cap = 12;
};

int cmd_compare(const CompareArgs& args) {
  pcctp::StochasticGraph g = pcctp::load_graph(args.graph_path);
  pcctp::EvaluateOptions opts;
  opts.blocked_cost_factor = args.blocked_cost_factor;
  opts.world_cap = args.world_cap;
  opts.k_cap = args.world_cap;

  ordered_json out;
  out["config"] = {{"blocked_cost_factor", args.blocked_cost_factor},
                   {"world_cap", args.world_cap},
                   {"graph", args.graph_path}};
  out["rows"] = ordered_json::array();
  std::cout << std::left << std::setw(10) << "algo" << std::setw(18)
            << "expected_cost" << std::setw(18) << "expected_regret"
            << "wall_time_s\n";
  for (pcctp::Algorithm algo :
       {pcctp::Algorithm::Pcctp, pcctp::Algorithm::Greedy,
        pcctp::Algorithm::OptimisticTsp, pcctp::Algorithm::CyclicRouting}) {
    auto t0 = std::chrono::steady_clock::now();
    pcctp::EvaluationReport report = pcctp::expected_regret(g, algo, opts);
    double dt = std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
    std::cout << std::left << std::setw(10) << report.algorithm
              << std::setw(18) << std::setprecision(10) << report.expected_cost
              << std::setw(18) << report.expected_regret << dt << "\n";
    out["rows"].push_back({{"algo", report.algorithm},
                           {"expected_cost", report.expected_cost},
                           {"expected_regret", report.expected_regret},
                           {"wall_time_s", dt}});
  }
  if (!args.out_path.empty()) {
    write_file(args.out_path, out.dump(2) + "\n");
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mission planning on stochastic navigation graphs"};
  app.require_subcommand(1);

  ExtractArgs ex;
  CLI::App* extract = app.add_subcommand(
      "extract", "Build a stochastic graph from a water-mask raster");
  extract->add_option("--mask", ex.mask_path, "PWM1 raster file")->required();
  extract->add_option("--targets", ex.targets_path,
                      "JSON list of {x, y} target coordinates (meters)")
      ->required();
  extract->add_option("--start-x", ex.start_x, "start x (meters)")->required();
  extract->add_option("--start-y", ex.start_y, "start y (meters)")->required();
  extract->add_option("--det-threshold", ex.config.det_threshold,
                      "deterministic water probability threshold");
  extract->add_option("--stoch-threshold", ex.config.stoch_threshold,
                      "stochastic water probability threshold");
  extract->add_option("--search-radius", ex.config.search_radius_m,
                      "pinch-point search radius (meters)");
  extract->add_option("--dbscan-eps", ex.config.dbscan_eps_m,
                      "pinch-point clustering radius (meters)");
  extract->add_option("--dbscan-min", ex.config.dbscan_min_pts,
                      "DBSCAN min points");
  extract->add_option("--windy-dist", ex.config.windy_dist_m,
                      "distance from shore that counts as windy (meters)");
  extract->add_option("--wind-block-prob", ex.config.wind_block_prob,
                      "blocking probability of windy edges");
  extract->add_option("--seed", ex.config.seed, "path smoothing seed");
  extract->add_option("--out", ex.out_path, "output graph JSON");

  SolveArgs so;
  CLI::App* solve =
      app.add_subcommand("solve", "Compute the optimal mission policy");
  solve->add_option("--graph", so.graph_path, "graph JSON")->required();
  solve->add_option("--out", so.out_path, "output policy JSON");
  solve->add_option("--dot", so.dot_path, "write the search tree as DOT");
  solve->add_option("--blocked-cost-factor", so.blocked_cost_factor,
                    "cost multiplier for failed attempts");
  solve->add_option("--k-cap", so.k_cap, "stochastic edge cap");

  EvaluateArgs ev;
  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "Evaluate one algorithm over all worlds");
  evaluate->add_option("--graph", ev.graph_path, "graph JSON")->required();
  evaluate->add_option("--algo", ev.algo, "pcctp|greedy|tsp|cr");
  evaluate->add_option("--out", ev.out_path, "output report JSON");
  evaluate->add_option("--csv", ev.csv_path, "per-world CSV");
  evaluate->add_option("--blocked-cost-factor", ev.blocked_cost_factor,
                       "cost multiplier for failed attempts");
  evaluate->add_option("--world-cap", ev.world_cap,
                       "exhaustive enumeration cap");

  CompareArgs co;
  CLI::App* compare = app.add_subcommand(
      "compare", "Compare all algorithms on one instance");
  compare->add_option("--graph", co.graph_path, "graph JSON")->required();
  compare->add_option("--out", co.out_path, "output JSON");
  compare->add_option("--blocked-cost-factor", co.blocked_cost_factor,
                      "cost multiplier for failed attempts");
  compare->add_option("--world-cap", co.world_cap,
                      "exhaustive enumeration cap");

  CLI11_PARSE(app, argc, argv);

  try {
    if (extract->parsed()) return cmd_extract(ex);
    if (solve->parsed()) return cmd_solve(so);
    if (evaluate->parsed()) return cmd_evaluate(ev);
    if (compare->parsed()) return cmd_compare(co);
  } catch (const pcctp::SizeCapError& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitSizeCap;
  } catch (const pcctp::NoSolutionError& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitNoSolution;
  } catch (const pcctp::FormatError& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitInputError;
  } catch (const std::invalid_argument& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitInputError;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return kExitOk;
}
