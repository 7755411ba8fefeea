#include "pcctp/graph_io.hpp"

#include <fstream>

namespace pcctp {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json graph_to_json(const StochasticGraph& g) {
  return graph_to_json(g, {});
}

ordered_json graph_to_json(const StochasticGraph& g,
                           const std::vector<EdgeProvenance>& provenance) {
  ordered_json j;
  j["nodes"] = ordered_json::array();
  for (const Node& n : g.nodes()) {
    j["nodes"].push_back({{"id", n.id}, {"x", n.x}, {"y", n.y}});
  }
  j["edges"] = ordered_json::array();
  for (std::size_t e = 0; e < g.edges().size(); ++e) {
    const Edge& ed = g.edges()[e];
    ordered_json je = {{"u", ed.u},
                       {"v", ed.v},
                       {"cost", ed.cost},
                       {"block_prob", ed.block_prob}};
    if (e < provenance.size()) {
      je["kind"] = provenance[e].kind;
      ordered_json path = ordered_json::array();
      for (auto [x, y] : provenance[e].pixel_path) {
        path.push_back({x, y});
      }
      je["pixel_path"] = std::move(path);
    }
    j["edges"].push_back(std::move(je));
  }
  j["start"] = g.start();
  j["targets"] = g.targets();
  return j;
}

StochasticGraph graph_from_json(const json& j) {
  try {
    std::vector<Node> nodes;
    for (const auto& jn : j.at("nodes")) {
      Node n;
      n.id = jn.at("id").get<int>();
      n.x = jn.value("x", 0.0);
      n.y = jn.value("y", 0.0);
      nodes.push_back(n);
    }
    std::vector<Edge> edges;
    for (const auto& je : j.at("edges")) {
      Edge e;
      e.u = je.at("u").get<int>();
      e.v = je.at("v").get<int>();
      e.cost = je.at("cost").get<double>();
      e.block_prob = je.value("block_prob", 0.0);
      edges.push_back(e);
    }
    int start = j.at("start").get<int>();
    std::vector<int> targets = j.at("targets").get<std::vector<int>>();
    return StochasticGraph(std::move(nodes), std::move(edges), start,
                           std::move(targets));
  } catch (const json::exception& ex) {
    throw std::invalid_argument(std::string("malformed graph json: ") +
                                ex.what());
  }
}

StochasticGraph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::invalid_argument("cannot open graph file: " + path);
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& ex) {
    throw std::invalid_argument("cannot parse " + path + ": " + ex.what());
  }
  return graph_from_json(j);
}

void save_graph(const StochasticGraph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::invalid_argument("cannot write graph file: " + path);
  }
  out << graph_to_json(g).dump(2) << "\n";
}

}  // namespace pcctp
