#pragma once

#include <string>

#include <json.hpp>

#include "pcctp/graph.hpp"

namespace pcctp {

/// Edge provenance carried through from graph extraction. Optional; edges
/// built by hand or loaded from minimal files have kind "unspecified".
struct EdgeProvenance {
  std::string kind = "unspecified";  // deterministic | pinch_point | windy
  std::vector<std::pair<int, int>> pixel_path;
};

nlohmann::ordered_json graph_to_json(const StochasticGraph& g);
nlohmann::ordered_json graph_to_json(
    const StochasticGraph& g, const std::vector<EdgeProvenance>& provenance);

/// Parses the interchange format. Unknown fields (config blocks, provenance)
/// are ignored. Throws std::invalid_argument with a description on malformed
/// input.
StochasticGraph graph_from_json(const nlohmann::json& j);

StochasticGraph load_graph(const std::string& path);
void save_graph(const StochasticGraph& g, const std::string& path);

}  // namespace pcctp
