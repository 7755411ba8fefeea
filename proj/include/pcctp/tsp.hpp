#pragma once

#include <optional>
#include <vector>

namespace pcctp {

/// Square matrix of pairwise distances; entries may be +infinity for
/// unreachable pairs.
using DistanceMatrix = std::vector<std::vector<double>>;

/// Exact minimum cost of a route that starts at `from`, visits every index in
/// `required` (in any order) and ends at `to`, computed by dynamic
/// programming over subsets. Returns nullopt when no finite route exists.
/// `from`, `to` and `required` index into the matrix; `required` must not
/// contain `from` or `to` duplicates are ignored.
std::optional<double> path_tsp(const DistanceMatrix& d, int from,
                               const std::vector<int>& required, int to);

/// Same as path_tsp but also reconstructs the visiting order of `required`.
std::optional<std::pair<double, std::vector<int>>> path_tsp_order(
    const DistanceMatrix& d, int from, const std::vector<int>& required,
    int to);

/// Generalized variant: visit at least one index from every group. Solved
/// exactly by dynamic programming over (satisfied groups, current node).
std::optional<double> set_tsp(const DistanceMatrix& d, int from,
                              const std::vector<std::vector<int>>& groups,
                              int to);

}  // namespace pcctp
