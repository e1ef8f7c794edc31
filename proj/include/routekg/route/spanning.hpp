#pragma once

#include <span>
#include <vector>

#include "routekg/common.hpp"
#include "routekg/geo/matrices.hpp"
#include "routekg/geo/network.hpp"
#include "routekg/kg/model.hpp"

namespace routekg::route {

/// Top-K routes of one sample, in pre-order leaf order after removing
/// duplicates.
struct CandidateSet {
  std::vector<Route> routes;
  std::vector<bool> dead_end;  // route repeats an edge at a node without exits
};

/// Smallest n with n^steps >= k.
int default_branching(int k, int steps);

/// Expands a depth-Γ′ n-ary tree from `start_node`: each node's children
/// are its top-n outgoing edges by that step's probability (ties toward the
/// lower edge id), and the first K distinct leaves in pre-order become the
/// routes.  A node with fewer than n exits repeats its weakest child; a node
/// with no exits repeats the incoming edge (initially `incoming`).
/// Throws DataError when fewer than K distinct routes exist.
CandidateSet spanning_route(const kg::StepDistributions& dists, NodeId start_node, EdgeId incoming,
                            const geo::NaeMatrix& A, const geo::RoadNetwork& net, int n, int k);

/// Lockstep form over a batch; element i equals the scalar call on
/// (dists[i], start_nodes[i], incoming[i]).
std::vector<CandidateSet> spanning_route_batch(std::span<const kg::StepDistributions> dists,
                                               std::span<const NodeId> start_nodes, std::span<const EdgeId> incoming,
                                               const geo::NaeMatrix& A, const geo::RoadNetwork& net, int n, int k);

/// Top-n children of a node: real exits ordered by descending probability
/// then ascending id, padded with the last real child.  Empty when the node
/// has no exits.
std::vector<EdgeId> top_children(std::span<const double> probs, std::span<const EdgeId> nae_row, EdgeId pad, int n);

}  // namespace routekg::route
