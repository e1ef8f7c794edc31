#pragma once

#include <algorithm>
#include <vector>

#include "routekg/geo/network.hpp"
#include "routekg/kg/model.hpp"

namespace testing {

using namespace routekg;

/// Nodes on a horizontal line, one eastbound edge between neighbours.
inline geo::RoadNetwork line_network(int nodes) {
  std::vector<geo::Node> ns;
  for (int i = 0; i < nodes; ++i) ns.push_back({i, 30.0, 104.0 + 0.001 * i});
  std::vector<geo::DirectedEdge> es;
  for (int i = 0; i + 1 < nodes; ++i) es.push_back({i, i, i + 1, 0, 100.0});
  return geo::RoadNetwork(std::move(ns), std::move(es));
}

inline geo::RoadNetwork grid(int side, std::uint64_t seed = 0, double jitter = 0.0) {
  geo::GridOptions o;
  o.side = side;
  o.seed = seed;
  o.jitter = jitter;
  return geo::generate_grid_network(o);
}

/// Edge from node a to node b; -1 if absent.
inline EdgeId edge_between(const geo::RoadNetwork& net, NodeId a, NodeId b) {
  for (EdgeId e : net.out_edges(a)) {
    if (net.edge(e).end_node == b) return e;
  }
  return -1;
}

/// Random directed graph with `nodes` nodes; some nodes may have no exits.
inline geo::RoadNetwork random_network(Rng& rng, int nodes) {
  std::vector<geo::Node> ns;
  for (int i = 0; i < nodes; ++i) ns.push_back({i, 30.0 + 0.01 * uniform01(rng), 104.0 + 0.01 * uniform01(rng)});
  std::vector<geo::DirectedEdge> es;
  for (int u = 0; u < nodes; ++u) {
    const auto deg = uniform_index(rng, 5);  // 0..4 exits
    std::vector<int> used;
    for (std::uint64_t k = 0; k < deg; ++k) {
      const int v = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(nodes)));
      if (v == u || std::find(used.begin(), used.end(), v) != used.end()) continue;
      used.push_back(v);
      es.push_back({static_cast<EdgeId>(es.size()), u, v, 0, 10.0 + uniform01(rng)});
    }
  }
  return geo::RoadNetwork(std::move(ns), std::move(es));
}

/// Random step distributions with a few exact ties.
inline kg::StepDistributions random_dists(Rng& rng, std::size_t edges, int steps) {
  kg::StepDistributions d;
  d.num_edges = edges;
  for (int s = 0; s < steps; ++s) {
    std::vector<double> p(edges + 1, 0.0);
    double sum = 0;
    for (std::size_t j = 0; j < edges; ++j) {
      p[j] = uniform01(rng) < 0.2 ? 0.5 : uniform01(rng);
      sum += p[j];
    }
    for (std::size_t j = 0; j < edges; ++j) p[j] /= sum;
    d.probs.push_back(std::move(p));
  }
  return d;
}

}  // namespace testing
