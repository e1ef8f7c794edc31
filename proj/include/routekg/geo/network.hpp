#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "routekg/common.hpp"

namespace routekg::geo {

struct Node {
  NodeId id = 0;
  double lat = 0.0;  // degrees
  double lon = 0.0;  // degrees
};

struct DirectedEdge {
  EdgeId id = 0;
  NodeId start_node = 0;
  NodeId end_node = 0;
  int key = 0;  // disambiguates parallel edges between the same node pair
  double length = 0.0;  // meters
};

/// Multi-directed road graph.  Node and edge ids are dense and equal to
/// their position in `nodes()` / `edges()`.  Immutable once built.
class RoadNetwork {
 public:
  RoadNetwork() = default;

  /// Validates and indexes.  Throws DataError on non-dense ids, dangling
  /// node references, nonpositive lengths, non-finite coordinates, or a
  /// duplicate (start, end, key) triple.
  RoadNetwork(std::vector<Node> nodes, std::vector<DirectedEdge> edges);

  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_edges() const { return edges_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<DirectedEdge>& edges() const { return edges_; }
  const Node& node(NodeId v) const { return nodes_[static_cast<std::size_t>(v)]; }
  const DirectedEdge& edge(EdgeId e) const { return edges_[static_cast<std::size_t>(e)]; }

  /// Outgoing edge ids of `v`, ascending.
  std::span<const EdgeId> out_edges(NodeId v) const {
    const auto b = out_offsets_[static_cast<std::size_t>(v)];
    const auto e = out_offsets_[static_cast<std::size_t>(v) + 1];
    return {out_ids_.data() + b, e - b};
  }
  std::size_t out_degree(NodeId v) const { return out_edges(v).size(); }
  std::size_t max_out_degree() const;

  /// True when `to` can follow `from` in a route (end of `from` = start of `to`).
  bool connects(EdgeId from, EdgeId to) const { return edge(from).end_node == edge(to).start_node; }

  /// FNV-1a over the edge list (endpoints, key, length bits).
  std::uint64_t fingerprint() const;

 private:
  std::vector<Node> nodes_;
  std::vector<DirectedEdge> edges_;
  std::vector<std::size_t> out_offsets_;
  std::vector<EdgeId> out_ids_;
};

/// True when every consecutive pair of `route` connects in `net`.
bool is_connected_route(const RoadNetwork& net, std::span<const EdgeId> route);

/// Loads a network from a `.json` file, or from a directory / path prefix
/// holding `nodes.csv` and `edges.csv`.  Ids in the file may be any
/// non-negative integers; they are reindexed densely in ascending order.
RoadNetwork load_network(const std::filesystem::path& path);

RoadNetwork parse_network_json(std::string_view text);
RoadNetwork parse_network_csv(std::string_view nodes_csv, std::string_view edges_csv);

/// JSON document in the same schema `load_network` reads.
std::string network_to_json(const RoadNetwork& net);

struct GridOptions {
  int side = 20;
  double spacing = 200.0;  // meters
  /// Node positions are perturbed uniformly by up to jitter*spacing on each axis.
  double jitter = 0.0;
  std::uint64_t seed = 0;
  double origin_lat = 30.65;
  double origin_lon = 104.04;
};

/// side x side lattice; every undirected lattice edge becomes two directed
/// edges.  Node id = row * side + col, rows increasing northward.
RoadNetwork generate_grid_network(const GridOptions& opts);

}  // namespace routekg::geo
