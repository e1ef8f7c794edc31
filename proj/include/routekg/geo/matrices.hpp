#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "routekg/geo/geometry.hpp"
#include "routekg/geo/network.hpp"

namespace routekg::geo {

inline constexpr int kDefaultDirections = 8;
inline constexpr std::size_t kDefaultDenseDirectionCap = 4096;

/// Representative point of an edge for inter-edge bearings (its midpoint).
LatLon edge_midpoint(const RoadNetwork& net, EdgeId e);

/// Direction class of the movement from `from_edge` to `to_edge`.  For
/// from_edge == to_edge this is the edge's own heading (start -> end node);
/// otherwise the bearing between edge midpoints.  Coincident reference points
/// fall back to the heading of `from_edge`.
int edge_direction(const RoadNetwork& net, EdgeId from_edge, EdgeId to_edge, int n_d);

/// Link-to-link discretized directions.  Dense |E|x|E| storage up to a
/// configurable edge-count cap; above the cap labels are computed on demand
/// from geometry, which is pure and thread-safe.
class DirectionMatrix {
 public:
  DirectionMatrix() = default;
  DirectionMatrix(const RoadNetwork& net, int n_d, std::size_t dense_cap = kDefaultDenseDirectionCap);

  int n_d() const { return n_d_; }
  std::size_t num_edges() const { return intra_.size(); }
  bool dense() const { return !labels_.empty(); }

  int label(EdgeId from, EdgeId to) const;
  int intra(EdgeId e) const { return intra_[static_cast<std::size_t>(e)]; }

 private:
  int n_d_ = kDefaultDirections;
  std::vector<std::uint8_t> intra_;
  std::vector<std::uint8_t> labels_;  // row-major when dense
  std::vector<LatLon> midpoints_;
};

DirectionMatrix build_direction_matrix(const RoadNetwork& net, int n_d = kDefaultDirections,
                                       std::size_t dense_cap = kDefaultDenseDirectionCap);

/// Node-adjacent-edges table: row v lists v's outgoing edges (ascending id)
/// then PAD = |E| up to the maximum out-degree.
class NaeMatrix {
 public:
  NaeMatrix() = default;
  explicit NaeMatrix(const RoadNetwork& net);

  std::size_t n_a() const { return n_a_; }
  std::size_t num_nodes() const { return num_nodes_; }
  EdgeId pad() const { return pad_; }
  std::span<const EdgeId> row(NodeId v) const {
    return {table_.data() + static_cast<std::size_t>(v) * n_a_, n_a_};
  }
  const std::vector<EdgeId>& table() const { return table_; }

 private:
  std::size_t n_a_ = 0;
  std::size_t num_nodes_ = 0;
  EdgeId pad_ = 0;
  std::vector<EdgeId> table_;
};

inline NaeMatrix build_nae_matrix(const RoadNetwork& net) { return NaeMatrix(net); }

}  // namespace routekg::geo
