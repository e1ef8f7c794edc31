#include "routekg/geo/matrices.hpp"

#include <stdexcept>

namespace routekg::geo {

LatLon edge_midpoint(const RoadNetwork& net, EdgeId e) {
  const DirectedEdge& d = net.edge(e);
  const Node& a = net.node(d.start_node);
  const Node& b = net.node(d.end_node);
  return {0.5 * (a.lat + b.lat), 0.5 * (a.lon + b.lon)};
}

namespace {

int heading_class(const RoadNetwork& net, EdgeId e, int n_d) {
  const DirectedEdge& d = net.edge(e);
  const Node& a = net.node(d.start_node);
  const Node& b = net.node(d.end_node);
  // A self-loop has no heading; class 0 by convention.
  const auto theta = bearing_deg({a.lat, a.lon}, {b.lat, b.lon});
  return theta ? discretize_bearing(*theta, n_d) : 0;
}

int inter_class(LatLon from, LatLon to, int fallback, int n_d) {
  const auto theta = bearing_deg(from, to);
  return theta ? discretize_bearing(*theta, n_d) : fallback;
}

}  // namespace

int edge_direction(const RoadNetwork& net, EdgeId from_edge, EdgeId to_edge, int n_d) {
  if (n_d < 1) throw std::invalid_argument("n_d must be >= 1");
  const int own = heading_class(net, from_edge, n_d);
  if (from_edge == to_edge) return own;
  return inter_class(edge_midpoint(net, from_edge), edge_midpoint(net, to_edge), own, n_d);
}

DirectionMatrix::DirectionMatrix(const RoadNetwork& net, int n_d, std::size_t dense_cap) : n_d_(n_d) {
  if (n_d < 1 || n_d > 255) throw std::invalid_argument("n_d must be in [1, 255]");
  const std::size_t m = net.num_edges();
  intra_.resize(m);
  midpoints_.resize(m);
  for (std::size_t e = 0; e < m; ++e) {
    intra_[e] = static_cast<std::uint8_t>(heading_class(net, static_cast<EdgeId>(e), n_d));
    midpoints_[e] = edge_midpoint(net, static_cast<EdgeId>(e));
  }
  if (m <= dense_cap) {
    labels_.resize(m * m);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        labels_[i * m + j] = i == j ? intra_[i]
                                    : static_cast<std::uint8_t>(inter_class(midpoints_[i], midpoints_[j], intra_[i], n_d));
      }
    }
  }
}

int DirectionMatrix::label(EdgeId from, EdgeId to) const {
  const auto i = static_cast<std::size_t>(from);
  const auto j = static_cast<std::size_t>(to);
  if (!labels_.empty()) return labels_[i * intra_.size() + j];
  if (i == j) return intra_[i];
  return inter_class(midpoints_[i], midpoints_[j], intra_[i], n_d_);
}

DirectionMatrix build_direction_matrix(const RoadNetwork& net, int n_d, std::size_t dense_cap) {
  return DirectionMatrix(net, n_d, dense_cap);
}

NaeMatrix::NaeMatrix(const RoadNetwork& net)
    : n_a_(net.max_out_degree()), num_nodes_(net.num_nodes()), pad_(static_cast<EdgeId>(net.num_edges())) {
  table_.assign(num_nodes_ * n_a_, pad_);
  for (std::size_t v = 0; v < num_nodes_; ++v) {
    const auto out = net.out_edges(static_cast<NodeId>(v));
    for (std::size_t k = 0; k < out.size(); ++k) table_[v * n_a_ + k] = out[k];
  }
}

}  // namespace routekg::geo
