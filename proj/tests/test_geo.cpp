#include <cmath>
#include <numbers>
#include <set>

#include "doctest.h"
#include "routekg/geo/geometry.hpp"
#include "routekg/geo/matrices.hpp"
#include "routekg/geo/network.hpp"
#include "support.hpp"

using namespace routekg;
using testing::edge_between;

TEST_CASE("minimal network from JSON") {
  const auto net = geo::parse_network_json(
      R"({"nodes":[{"id":0,"lat":30,"lon":104},{"id":1,"lat":30.001,"lon":104}],)"
      R"("edges":[{"id":0,"u":0,"v":1,"length":111}]})");
  CHECK(net.num_nodes() == 2);
  CHECK(net.num_edges() == 1);
  REQUIRE(net.out_edges(0).size() == 1);
  CHECK(net.out_edges(0)[0] == 0);
  CHECK(net.out_edges(1).empty());
}

TEST_CASE("dangling node reference is refused") {
  CHECK_THROWS_WITH_AS(geo::parse_network_json(R"({"nodes":[{"id":0,"lat":30,"lon":104}],)"
                                               R"("edges":[{"id":0,"u":0,"v":7,"length":10}]})"),
                       doctest::Contains("dangling node reference"), DataError);
}

TEST_CASE("sparse ids are reindexed in ascending order") {
  const auto net = geo::parse_network_json(
      R"({"nodes":[{"id":40,"lat":30,"lon":104.001},{"id":10,"lat":30,"lon":104}],)"
      R"("edges":[{"id":9,"u":10,"v":40,"length":5},{"id":3,"u":40,"v":10,"length":5}]})");
  CHECK(net.edge(0).start_node == 1);
  CHECK(net.edge(1).start_node == 0);
}

TEST_CASE("CSV pair loads the same network") {
  const auto net = geo::parse_network_csv("id,lat,lon\n0,30,104\n1,30,104.001\n", "id,u,v,length\n0,0,1,96\n");
  CHECK(net.num_edges() == 1);
  CHECK(net.edge(0).length == 96.0);
}

TEST_CASE("network JSON round trip") {
  const auto a = testing::grid(3, 4, 0.2);
  const auto b = geo::parse_network_json(geo::network_to_json(a));
  CHECK(a.fingerprint() == b.fingerprint());
  for (std::size_t i = 0; i < a.num_nodes(); ++i) {
    CHECK(a.nodes()[i].lat == b.nodes()[i].lat);
    CHECK(a.nodes()[i].lon == b.nodes()[i].lon);
  }
}

TEST_CASE("grid sizes") {
  for (int n : {2, 3, 20}) {
    const auto net = testing::grid(n);
    CHECK(net.num_nodes() == static_cast<std::size_t>(n * n));
    CHECK(net.num_edges() == static_cast<std::size_t>(4 * n * (n - 1)));
  }
  CHECK(testing::grid(20).max_out_degree() == 4);
}

TEST_CASE("bearing classes") {
  CHECK(geo::discretize_bearing(0.0, 8) == 0);
  CHECK(geo::discretize_bearing(90.0, 8) == 2);
  CHECK(geo::discretize_bearing(359.0, 8) == 0);
  CHECK(geo::discretize_bearing(22.4, 8) == 0);
  CHECK(geo::discretize_bearing(22.6, 8) == 1);
  CHECK(geo::discretize_bearing(-90.0, 8) == 6);
  CHECK(geo::discretize_bearing(720.0 + 180.0, 8) == 4);
}

TEST_CASE("edge directions on a grid") {
  const auto net = testing::grid(3);
  // node = row * 3 + col, rows grow northward
  const EdgeId east = edge_between(net, 0, 1);
  const EdgeId north_of_it = edge_between(net, 3, 4);
  const EdgeId far_east = edge_between(net, 1, 2);
  CHECK(geo::edge_direction(net, east, north_of_it, 8) == 0);
  CHECK(geo::edge_direction(net, east, far_east, 8) == 2);
  CHECK(geo::edge_direction(net, east, east, 8) == 2);
  CHECK(geo::edge_direction(net, north_of_it, east, 8) == 4);
}

TEST_CASE("one-edge network has only its own heading") {
  const auto net = testing::line_network(2);
  const geo::DirectionMatrix D(net, 8);
  CHECK(D.label(0, 0) == 2);
  CHECK(D.intra(0) == 2);
}

TEST_CASE("stacked east-west edges point north") {
  std::vector<geo::Node> ns{{0, 30.0, 104.0}, {1, 30.0, 104.001}, {2, 30.001, 104.0}, {3, 30.001, 104.001}};
  std::vector<geo::DirectedEdge> es{{0, 0, 1, 0, 96.0}, {1, 2, 3, 0, 96.0}};
  const geo::RoadNetwork net(ns, es);
  const geo::DirectionMatrix D(net, 8);
  CHECK(D.label(0, 1) == 0);
  CHECK(D.label(1, 0) == 4);
}

TEST_CASE("direction labels match a bearing recomputation") {
  const auto net = testing::grid(3, 9, 0.3);
  for (int nd : {4, 8, 16}) {
    const geo::DirectionMatrix D(net, nd);
    for (std::size_t i = 0; i < net.num_edges(); ++i) {
      for (std::size_t j = 0; j < net.num_edges(); ++j) {
        const auto& a = net.edge(static_cast<EdgeId>(i));
        const auto& b = net.edge(static_cast<EdgeId>(j));
        auto mid = [&](const geo::DirectedEdge& e) {
          const auto& u = net.node(e.start_node);
          const auto& v = net.node(e.end_node);
          return std::pair{(u.lat + v.lat) / 2, (u.lon + v.lon) / 2};
        };
        auto bearing = [](double lat1, double lon1, double lat2, double lon2) {
          const double k = std::cos((lat1 + lat2) / 2 * std::numbers::pi / 180.0);
          const double east = (lon2 - lon1) * k;
          const double north = lat2 - lat1;
          double deg = std::atan2(east, north) * 180.0 / std::numbers::pi;
          return deg < 0 ? deg + 360.0 : deg;
        };
        double theta;
        if (i == j) {
          const auto& u = net.node(a.start_node);
          const auto& v = net.node(a.end_node);
          theta = bearing(u.lat, u.lon, v.lat, v.lon);
        } else {
          const auto [la, loa] = mid(a);
          const auto [lb, lob] = mid(b);
          if (la == lb && loa == lob) {
            CHECK(D.label(static_cast<EdgeId>(i), static_cast<EdgeId>(j)) == D.intra(static_cast<EdgeId>(i)));
            continue;
          }
          theta = bearing(la, loa, lb, lob);
        }
        const double width = 360.0 / nd;
        const int expect = static_cast<int>(std::floor(std::fmod(theta + width / 2, 360.0) / width)) % nd;
        CHECK(D.label(static_cast<EdgeId>(i), static_cast<EdgeId>(j)) == expect);
      }
    }
  }
}

TEST_CASE("dense and on-demand direction storage agree") {
  const auto net = testing::grid(4, 2, 0.25);
  const geo::DirectionMatrix dense(net, 8);
  const geo::DirectionMatrix lazy(net, 8, 0);
  CHECK(dense.dense());
  CHECK(!lazy.dense());
  for (std::size_t i = 0; i < net.num_edges(); ++i) {
    for (std::size_t j = 0; j < net.num_edges(); ++j) {
      CHECK(dense.label(static_cast<EdgeId>(i), static_cast<EdgeId>(j)) ==
            lazy.label(static_cast<EdgeId>(i), static_cast<EdgeId>(j)));
    }
  }
}

TEST_CASE("NAE rows") {
  const auto net = testing::grid(3);
  const geo::NaeMatrix A(net);
  CHECK(A.n_a() == 4);
  CHECK(A.pad() == static_cast<EdgeId>(net.num_edges()));
  const auto center = A.row(4);
  CHECK(std::count(center.begin(), center.end(), A.pad()) == 0);
  const auto corner = A.row(0);
  CHECK(std::count(corner.begin(), corner.end(), A.pad()) == 2);
  CHECK(corner[0] < corner[1]);
  std::multiset<EdgeId> seen;
  for (std::size_t v = 0; v < A.num_nodes(); ++v) {
    for (EdgeId e : A.row(static_cast<NodeId>(v))) {
      if (e != A.pad()) {
        CHECK(net.edge(e).start_node == static_cast<NodeId>(v));
        seen.insert(e);
      }
    }
  }
  CHECK(seen.size() == net.num_edges());
  CHECK(std::set<EdgeId>(seen.begin(), seen.end()).size() == net.num_edges());
}
