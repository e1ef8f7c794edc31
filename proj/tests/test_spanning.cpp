#include "doctest.h"
#include "oracles.hpp"
#include "routekg/geo/matrices.hpp"
#include "routekg/route/spanning.hpp"
#include "support.hpp"

using namespace routekg;

TEST_CASE("default branching") {
  CHECK(route::default_branching(10, 5) == 2);
  CHECK(route::default_branching(1, 5) == 1);
  CHECK(route::default_branching(33, 5) == 3);
  CHECK(route::default_branching(8, 3) == 2);
}

TEST_CASE("top children order, ties and fill") {
  const std::vector<double> p{0.1, 0.4, 0.4, 0.1, 0.0};
  const std::vector<EdgeId> row{0, 2, 1, 4};
  CHECK(route::top_children(p, row, 4, 2) == std::vector<EdgeId>{1, 2});
  CHECK(route::top_children(p, row, 4, 4) == std::vector<EdgeId>{1, 2, 0, 0});
  CHECK(route::top_children(p, std::vector<EdgeId>{4, 4}, 4, 2).empty());
}

TEST_CASE("n = 1, K = 1 is the greedy route") {
  const auto net = testing::grid(3);
  const geo::NaeMatrix A(net);
  Rng rng = make_stream(3, "span");
  const auto d = testing::random_dists(rng, net.num_edges(), 4);
  const auto c = route::spanning_route(d, 0, testing::edge_between(net, 1, 0), A, net, 1, 1);
  REQUIRE(c.routes.size() == 1);
  NodeId v = 0;
  for (std::size_t s = 0; s < 4; ++s) {
    EdgeId best = -1;
    for (EdgeId e : net.out_edges(v)) {
      if (best < 0 || d.probs[s][static_cast<std::size_t>(e)] > d.probs[s][static_cast<std::size_t>(best)]) best = e;
    }
    CHECK(c.routes[0][s] == best);
    v = net.edge(best).end_node;
  }
}

TEST_CASE("3x3 grid, n = 2, three steps: all eight leaves in oracle order") {
  const auto net = testing::grid(3);
  const geo::NaeMatrix A(net);
  kg::StepDistributions d;
  d.num_edges = net.num_edges();
  for (int s = 0; s < 3; ++s) {
    std::vector<double> p(net.num_edges() + 1, 0.0);
    for (std::size_t j = 0; j < net.num_edges(); ++j) p[j] = static_cast<double>((j * 7 + static_cast<std::size_t>(s) * 3) % 11 + 1);
    d.probs.push_back(p);
  }
  const EdgeId in = testing::edge_between(net, 3, 4);
  const auto c = route::spanning_route(d, 4, in, A, net, 2, 8);
  const auto expect = oracle::spanning(d, net, 4, in, 2, 8);
  CHECK(c.routes == expect);
  CHECK(c.routes.size() == 8);
  for (const auto& r : c.routes) CHECK(geo::is_connected_route(net, r));
}

TEST_CASE("random networks match the oracle, scalar and batch") {
  Rng rng = make_stream(21, "span");
  for (int trial = 0; trial < 40; ++trial) {
    const auto net = testing::random_network(rng, 3 + static_cast<int>(uniform_index(rng, 20)));
    if (net.num_edges() == 0) continue;
    const geo::NaeMatrix A(net);
    const int n = 1 + static_cast<int>(uniform_index(rng, 3));
    const int steps = 1 + static_cast<int>(uniform_index(rng, 4));
    int leaves = 1;
    for (int s = 0; s < steps; ++s) leaves *= n;
    const int k = 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(leaves)));
    std::vector<kg::StepDistributions> ds;
    std::vector<NodeId> starts;
    std::vector<EdgeId> ins;
    std::vector<std::vector<Route>> expect;
    for (int b = 0; b < 8; ++b) {
      const auto in = static_cast<EdgeId>(uniform_index(rng, net.num_edges()));
      ds.push_back(testing::random_dists(rng, net.num_edges(), steps));
      starts.push_back(net.edge(in).end_node);
      ins.push_back(in);
      expect.push_back(oracle::spanning(ds.back(), net, starts.back(), in, n, k));
    }
    bool short_any = false;
    for (const auto& e : expect) short_any = short_any || e.size() < static_cast<std::size_t>(k);
    if (short_any) {
      CHECK_THROWS_AS(route::spanning_route_batch(ds, starts, ins, A, net, n, k), DataError);
      continue;
    }
    const auto batch = route::spanning_route_batch(ds, starts, ins, A, net, n, k);
    for (std::size_t b = 0; b < ds.size(); ++b) {
      const auto one = route::spanning_route(ds[b], starts[b], ins[b], A, net, n, k);
      CHECK(one.routes == expect[b]);
      CHECK(batch[b].routes == one.routes);
      CHECK(batch[b].dead_end == one.dead_end);
    }
  }
}

TEST_CASE("dead ends repeat the incoming edge and are flagged") {
  const auto net = testing::line_network(3);  // 0 -> 1 -> 2, node 2 has no exits
  const geo::NaeMatrix A(net);
  Rng rng = make_stream(1, "span");
  const auto d = testing::random_dists(rng, net.num_edges(), 3);
  const auto c = route::spanning_route(d, 1, 0, A, net, 1, 1);
  CHECK(c.routes[0] == Route{1, 1, 1});
  CHECK(c.dead_end[0]);
}

TEST_CASE("too few distinct routes is an error") {
  const auto net = testing::line_network(5);
  const geo::NaeMatrix A(net);
  Rng rng = make_stream(1, "span");
  const auto d = testing::random_dists(rng, net.num_edges(), 2);
  CHECK_THROWS_AS(route::spanning_route(d, 0, 0, A, net, 2, 2), DataError);
  CHECK_THROWS_AS(route::spanning_route(d, 0, 0, A, net, 2, 5), std::invalid_argument);
}

TEST_CASE("the first candidate is the greedy route") {
  const auto net = testing::grid(5, 2, 0.2);
  const geo::NaeMatrix A(net);
  Rng rng = make_stream(4, "span");
  for (int t = 0; t < 20; ++t) {
    const auto d = testing::random_dists(rng, net.num_edges(), 5);
    const auto in = static_cast<EdgeId>(uniform_index(rng, net.num_edges()));
    const NodeId v = net.edge(in).end_node;
    const auto wide = route::spanning_route(d, v, in, A, net, 2, 10);
    const auto greedy = route::spanning_route(d, v, in, A, net, 1, 1);
    CHECK(wide.routes.front() == greedy.routes.front());
    for (const auto& r : wide.routes) {
      CHECK(geo::is_connected_route(net, r));
      CHECK(net.edge(r.front()).start_node == v);
    }
  }
}
