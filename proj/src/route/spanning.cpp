#include "routekg/route/spanning.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace routekg::route {

int default_branching(int k, int steps) {
  if (k < 1 || steps < 1) throw std::invalid_argument("K and the step count must be >= 1");
  for (int n = 1;; ++n) {
    double leaves = 1.0;
    for (int s = 0; s < steps; ++s) leaves *= n;
    if (leaves >= k) return n;
  }
}

std::vector<EdgeId> top_children(std::span<const double> probs, std::span<const EdgeId> nae_row, EdgeId pad, int n) {
  std::vector<EdgeId> real;
  for (EdgeId e : nae_row) {
    if (e != pad) real.push_back(e);
  }
  if (real.empty()) return {};
  const auto count = std::min(real.size(), static_cast<std::size_t>(n));
  std::partial_sort(real.begin(), real.begin() + static_cast<std::ptrdiff_t>(count), real.end(),
                    [&](EdgeId a, EdgeId b) {
                      const double pa = probs[static_cast<std::size_t>(a)];
                      const double pb = probs[static_cast<std::size_t>(b)];
                      return pa != pb ? pa > pb : a < b;
                    });
  real.resize(count);
  while (real.size() < static_cast<std::size_t>(n)) real.push_back(real.back());
  return real;
}

namespace {

void check_args(const kg::StepDistributions& d, const geo::NaeMatrix& A, const geo::RoadNetwork& net, int n, int k) {
  if (n < 1 || k < 1) throw std::invalid_argument("branching degree and K must be >= 1");
  double leaves = 1.0;
  for (std::size_t s = 0; s < d.steps(); ++s) leaves *= n;
  if (static_cast<double>(k) > leaves) throw std::invalid_argument("K exceeds n^steps leaves");
  if (d.num_edges != net.num_edges() || A.pad() != static_cast<EdgeId>(net.num_edges())) {
    throw std::invalid_argument("distributions, adjacency table and network disagree on |E|");
  }
}

struct Collector {
  int k;
  std::set<Route> seen;
  CandidateSet out;

  // Returns true once K distinct routes are held.
  bool add(const Route& r, bool dead) {
    if (seen.insert(r).second) {
      out.routes.push_back(r);
      out.dead_end.push_back(dead);
    }
    return out.routes.size() >= static_cast<std::size_t>(k);
  }
};

struct Expander {
  const kg::StepDistributions& d;
  const geo::NaeMatrix& A;
  const geo::RoadNetwork& net;
  int n;
  Collector& sink;
  Route path;

  bool visit(NodeId v, EdgeId incoming, std::size_t depth, bool dead) {
    if (depth == d.steps()) return sink.add(path, dead);
    auto kids = top_children(d.probs[depth], A.row(v), A.pad(), n);
    const bool stuck = kids.empty();
    if (stuck) kids.assign(static_cast<std::size_t>(n), incoming);
    for (EdgeId e : kids) {
      path.push_back(e);
      const NodeId next = stuck ? v : net.edge(e).end_node;
      const bool done = visit(next, e, depth + 1, dead || stuck);
      path.pop_back();
      if (done) return true;
    }
    return false;
  }
};

}  // namespace

CandidateSet spanning_route(const kg::StepDistributions& dists, NodeId start_node, EdgeId incoming,
                            const geo::NaeMatrix& A, const geo::RoadNetwork& net, int n, int k) {
  check_args(dists, A, net, n, k);
  Collector sink{k, {}, {}};
  Expander ex{dists, A, net, n, sink, {}};
  ex.visit(start_node, incoming, 0, false);
  if (sink.out.routes.size() < static_cast<std::size_t>(k)) {
    throw DataError("only " + std::to_string(sink.out.routes.size()) + " distinct routes for K = " +
                    std::to_string(k));
  }
  return std::move(sink.out);
}

std::vector<CandidateSet> spanning_route_batch(std::span<const kg::StepDistributions> dists,
                                               std::span<const NodeId> start_nodes, std::span<const EdgeId> incoming,
                                               const geo::NaeMatrix& A, const geo::RoadNetwork& net, int n, int k) {
  const std::size_t batch = dists.size();
  if (start_nodes.size() != batch || incoming.size() != batch) {
    throw std::invalid_argument("batch inputs have different lengths");
  }
  if (batch == 0) return {};
  const std::size_t steps = dists[0].steps();
  for (const auto& d : dists) {
    check_args(d, A, net, n, k);
    if (d.steps() != steps) throw std::invalid_argument("batch mixes step counts");
  }
  // Level-order arrays: after level s each sample holds n^s leaves, and the
  // children of leaf j occupy slots j*n .. j*n+n-1, so the final array is in
  // pre-order.
  const auto arity = static_cast<std::size_t>(n);
  std::vector<NodeId> end_node(start_nodes.begin(), start_nodes.end());
  std::vector<EdgeId> pred(incoming.begin(), incoming.end());
  std::vector<std::uint8_t> dead(batch, 0);
  std::vector<EdgeId> paths;  // [batch][leaves][depth]
  std::size_t leaves = 1;
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t next_leaves = leaves * arity;
    std::vector<NodeId> nend(batch * next_leaves);
    std::vector<EdgeId> npred(batch * next_leaves);
    std::vector<std::uint8_t> ndead(batch * next_leaves);
    std::vector<EdgeId> npaths(batch * next_leaves * (s + 1));
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t j = 0; j < leaves; ++j) {
        const std::size_t src = b * leaves + j;
        auto kids = top_children(dists[b].probs[s], A.row(end_node[src]), A.pad(), n);
        const bool stuck = kids.empty();
        if (stuck) kids.assign(arity, pred[src]);
        for (std::size_t c = 0; c < arity; ++c) {
          const std::size_t dst = b * next_leaves + j * arity + c;
          nend[dst] = stuck ? end_node[src] : net.edge(kids[c]).end_node;
          npred[dst] = kids[c];
          ndead[dst] = static_cast<std::uint8_t>(dead[src] | (stuck ? 1 : 0));
          std::copy_n(paths.begin() + static_cast<std::ptrdiff_t>(src * s), s,
                      npaths.begin() + static_cast<std::ptrdiff_t>(dst * (s + 1)));
          npaths[dst * (s + 1) + s] = kids[c];
        }
      }
    }
    end_node = std::move(nend);
    pred = std::move(npred);
    dead = std::move(ndead);
    paths = std::move(npaths);
    leaves = next_leaves;
  }
  std::vector<CandidateSet> out(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    Collector sink{k, {}, {}};
    bool full = false;
    for (std::size_t j = 0; j < leaves && !full; ++j) {
      const std::size_t at = (b * leaves + j) * steps;
      full = sink.add(Route(paths.begin() + static_cast<std::ptrdiff_t>(at),
                            paths.begin() + static_cast<std::ptrdiff_t>(at + steps)),
                      dead[b * leaves + j] != 0);
    }
    if (!full) {
      throw DataError("sample " + std::to_string(b) + ": only " + std::to_string(sink.out.routes.size()) +
                      " distinct routes for K = " + std::to_string(k));
    }
    out[b] = std::move(sink.out);
  }
  return out;
}

}  // namespace routekg::route
