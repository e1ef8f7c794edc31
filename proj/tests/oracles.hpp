#pragma once

// Independent reference implementations used by the unit and acceptance
// tests.  Deliberately naive: full enumeration, plain loops.

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "routekg/common.hpp"
#include "routekg/corpus/corpus.hpp"
#include "routekg/geo/network.hpp"
#include "routekg/kg/model.hpp"
#include "routekg/kg/triplets.hpp"

namespace oracle {

using namespace routekg;

/// Full n-ary expansion: every node gets exactly n children; leaves listed
/// in pre-order, duplicates dropped, first K kept.
inline std::vector<Route> spanning(const kg::StepDistributions& d, const geo::RoadNetwork& net, NodeId start,
                                   EdgeId incoming, int n, int k) {
  std::vector<Route> leaves;
  Route path;
  auto rec = [&](auto&& self, NodeId v, EdgeId in, std::size_t depth) -> void {
    if (depth == d.probs.size()) {
      leaves.push_back(path);
      return;
    }
    std::vector<EdgeId> exits;
    for (const auto& e : net.edges()) {
      if (e.start_node == v) exits.push_back(e.id);
    }
    std::vector<EdgeId> kids;
    if (exits.empty()) {
      kids.assign(static_cast<std::size_t>(n), in);
    } else {
      std::stable_sort(exits.begin(), exits.end(), [&](EdgeId a, EdgeId b) {
        return d.probs[depth][static_cast<std::size_t>(a)] > d.probs[depth][static_cast<std::size_t>(b)];
      });
      for (int i = 0; i < n; ++i) kids.push_back(exits[std::min<std::size_t>(static_cast<std::size_t>(i), exits.size() - 1)]);
    }
    for (EdgeId e : kids) {
      path.push_back(e);
      self(self, net.edge(e).end_node, e, depth + 1);
      path.pop_back();
    }
  };
  rec(rec, start, incoming, 0);
  std::vector<Route> out;
  for (const Route& r : leaves) {
    if (std::find(out.begin(), out.end(), r) == out.end()) out.push_back(r);
    if (out.size() == static_cast<std::size_t>(k)) break;
  }
  return out;
}

struct Metrics {
  std::map<int, double> link, route, mrr;
};

inline Metrics metrics(const std::vector<std::vector<Route>>& preds, const std::vector<Route>& truths,
                       const std::vector<int>& ks) {
  Metrics m;
  const double n = static_cast<double>(truths.size());
  for (int k : ks) {
    double link = 0, route = 0, rr = 0;
    for (std::size_t i = 0; i < truths.size(); ++i) {
      double best = 0;
      bool hit = false;
      double recip = 0;
      for (int j = 0; j < k; ++j) {
        const Route& p = preds[i][static_cast<std::size_t>(j)];
        int same = 0;
        for (std::size_t s = 0; s < p.size(); ++s) same += p[s] == truths[i][s];
        best = std::max(best, static_cast<double>(same) / static_cast<double>(truths[i].size()));
        if (p == truths[i] && !hit) {
          hit = true;
          recip = 1.0 / (j + 1);
        }
      }
      link += best;
      route += hit ? 1 : 0;
      rr += recip;
    }
    m.link[k] = link / n;
    m.route[k] = route / n;
    m.mrr[k] = rr / n;
  }
  return m;
}

struct FlowStats {
  double mae = 0, rmse = 0, r2 = 0;
};

inline FlowStats flow(const std::vector<double>& est, const std::vector<double>& truth) {
  std::vector<std::size_t> used;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] != 0 || est[i] != 0) used.push_back(i);
  }
  FlowStats s;
  if (used.empty()) {
    s.r2 = 1;
    return s;
  }
  double mean = 0;
  for (auto i : used) mean += truth[i];
  mean /= static_cast<double>(used.size());
  double ae = 0, se = 0, tot = 0;
  for (auto i : used) {
    ae += std::abs(est[i] - truth[i]);
    se += (est[i] - truth[i]) * (est[i] - truth[i]);
    tot += (truth[i] - mean) * (truth[i] - mean);
  }
  s.mae = ae / static_cast<double>(used.size());
  s.rmse = std::sqrt(se / static_cast<double>(used.size()));
  s.r2 = tot > 0 ? 1 - se / tot : (se == 0 ? 1 : 0);
  return s;
}

/// Family predicates recomputed from raw routes and edges.
struct Predicates {
  const geo::RoadNetwork& net;
  const geo::DirectionMatrix& D;
  const std::vector<Route>& routes;
  int future;

  bool holds(const kg::Triplet& t) const {
    switch (t.family) {
      case kg::Family::ConnectBy:
        return t.relation == 0 && net.edge(t.head).end_node == net.edge(t.tail).start_node;
      case kg::Family::ConsistentWith:
        if (t.relation != 0 || t.head == t.tail) return false;
        for (const Route& r : routes) {
          if (std::find(r.begin(), r.end(), t.head) != r.end() && std::find(r.begin(), r.end(), t.tail) != r.end()) {
            return true;
          }
        }
        return false;
      case kg::Family::DistanceTo: {
        const int hops = t.relation + 1;
        if (hops < 1 || hops > future) return false;
        for (const Route& r : routes) {
          for (std::size_t j = 0; j + static_cast<std::size_t>(hops) < r.size(); ++j) {
            if (r[j] == t.head && r[j + static_cast<std::size_t>(hops)] == t.tail) return true;
          }
        }
        return false;
      }
      case kg::Family::DirectionTo: return D.label(t.head, t.tail) == t.relation;
    }
    return false;
  }
};

}  // namespace oracle
