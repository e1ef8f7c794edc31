#include "routekg/kg/triplets.hpp"

#include <algorithm>
#include <stdexcept>

#include "json.hpp"

namespace routekg::kg {

std::string_view family_name(Family f) {
  switch (f) {
    case Family::ConnectBy: return "ConnectBy";
    case Family::ConsistentWith: return "ConsistentWith";
    case Family::DistanceTo: return "DistanceTo";
    case Family::DirectionTo: return "DirectionTo";
  }
  return "?";
}

int family_cardinality(Family f, int future_len, int n_d) {
  switch (f) {
    case Family::ConnectBy:
    case Family::ConsistentWith: return 1;
    case Family::DistanceTo: return future_len;
    case Family::DirectionTo: return n_d;
  }
  return 0;
}

TripletSampler::TripletSampler(const geo::RoadNetwork& net, const geo::DirectionMatrix& dirs,
                               std::vector<Route> observed_routes, int future_len)
    : net_(&net), dirs_(&dirs), routes_(std::move(observed_routes)), future_len_(future_len) {
  if (future_len < 1) throw std::invalid_argument("future length must be >= 1");
  const std::size_t m = net.num_edges();
  for (std::size_t e = 0; e < m; ++e) {
    for (EdgeId next : net.out_edges(net.edge(static_cast<EdgeId>(e)).end_node)) {
      adjacent_.emplace_back(static_cast<EdgeId>(e), next);
    }
  }
  // Count ordered pairs (h, t), h != t, sharing no endpoint node.
  std::vector<std::vector<EdgeId>> incident(net.num_nodes());
  for (const auto& e : net.edges()) {
    incident[static_cast<std::size_t>(e.start_node)].push_back(e.id);
    if (e.end_node != e.start_node) incident[static_cast<std::size_t>(e.end_node)].push_back(e.id);
  }
  std::vector<std::size_t> mark(m, m);
  for (std::size_t h = 0; h < m; ++h) {
    std::size_t touching = 0;
    const auto& eh = net.edge(static_cast<EdgeId>(h));
    for (NodeId v : {eh.start_node, eh.end_node}) {
      for (EdgeId t : incident[static_cast<std::size_t>(v)]) {
        if (mark[static_cast<std::size_t>(t)] != h) {
          mark[static_cast<std::size_t>(t)] = h;
          ++touching;
        }
      }
    }
    non_touching_pairs_ += m - touching;  // `touching` includes h itself
  }
  for (std::size_t r = 0; r < routes_.size(); ++r) {
    const Route& route = routes_[r];
    for (std::size_t i = 0; i < route.size(); ++i) {
      for (std::size_t j = i + 1; j < route.size(); ++j) {
        if (route[i] == route[j]) continue;
        cooccur_.insert(pair_key(std::min(route[i], route[j]), std::max(route[i], route[j])));
        const auto hops = static_cast<int>(j - i);
        if (hops <= future_len_) hops_.insert(hop_key(route[i], hops, route[j]));
      }
      if (i + 1 < route.size()) hop_positions_.emplace_back(r, i);
    }
  }
}

bool TripletSampler::touches(EdgeId a, EdgeId b) const {
  const auto& ea = net_->edge(a);
  const auto& eb = net_->edge(b);
  return ea.start_node == eb.start_node || ea.start_node == eb.end_node || ea.end_node == eb.start_node ||
         ea.end_node == eb.end_node;
}

std::pair<EdgeId, EdgeId> TripletSampler::uniform_pair(Rng& rng) const {
  const std::size_t m = net_->num_edges();
  const auto h = static_cast<EdgeId>(uniform_index(rng, m));
  auto t = static_cast<EdgeId>(uniform_index(rng, m - 1));
  if (t >= h) ++t;
  return {h, t};
}

bool TripletSampler::holds(const Triplet& t) const {
  switch (t.family) {
    case Family::ConnectBy: return t.relation == 0 && net_->connects(t.head, t.tail);
    case Family::ConsistentWith:
      return t.relation == 0 && t.head != t.tail &&
             cooccur_.contains(pair_key(std::min(t.head, t.tail), std::max(t.head, t.tail)));
    case Family::DistanceTo:
      return t.relation >= 0 && t.relation < future_len_ && hops_.contains(hop_key(t.head, t.relation + 1, t.tail));
    case Family::DirectionTo: return dirs_->label(t.head, t.tail) == t.relation;
  }
  return false;
}

TripletBatch TripletSampler::sample(Family family, std::size_t batch_size, Rng& rng) const {
  TripletBatch batch;
  batch.family = family;
  batch.positives.reserve(batch_size);
  batch.negatives.reserve(batch_size);
  const std::size_t m = net_->num_edges();
  const std::string name(family_name(family));
  auto no_support = [&](const char* what) { return DataError(name + ": no " + what + " triplets can be formed"); };

  switch (family) {
    case Family::ConnectBy: {
      if (adjacent_.empty()) throw no_support("positive");
      if (non_touching_pairs_ == 0) throw no_support("negative");
      for (std::size_t i = 0; i < batch_size; ++i) {
        const auto [h, t] = adjacent_[uniform_index(rng, adjacent_.size())];
        batch.positives.push_back({h, family, 0, t});
        std::pair<EdgeId, EdgeId> neg;
        do {
          neg = uniform_pair(rng);
        } while (touches(neg.first, neg.second));
        batch.negatives.push_back({neg.first, family, 0, neg.second});
      }
      break;
    }
    case Family::ConsistentWith: {
      if (cooccur_.empty()) throw no_support("positive");
      if (m < 2 || 2 * cooccur_.size() >= m * (m - 1)) throw no_support("negative");
      for (std::size_t i = 0; i < batch_size; ++i) {
        EdgeId h = 0;
        EdgeId t = 0;
        do {
          const Route& r = routes_[uniform_index(rng, routes_.size())];
          if (r.size() < 2) continue;
          const std::size_t a = uniform_index(rng, r.size());
          std::size_t b = uniform_index(rng, r.size() - 1);
          if (b >= a) ++b;
          h = r[std::min(a, b)];
          t = r[std::max(a, b)];
        } while (h == t);
        batch.positives.push_back({h, family, 0, t});
        std::pair<EdgeId, EdgeId> neg;
        do {
          neg = uniform_pair(rng);
        } while (cooccur_.contains(pair_key(std::min(neg.first, neg.second), std::max(neg.first, neg.second))));
        batch.negatives.push_back({neg.first, family, 0, neg.second});
      }
      break;
    }
    case Family::DistanceTo: {
      if (hop_positions_.empty()) throw no_support("positive");
      for (std::size_t i = 0; i < batch_size; ++i) {
        std::size_t r = 0;
        std::size_t j = 0;
        int hops = 0;
        do {
          std::tie(r, j) = hop_positions_[uniform_index(rng, hop_positions_.size())];
          hops = 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(future_len_)));
        } while (j + static_cast<std::size_t>(hops) >= routes_[r].size());
        const EdgeId h = routes_[r][j];
        const EdgeId t = routes_[r][j + static_cast<std::size_t>(hops)];
        batch.positives.push_back({h, family, distance_relation(hops), t});
        // A head has at most a handful of tails at each hop count, so a
        // uniform draw almost always succeeds; bound it anyway.
        EdgeId neg = 0;
        bool found = false;
        for (int attempt = 0; attempt < 1000 && !found; ++attempt) {
          neg = static_cast<EdgeId>(uniform_index(rng, m));
          found = !hops_.contains(hop_key(h, hops, neg));
        }
        if (!found) {
          for (std::size_t c = 0; c < m && !found; ++c) {
            neg = static_cast<EdgeId>(c);
            found = !hops_.contains(hop_key(h, hops, neg));
          }
        }
        if (!found) throw no_support("negative");
        batch.negatives.push_back({h, family, distance_relation(hops), neg});
      }
      break;
    }
    case Family::DirectionTo: {
      if (m < 2) throw no_support("positive");
      if (dirs_->n_d() < 2) throw no_support("negative");
      const int n_d = dirs_->n_d();
      for (std::size_t i = 0; i < batch_size; ++i) {
        const auto [h, t] = uniform_pair(rng);
        const int cls = dirs_->label(h, t);
        batch.positives.push_back({h, family, cls, t});
        int wrong = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(n_d - 1)));
        if (wrong >= cls) ++wrong;
        batch.negatives.push_back({h, family, wrong, t});
      }
      break;
    }
  }
  return batch;
}

std::string batch_to_jsonl(const TripletBatch& batch) {
  std::string out;
  auto emit = [&out](const Triplet& t, bool positive) {
    out += nlohmann::json{{"head", t.head},
                          {"family", family_name(t.family)},
                          {"relation", t.relation},
                          {"tail", t.tail},
                          {"positive", positive}}
               .dump();
    out += '\n';
  };
  for (std::size_t i = 0; i < batch.positives.size(); ++i) {
    emit(batch.positives[i], true);
    emit(batch.negatives[i], false);
  }
  return out;
}

}  // namespace routekg::kg
