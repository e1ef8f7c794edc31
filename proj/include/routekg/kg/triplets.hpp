#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "routekg/common.hpp"
#include "routekg/corpus/corpus.hpp"
#include "routekg/geo/matrices.hpp"
#include "routekg/geo/network.hpp"

namespace routekg::kg {

/// The four spatial relation families of the road-network knowledge graph.
enum class Family : std::uint8_t { ConnectBy = 0, ConsistentWith = 1, DistanceTo = 2, DirectionTo = 3 };
inline constexpr std::array<Family, 4> kFamilies{Family::ConnectBy, Family::ConsistentWith, Family::DistanceTo,
                                                  Family::DirectionTo};
std::string_view family_name(Family f);

/// Number of relations in a family: 1, 1, Γ′ (hop counts) and n_d.
int family_cardinality(Family f, int future_len, int n_d);

/// Relation index of the DistanceTo relation for a hop count γ in 1..Γ′.
/// Prediction step γ consumes the same relation row.
inline int distance_relation(int hops) { return hops - 1; }

struct Triplet {
  EdgeId head = 0;
  Family family = Family::ConnectBy;
  int relation = 0;  // index within the family
  EdgeId tail = 0;

  friend bool operator==(const Triplet&, const Triplet&) = default;
};

struct TripletBatch {
  Family family = Family::ConnectBy;
  std::vector<Triplet> positives;
  std::vector<Triplet> negatives;  // paired 1:1 with positives
};

/// Precomputed sampling support over a network and the observed parts of
/// the training routes.  Immutable after construction; `sample` only reads.
class TripletSampler {
 public:
  TripletSampler(const geo::RoadNetwork& net, const geo::DirectionMatrix& dirs,
                 std::vector<Route> observed_routes, int future_len);

  /// Throws DataError if the family has no positive or no negative support.
  TripletBatch sample(Family family, std::size_t batch_size, Rng& rng) const;

  /// Defining predicate of each family; positives satisfy it, negatives do not.
  bool holds(const Triplet& t) const;

  int future_len() const { return future_len_; }
  int n_d() const { return dirs_->n_d(); }

 private:
  static std::uint64_t pair_key(EdgeId a, EdgeId b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
  }
  static std::uint64_t hop_key(EdgeId h, int hops, EdgeId t) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(h)) << 40) |
           (static_cast<std::uint64_t>(hops) << 32) | static_cast<std::uint32_t>(t);
  }
  bool touches(EdgeId a, EdgeId b) const;
  std::pair<EdgeId, EdgeId> uniform_pair(Rng& rng) const;

  const geo::RoadNetwork* net_;
  const geo::DirectionMatrix* dirs_;
  std::vector<Route> routes_;
  int future_len_;
  std::vector<std::pair<EdgeId, EdgeId>> adjacent_;  // ConnectBy support
  std::uint64_t non_touching_pairs_ = 0;
  std::unordered_set<std::uint64_t> cooccur_;  // unordered pairs, min id first
  std::unordered_set<std::uint64_t> hops_;     // (head, γ, tail) within observed routes
  std::vector<std::pair<std::size_t, std::size_t>> hop_positions_;  // (route, start) with at least one hop
};

/// JSON Lines dump of a batch, one triplet per line, for debugging.
std::string batch_to_jsonl(const TripletBatch& batch);

}  // namespace routekg::kg
