#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "routekg/common.hpp"
#include "routekg/geo/matrices.hpp"
#include "routekg/geo/network.hpp"

namespace routekg::corpus {

inline constexpr int kDefaultObserved = 10;  // observed links
inline constexpr int kDefaultFuture = 5;     // predicted links

/// One prediction instance cut from a route.
struct RouteSample {
  Route observed;                 // first Γ links
  Route future;                   // next Γ′ links
  std::vector<int> observed_dirs;  // one direction class per observed link
  int goal_dir = 0;               // class from last observed link to last future link
  EdgeId goal_edge = 0;           // == future.back()

  EdgeId last_observed() const { return observed.back(); }
};

enum class Split { Train, Val, Test };
std::string_view split_name(Split s);

struct RouteCorpus {
  std::vector<RouteSample> samples;
  std::vector<std::size_t> train, val, test;  // indices into samples; a partition

  const std::vector<std::size_t>& indices(Split s) const {
    return s == Split::Train ? train : (s == Split::Val ? val : test);
  }
  int observed_len() const { return samples.empty() ? 0 : static_cast<int>(samples.front().observed.size()); }
  int future_len() const { return samples.empty() ? 0 : static_cast<int>(samples.front().future.size()); }
};

struct RouteGenOptions {
  std::size_t count = 1000;
  std::size_t min_len = 10;
  double sigma = 0.1;  // log-normal perturbation of edge weights per route
  std::uint64_t seed = 0;
  /// Attempts allowed per requested route before giving up.
  std::size_t attempts_per_route = 50;
};

/// Synthetic routes: each is the shortest path between a random OD pair
/// under edge weights length * exp(sigma * N(0,1)), redrawn per route.
/// Throws DataError when `count` routes of at least `min_len` links cannot
/// be produced within the attempt budget.
std::vector<Route> generate_routes(const geo::RoadNetwork& net, const RouteGenOptions& opts);

/// How observed-link direction features are labeled.
enum class ObservedDirMode {
  InterLink,  // D[e^{j-1}][e^j], own heading for the first link
  IntraEdge,  // each link's own heading
};

struct SplitOptions {
  int observed = kDefaultObserved;
  int future = kDefaultFuture;
  std::array<double, 3> ratios{0.6, 0.2, 0.2};
  std::uint64_t seed = 0;
  ObservedDirMode dir_mode = ObservedDirMode::InterLink;
  /// 0 takes one sample from each route's prefix; s > 0 takes a window at
  /// every offset 0, s, 2s, ... that fits.
  std::size_t window_stride = 0;
};

struct SplitResult {
  RouteCorpus corpus;
  std::size_t rejected = 0;  // routes shorter than observed + future
};

RouteSample make_sample(std::span<const EdgeId> window, int observed, const geo::DirectionMatrix& dirs,
                        ObservedDirMode mode = ObservedDirMode::InterLink);

SplitResult split_corpus(const std::vector<Route>& routes, const geo::DirectionMatrix& dirs, const SplitOptions& opts);

/// Routes file: JSON Lines, one `{"edges": [...]}` per line.
std::vector<Route> load_routes(const std::filesystem::path& path);
std::vector<Route> parse_routes(std::string_view text);
std::string routes_to_jsonl(const std::vector<Route>& routes);

/// Corpus snapshot: JSON Lines, `{"edges": [...], "split": "train"}` where
/// `edges` is observed followed by future.
std::string corpus_to_jsonl(const RouteCorpus& corpus);

}  // namespace routekg::corpus
