#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace routekg {

using NodeId = std::int32_t;
using EdgeId = std::int32_t;
using Route = std::vector<EdgeId>;

/// Malformed input data: bad files, dangling references, unusable corpora.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite loss or other numeric breakdown during training.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Availability of destination information at prediction time.
enum class Scenario { NoGoal, GoalD, Goal };

Scenario parse_scenario(std::string_view name);
std::string_view scenario_name(Scenario s);

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);

/// Derives an independent named sub-stream from a master seed, so that
/// consumers of randomness (triplets, minibatch order, flow sampling) do not
/// perturb one another.
inline Rng make_stream(std::uint64_t master, std::string_view name, std::uint64_t index = 0) {
  return Rng(splitmix64(master ^ fnv1a(name) ^ splitmix64(index + 0x9e3779b97f4a7c15ULL)));
}

/// Uniform integer in [0, n) from a 64-bit engine.  Implemented by hand so
/// streams are reproducible across standard library vendors.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  // Lemire-style rejection keeps the draw unbiased.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Standard normal via Box-Muller; no cached state.
double gaussian(Rng& rng);

}  // namespace routekg
