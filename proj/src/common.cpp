#include "routekg/common.hpp"

#include <cmath>
#include <numbers>

namespace routekg {

Scenario parse_scenario(std::string_view name) {
  if (name == "NoGoal") return Scenario::NoGoal;
  if (name == "GoalD") return Scenario::GoalD;
  if (name == "Goal") return Scenario::Goal;
  throw std::invalid_argument("unknown scenario '" + std::string(name) + "' (expected NoGoal, GoalD or Goal)");
}

std::string_view scenario_name(Scenario s) {
  switch (s) {
    case Scenario::NoGoal: return "NoGoal";
    case Scenario::GoalD: return "GoalD";
    case Scenario::Goal: return "Goal";
  }
  return "?";
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double gaussian(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace routekg
