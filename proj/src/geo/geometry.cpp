#include "routekg/geo/geometry.hpp"

#include <cmath>
#include <numbers>

namespace routekg::geo {

Offset planar_offset(LatLon a, LatLon b) {
  const double mean_lat = 0.5 * (a.lat + b.lat) * std::numbers::pi / 180.0;
  return {(b.lon - a.lon) * std::cos(mean_lat) * kMetersPerDegree, (b.lat - a.lat) * kMetersPerDegree};
}

double planar_distance(LatLon a, LatLon b) {
  const Offset d = planar_offset(a, b);
  return std::hypot(d.east, d.north);
}

std::optional<double> bearing_deg(LatLon a, LatLon b) {
  const Offset d = planar_offset(a, b);
  if (d.east == 0.0 && d.north == 0.0) return std::nullopt;
  double theta = std::atan2(d.east, d.north) * 180.0 / std::numbers::pi;
  if (theta < 0.0) theta += 360.0;
  if (theta >= 360.0) theta -= 360.0;
  return theta;
}

int discretize_bearing(double theta_deg, int n_d) {
  const double width = 360.0 / n_d;
  double shifted = std::fmod(theta_deg + 0.5 * width, 360.0);
  if (shifted < 0.0) shifted += 360.0;
  int cls = static_cast<int>(std::floor(shifted / width));
  // shifted < 360, but the division can still round up to n_d.
  if (cls >= n_d) cls = n_d - 1;
  if (cls < 0) cls = 0;
  return cls;
}

}  // namespace routekg::geo
