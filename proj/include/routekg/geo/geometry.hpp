#pragma once

#include <optional>

namespace routekg::geo {

inline constexpr double kMetersPerDegree = 111320.0;

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
};

/// Planar offset (east, north) in meters from `a` to `b` under the
/// equirectangular approximation (longitude scaled by cos of the mean
/// latitude).
struct Offset {
  double east = 0.0;
  double north = 0.0;
};
Offset planar_offset(LatLon a, LatLon b);

double planar_distance(LatLon a, LatLon b);

/// Bearing from `a` to `b` in degrees clockwise from north, in [0, 360).
/// Empty when the points coincide.
std::optional<double> bearing_deg(LatLon a, LatLon b);

/// Sector index of a bearing: sector 0 is centered on north and sectors of
/// width 360/n_d proceed clockwise.  Accepts any finite angle.
int discretize_bearing(double theta_deg, int n_d);

}  // namespace routekg::geo
