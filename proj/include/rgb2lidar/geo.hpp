#pragma once

#include <optional>

namespace rgb2lidar {

/// WGS84 position with optional UTM coordinates (meters).
struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;
  std::optional<double> easting;
  std::optional<double> northing;

  bool has_utm() const noexcept { return easting.has_value() && northing.has_value(); }

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

/// Throws DataError when lat/lon are out of range or UTM fields are not finite.
void validate(const GeoPoint& p);

/// Ground distance in meters. Planar Euclidean on UTM when both points carry
/// UTM, otherwise a local equirectangular approximation of WGS84.
double ground_distance_m(const GeoPoint& a, const GeoPoint& b);

struct PlanarXY {
  double x = 0.0;
  double y = 0.0;
};

/// Planar coordinates in meters: UTM when available, else equirectangular
/// relative to `reference`.
PlanarXY planar_xy(const GeoPoint& p, const GeoPoint& reference);

/// Inverse of the equirectangular approximation around (ref_lat, ref_lon).
GeoPoint from_local_meters(double east_m, double north_m, double ref_lat, double ref_lon);

}  // namespace rgb2lidar
