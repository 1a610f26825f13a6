#include "rgb2lidar/geo.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "rgb2lidar/error.hpp"

namespace rgb2lidar {
namespace {

constexpr double kEarthRadiusM = 6371008.8;
constexpr double kDegToRad = std::numbers::pi / 180.0;

}  // namespace

void validate(const GeoPoint& p) {
  if (!std::isfinite(p.lat) || p.lat < -90.0 || p.lat > 90.0 || !std::isfinite(p.lon) ||
      p.lon < -180.0 || p.lon > 180.0) {
    std::ostringstream os;
    os << "geo point out of range: lat=" << p.lat << " lon=" << p.lon;
    throw DataError(os.str());
  }
  if ((p.easting && !std::isfinite(*p.easting)) || (p.northing && !std::isfinite(*p.northing))) {
    throw DataError("geo point has non-finite UTM coordinates");
  }
}

double ground_distance_m(const GeoPoint& a, const GeoPoint& b) {
  if (a.has_utm() && b.has_utm()) {
    return std::hypot(*a.easting - *b.easting, *a.northing - *b.northing);
  }
  const double mean_lat = 0.5 * (a.lat + b.lat) * kDegToRad;
  const double dx = (a.lon - b.lon) * kDegToRad * std::cos(mean_lat) * kEarthRadiusM;
  const double dy = (a.lat - b.lat) * kDegToRad * kEarthRadiusM;
  return std::hypot(dx, dy);
}

PlanarXY planar_xy(const GeoPoint& p, const GeoPoint& reference) {
  if (p.has_utm()) return {*p.easting, *p.northing};
  const double lat0 = reference.lat * kDegToRad;
  return {(p.lon - reference.lon) * kDegToRad * std::cos(lat0) * kEarthRadiusM,
          (p.lat - reference.lat) * kDegToRad * kEarthRadiusM};
}

GeoPoint from_local_meters(double east_m, double north_m, double ref_lat, double ref_lon) {
  GeoPoint g;
  g.lat = ref_lat + north_m / kEarthRadiusM / kDegToRad;
  g.lon = ref_lon + east_m / (kEarthRadiusM * std::cos(ref_lat * kDegToRad)) / kDegToRad;
  return g;
}

}  // namespace rgb2lidar
