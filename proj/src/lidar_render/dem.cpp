#include <algorithm>
#include <cmath>

#include "rgb2lidar/error.hpp"
#include "rgb2lidar/lidar_render.hpp"

namespace rgb2lidar::render {

std::optional<ElevationModel::Cell> ElevationModel::cell_of(double easting, double northing) const {
  const double fc = std::floor((easting - origin_easting) / cell_size);
  const double fr = std::floor((northing - origin_northing) / cell_size);
  if (fc < 0.0 || fr < 0.0 || fc >= cols || fr >= rows) return std::nullopt;
  return Cell{static_cast<std::uint32_t>(fc), static_cast<std::uint32_t>(fr)};
}

ElevationModel build_dem(const PointCloud& cloud, double cell_size) {
  if (!(cell_size > 0.0) || !std::isfinite(cell_size)) {
    throw ParameterError("DEM cell size must be positive");
  }
  validate(cloud);
  double min_e = cloud.points[0].easting, max_e = min_e;
  double min_n = cloud.points[0].northing, max_n = min_n;
  for (const auto& p : cloud.points) {
    min_e = std::min(min_e, p.easting);
    max_e = std::max(max_e, p.easting);
    min_n = std::min(min_n, p.northing);
    max_n = std::max(max_n, p.northing);
  }
  const double span_cols = std::floor((max_e - min_e) / cell_size) + 1.0;
  const double span_rows = std::floor((max_n - min_n) / cell_size) + 1.0;
  if (span_cols * span_rows > 4.0e8) throw ParameterError("DEM grid too large for the requested cell size");

  ElevationModel dem;
  dem.origin_easting = min_e;
  dem.origin_northing = min_n;
  dem.cell_size = cell_size;
  dem.cols = static_cast<std::uint32_t>(span_cols);
  dem.rows = static_cast<std::uint32_t>(span_rows);
  dem.heights.assign(std::size_t{dem.cols} * dem.rows, ElevationModel::kEmpty);
  for (const auto& p : cloud.points) {
    const auto c = std::min<std::uint32_t>(dem.cols - 1,
                                           static_cast<std::uint32_t>((p.easting - min_e) / cell_size));
    const auto r = std::min<std::uint32_t>(dem.rows - 1,
                                           static_cast<std::uint32_t>((p.northing - min_n) / cell_size));
    float& h = dem.heights[std::size_t{r} * dem.cols + c];
    h = std::max(h, static_cast<float>(p.elevation));
  }
  return dem;
}

}  // namespace rgb2lidar::render
