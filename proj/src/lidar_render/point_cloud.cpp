#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "rgb2lidar/error.hpp"
#include "rgb2lidar/lidar_render.hpp"

namespace rgb2lidar::render {

void validate(const PointCloud& cloud) {
  if (cloud.points.empty()) throw DataError("point cloud is empty");
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const auto& p = cloud.points[i];
    if (!std::isfinite(p.easting) || !std::isfinite(p.northing) || !std::isfinite(p.elevation)) {
      throw DataError("point " + std::to_string(i) + " has non-finite coordinates");
    }
  }
}

PointCloud read_xyz(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open point cloud " + path.string());
  PointCloud cloud;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    Point3 p;
    if (!(ls >> p.easting)) continue;  // blank line
    if (!(ls >> p.northing >> p.elevation)) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected three coordinates");
    }
    cloud.points.push_back(p);
  }
  validate(cloud);
  return cloud;
}

void write_xyz(const PointCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write point cloud " + path.string());
  out << std::setprecision(17);
  for (const auto& p : cloud.points) out << p.easting << ' ' << p.northing << ' ' << p.elevation << '\n';
}

PointCloud apply_offset(const PointCloud& cloud, PlanarOffset offset) {
  PointCloud out = cloud;
  for (auto& p : out.points) {
    p.easting += offset.easting;
    p.northing += offset.northing;
  }
  return out;
}

}  // namespace rgb2lidar::render
