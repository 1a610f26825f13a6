#include <algorithm>
#include <cmath>
#include <numbers>

#include "rgb2lidar/error.hpp"
#include "rgb2lidar/lidar_render.hpp"

namespace rgb2lidar::render {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

struct Vec3 {
  double x, y, z;
};

double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

// Ground height under the camera: the pose cell, else the nearest occupied
// cell within the search radius (ties resolved row-major).
double ground_height(const ElevationModel& dem, double cam_e, double cam_n, std::uint32_t radius) {
  const auto col = static_cast<long long>(std::floor((cam_e - dem.origin_easting) / dem.cell_size));
  const auto row = static_cast<long long>(std::floor((cam_n - dem.origin_northing) / dem.cell_size));
  const auto in_grid = [&](long long c, long long r) {
    return c >= 0 && r >= 0 && c < dem.cols && r < dem.rows;
  };
  if (in_grid(col, row) && dem.occupied(static_cast<std::uint32_t>(col), static_cast<std::uint32_t>(row))) {
    return dem.at(static_cast<std::uint32_t>(col), static_cast<std::uint32_t>(row));
  }
  const auto rad = static_cast<long long>(radius);
  long long best_d2 = -1;
  double best = 0.0;
  for (long long r = row - rad; r <= row + rad; ++r) {
    for (long long c = col - rad; c <= col + rad; ++c) {
      if (!in_grid(c, r) || !dem.occupied(static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(r))) continue;
      const long long d2 = (c - col) * (c - col) + (r - row) * (r - row);
      if (d2 > rad * rad) continue;
      if (best_d2 < 0 || d2 < best_d2) {
        best_d2 = d2;
        best = dem.at(static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(r));
      }
    }
  }
  if (best_d2 < 0) {
    throw NoGroundError("no DEM ground within " + std::to_string(radius) + " cells of the camera");
  }
  return best;
}

}  // namespace

void validate(const CameraPose& pose) {
  if (!(pose.hfov_deg > 0.0 && pose.hfov_deg < 180.0)) throw ParameterError("hfov must lie in (0, 180)");
  if (!(pose.heading_deg >= 0.0 && pose.heading_deg < 360.0)) throw ParameterError("heading must lie in [0, 360)");
  if (!(std::abs(pose.pitch_deg) < 90.0)) throw ParameterError("pitch must lie in (-90, 90)");
  if (pose.width == 0 || pose.height == 0) throw ParameterError("image size must be positive");
  if (!std::isfinite(pose.height_above_ground)) throw ParameterError("camera height must be finite");
  validate(pose.geo);
}

std::array<CameraPose, 12> enumerate_poses(const GeoPoint& location) {
  std::array<CameraPose, 12> poses;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    poses[i].geo = location;
    poses[i].heading_deg = 30.0 * static_cast<double>(i);
  }
  return poses;
}

double DepthImage::no_return_fraction() const {
  if (depth.empty()) return 1.0;
  const auto misses = std::count_if(depth.begin(), depth.end(), [](float d) { return d < 0.0f; });
  return static_cast<double>(misses) / static_cast<double>(depth.size());
}

bool keep_image(const DepthImage& img, double black_fraction_threshold) {
  return !(img.no_return_fraction() > black_fraction_threshold);
}

DepthImage render(const ElevationModel& dem, const CameraPose& pose, const RenderOptions& options) {
  validate(pose);
  if (!pose.geo.has_utm()) throw ParameterError("render needs a pose with UTM coordinates");
  if (!(options.vertical_step > 0.0)) throw ParameterError("vertical step must be positive");
  if (!(options.near_plane > 0.0 && options.far_plane > options.near_plane)) {
    throw ParameterError("need 0 < near plane < far plane");
  }

  const double cam_e = *pose.geo.easting;
  const double cam_n = *pose.geo.northing;
  const double cam_z = ground_height(dem, cam_e, cam_n, options.ground_search_radius) + pose.height_above_ground;

  double floor_z = std::numeric_limits<double>::infinity();
  for (float h : dem.heights) {
    if (h != ElevationModel::kEmpty) floor_z = std::min(floor_z, static_cast<double>(h));
  }

  const double yaw = pose.heading_deg * kDegToRad;
  const double pitch = pose.pitch_deg * kDegToRad;
  const Vec3 forward{std::sin(yaw) * std::cos(pitch), std::cos(yaw) * std::cos(pitch), std::sin(pitch)};
  const Vec3 right{std::cos(yaw), -std::sin(yaw), 0.0};
  const Vec3 up{-std::sin(yaw) * std::sin(pitch), -std::cos(yaw) * std::sin(pitch), std::cos(pitch)};

  const double w = pose.width;
  const double h = pose.height;
  const double focal = 0.5 * w / std::tan(0.5 * pose.hfov_deg * kDegToRad);
  const double cx = 0.5 * w;
  const double cy = 0.5 * h;

  DepthImage img;
  img.width = pose.width;
  img.height = pose.height;
  img.pose = pose;
  img.depth.assign(std::size_t{img.width} * img.height, DepthImage::kNoReturn);

  const double rel_e = dem.origin_easting - cam_e;
  const double rel_n = dem.origin_northing - cam_n;
  const double far2 = options.far_plane * options.far_plane;

  auto splat = [&](double dx, double dy, double horiz2, double z) {
    const Vec3 d{dx, dy, z - cam_z};
    const double zc = dot(d, forward);
    if (zc <= 0.0) return;
    const double range = std::sqrt(horiz2 + d.z * d.z);
    if (range < options.near_plane || range > options.far_plane) return;
    const double u = cx + focal * dot(d, right) / zc;
    const double v = cy - focal * dot(d, up) / zc;
    if (!(u >= 0.0 && v >= 0.0 && u < w && v < h)) return;
    const auto r = static_cast<float>(range);
    auto write = [&](std::size_t x, std::size_t y) {
      float& px = img.depth[y * img.width + x];
      if (px < 0.0f || r < px) px = r;
    };
    if (options.splat == SplatMode::Point) {
      write(static_cast<std::size_t>(u), static_cast<std::size_t>(v));
      return;
    }
    const double cap = options.max_footprint;
    const double half_w = 0.5 * std::min(cap, std::max(1.0, focal * dem.cell_size / zc));
    const double half_h = 0.5 * std::min(cap, std::max(1.0, focal * options.vertical_step / zc));
    const auto x0 = static_cast<std::size_t>(std::max(0.0, std::floor(u - half_w + 0.5)));
    const auto x1 = static_cast<std::size_t>(std::min(w - 1.0, std::floor(u + half_w - 0.5)));
    const auto y0 = static_cast<std::size_t>(std::max(0.0, std::floor(v - half_h + 0.5)));
    const auto y1 = static_cast<std::size_t>(std::min(h - 1.0, std::floor(v + half_h - 0.5)));
    if (x1 < x0 || y1 < y0) {
      write(static_cast<std::size_t>(u), static_cast<std::size_t>(v));
      return;
    }
    for (std::size_t y = y0; y <= y1; ++y) {
      for (std::size_t x = x0; x <= x1; ++x) write(x, y);
    }
  };

  for (std::uint32_t row = 0; row < dem.rows; ++row) {
    const double dy = rel_n + (row + 0.5) * dem.cell_size;
    for (std::uint32_t col = 0; col < dem.cols; ++col) {
      const float top = dem.at(col, row);
      if (top == ElevationModel::kEmpty) continue;
      const double dx = rel_e + (col + 0.5) * dem.cell_size;
      const double horiz2 = dx * dx + dy * dy;
      if (horiz2 > far2) continue;
      const double height = static_cast<double>(top) - floor_z;
      const auto steps = static_cast<std::size_t>(std::floor(height / options.vertical_step));
      for (std::size_t k = 0; k <= steps; ++k) {
        splat(dx, dy, horiz2, static_cast<double>(top) - static_cast<double>(k) * options.vertical_step);
      }
      if (static_cast<double>(top) - static_cast<double>(steps) * options.vertical_step > floor_z) {
        splat(dx, dy, horiz2, floor_z);
      }
    }
  }
  return img;
}

}  // namespace rgb2lidar::render
