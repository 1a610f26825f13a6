#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <vector>

#include "rgb2lidar/geo.hpp"

namespace rgb2lidar::render {

struct Point3 {
  double easting = 0.0;
  double northing = 0.0;
  double elevation = 0.0;

  friend bool operator==(const Point3&, const Point3&) = default;
};

struct PointCloud {
  std::vector<Point3> points;

  friend bool operator==(const PointCloud&, const PointCloud&) = default;
};

/// Non-empty and finite, else DataError.
void validate(const PointCloud& cloud);

/// Plain "easting northing elevation" text, one point per line; '#' starts a comment.
PointCloud read_xyz(const std::filesystem::path& path);
void write_xyz(const PointCloud& cloud, const std::filesystem::path& path);

struct PlanarOffset {
  double easting = 0.0;
  double northing = 0.0;
};

/// Survey alignment offset between the aerial LIDAR and street-level GPS, in UTM.
inline constexpr PlanarOffset kSurveyOffset{2.77, 0.18};

PointCloud apply_offset(const PointCloud& cloud, PlanarOffset offset);

/// Gridded surface model: each cell stores the highest point that fell in it.
struct ElevationModel {
  static constexpr float kEmpty = -std::numeric_limits<float>::infinity();

  double origin_easting = 0.0;
  double origin_northing = 0.0;
  double cell_size = 1.0;
  std::uint32_t cols = 0;
  std::uint32_t rows = 0;
  std::vector<float> heights;  // row-major, row = northing index

  float at(std::uint32_t col, std::uint32_t row) const { return heights[std::size_t{row} * cols + col]; }
  bool occupied(std::uint32_t col, std::uint32_t row) const { return at(col, row) != kEmpty; }

  struct Cell {
    std::uint32_t col = 0;
    std::uint32_t row = 0;
  };
  std::optional<Cell> cell_of(double easting, double northing) const;

  friend bool operator==(const ElevationModel&, const ElevationModel&) = default;
};

ElevationModel build_dem(const PointCloud& cloud, double cell_size);

struct CameraPose {
  GeoPoint geo;  // must carry UTM for rendering
  double heading_deg = 0.0;  // compass heading, 0 = north, clockwise
  double pitch_deg = 0.0;
  double height_above_ground = 1.7;
  double hfov_deg = 60.0;
  std::uint32_t width = 640;
  std::uint32_t height = 480;

  friend bool operator==(const CameraPose&, const CameraPose&) = default;
};

void validate(const CameraPose& pose);

/// The 12 capture headings 0, 30, ..., 330 with default intrinsics.
std::array<CameraPose, 12> enumerate_poses(const GeoPoint& location);

/// Point: every column sample lights one pixel. Footprint: a sample covers the
/// projected cell width and vertical step, so near surfaces come out solid.
enum class SplatMode { Point, Footprint };

struct RenderOptions {
  double near_plane = 0.5;
  double far_plane = 500.0;
  double vertical_step = 0.25;
  /// Cells searched around an empty pose cell for the ground height.
  std::uint32_t ground_search_radius = 3;
  SplatMode splat = SplatMode::Point;
  /// Footprint splats are capped at this many pixels per side.
  std::uint32_t max_footprint = 64;
};

struct DepthImage {
  static constexpr float kNoReturn = -1.0f;

  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<float> depth;  // row-major range in meters, kNoReturn where nothing was hit
  CameraPose pose;

  float at(std::uint32_t x, std::uint32_t y) const { return depth[std::size_t{y} * width + x]; }
  double no_return_fraction() const;

  friend bool operator==(const DepthImage&, const DepthImage&) = default;
};

/// Pinhole z-buffer render of DEM columns. Each occupied cell becomes a
/// vertical column from the DEM floor to its height, sampled every
/// `vertical_step` meters and splatted as single pixels.
DepthImage render(const ElevationModel& dem, const CameraPose& pose, const RenderOptions& options = {});

/// Keep unless strictly more than `black_fraction_threshold` of the pixels have no return.
bool keep_image(const DepthImage& img, double black_fraction_threshold = 0.60);

// "XDM1" / "XDR1" rasters.
void save_dem(const ElevationModel& dem, const std::filesystem::path& path);
ElevationModel load_dem(const std::filesystem::path& path);
void save_depth(const DepthImage& img, const std::filesystem::path& path);
DepthImage load_depth(const std::filesystem::path& path);

/// 8-bit PGM preview, inverse depth normalised to [1, 255]; no-return is 0.
void write_preview_pgm(const DepthImage& img, const std::filesystem::path& path);

}  // namespace rgb2lidar::render
