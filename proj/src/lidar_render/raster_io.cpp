#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "rgb2lidar/binary_io.hpp"
#include "rgb2lidar/error.hpp"
#include "rgb2lidar/lidar_render.hpp"

namespace rgb2lidar::render {
namespace {

constexpr std::string_view kDemMagic = "XDM1";
constexpr std::string_view kDepthMagic = "XDR1";

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

}  // namespace

void save_dem(const ElevationModel& dem, const std::filesystem::path& path) {
  auto out = open_out(path);
  io::BinaryWriter w(out);
  w.magic(kDemMagic);
  w.u32(dem.cols);
  w.u32(dem.rows);
  w.f64(dem.origin_easting);
  w.f64(dem.origin_northing);
  w.f64(dem.cell_size);
  w.f32s(dem.heights);
}

ElevationModel load_dem(const std::filesystem::path& path) {
  auto in = open_in(path);
  io::BinaryReader rd(in, path.string());
  rd.expect_magic(kDemMagic);
  ElevationModel dem;
  dem.cols = rd.u32("cols");
  dem.rows = rd.u32("rows");
  dem.origin_easting = rd.f64("origin easting");
  dem.origin_northing = rd.f64("origin northing");
  dem.cell_size = rd.f64("cell size");
  if (dem.cols == 0 || dem.rows == 0 || !(dem.cell_size > 0.0)) {
    throw FormatError(path.string() + ": malformed DEM header");
  }
  dem.heights.resize(std::size_t{dem.cols} * dem.rows);
  rd.f32s(dem.heights, "heights");
  return dem;
}

void save_depth(const DepthImage& img, const std::filesystem::path& path) {
  auto out = open_out(path);
  io::BinaryWriter w(out);
  w.magic(kDepthMagic);
  const auto& p = img.pose;
  w.f64(p.geo.lat);
  w.f64(p.geo.lon);
  w.f64(p.geo.easting.value_or(std::numeric_limits<double>::quiet_NaN()));
  w.f64(p.geo.northing.value_or(std::numeric_limits<double>::quiet_NaN()));
  w.f64(p.heading_deg);
  w.f64(p.pitch_deg);
  w.f64(p.height_above_ground);
  w.f64(p.hfov_deg);
  w.u32(img.width);
  w.u32(img.height);
  w.f32s(img.depth);
}

DepthImage load_depth(const std::filesystem::path& path) {
  auto in = open_in(path);
  io::BinaryReader rd(in, path.string());
  rd.expect_magic(kDepthMagic);
  DepthImage img;
  auto& p = img.pose;
  p.geo.lat = rd.f64("lat");
  p.geo.lon = rd.f64("lon");
  if (const double e = rd.f64("easting"); !std::isnan(e)) p.geo.easting = e;
  if (const double n = rd.f64("northing"); !std::isnan(n)) p.geo.northing = n;
  p.heading_deg = rd.f64("heading");
  p.pitch_deg = rd.f64("pitch");
  p.height_above_ground = rd.f64("height above ground");
  p.hfov_deg = rd.f64("hfov");
  img.width = rd.u32("width");
  img.height = rd.u32("height");
  p.width = img.width;
  p.height = img.height;
  img.depth.resize(std::size_t{img.width} * img.height);
  rd.f32s(img.depth, "depths");
  return img;
}

void write_preview_pgm(const DepthImage& img, const std::filesystem::path& path) {
  float lo = std::numeric_limits<float>::infinity();
  float hi = 0.0f;
  for (float d : img.depth) {
    if (d <= 0.0f) continue;
    lo = std::min(lo, 1.0f / d);
    hi = std::max(hi, 1.0f / d);
  }
  auto out = open_out(path);
  out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  for (float d : img.depth) {
    unsigned char v = 0;
    if (d > 0.0f) {
      const float t = hi > lo ? (1.0f / d - lo) / (hi - lo) : 1.0f;
      v = static_cast<unsigned char>(1.0f + std::round(254.0f * t));
    }
    out.put(static_cast<char>(v));
  }
}

}  // namespace rgb2lidar::render
