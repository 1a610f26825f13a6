#include <cmath>

#include "rgb2lidar/error.hpp"
#include "rgb2lidar/seed.hpp"
#include "rgb2lidar/synthgen.hpp"

namespace rgb2lidar::synth {
namespace {

constexpr double kGroundSpacing = 1.0;
constexpr double kRoofSpacing = 0.5;
constexpr double kBuildingClearance = 2.0;
constexpr double kAreaPerBuilding = 600.0;

struct Box {
  double x0, y0, x1, y1, height;
};

}  // namespace

std::size_t channel_index(Modality m, Cue c) {
  return (m == Modality::Rgb ? 0 : 2) + (c == Cue::Appearance ? 0 : 1);
}

void validate(const SynthConfig& cfg) {
  if (cfg.n_locations < 3) throw ParameterError("synthetic world needs at least 3 locations");
  if (!(cfg.area_width > 0.0) || !(cfg.area_height > 0.0)) throw ParameterError("synthetic area must be positive");
  if (cfg.rgb_dim == 0 || cfg.depth_dim == 0 || cfg.latent_dim == 0) {
    throw ParameterError("synthetic dimensions must be at least 1");
  }
  for (double s : cfg.channel_noise) {
    if (!std::isfinite(s) || s < 0.0) throw ParameterError("channel noise must be finite and >= 0");
  }
  if (cfg.heading_count == 0 || cfg.heading_count > 12) throw ParameterError("heading_count must be in [1, 12]");
  if (!(cfg.min_spacing > 0.0)) throw ParameterError("location spacing must be positive");
  if (cfg.shared_maps && cfg.rgb_dim != cfg.depth_dim) {
    throw ParameterError("shared channel maps need rgb_dim == depth_dim");
  }
}

World generate_world(const SynthConfig& cfg) {
  validate(cfg);
  const double s = cfg.min_spacing;
  // Disks of radius s/2 around each location must fit in the padded area at
  // no better than hexagonal packing density.
  const double capacity = (cfg.area_width + s) * (cfg.area_height + s) / (s * s * std::sqrt(3.0) / 2.0);
  if (static_cast<double>(cfg.n_locations) > capacity) {
    throw CapacityError("area " + std::to_string(cfg.area_width) + " x " + std::to_string(cfg.area_height) +
                        " m cannot hold " + std::to_string(cfg.n_locations) + " locations " +
                        std::to_string(s) + " m apart");
  }

  Rng rng(derive_seed(cfg.seed, "world_locations"));
  std::vector<PlanarXY> placed;
  placed.reserve(cfg.n_locations);
  const std::size_t max_attempts = 2000 * cfg.n_locations;
  std::size_t attempts = 0;
  while (placed.size() < cfg.n_locations) {
    if (++attempts > max_attempts) {
      throw CapacityError("could not place " + std::to_string(cfg.n_locations) + " locations " +
                          std::to_string(s) + " m apart in the synthetic area");
    }
    const PlanarXY c{rng.uniform(0.0, cfg.area_width), rng.uniform(0.0, cfg.area_height)};
    bool ok = true;
    for (const auto& p : placed) {
      if (std::hypot(p.x - c.x, p.y - c.y) < s) {
        ok = false;
        break;
      }
    }
    if (ok) placed.push_back(c);
  }

  World world;
  world.locations.reserve(placed.size());
  for (std::size_t i = 0; i < placed.size(); ++i) {
    Location loc;
    loc.id = i + 1;
    loc.geo = from_local_meters(placed[i].x, placed[i].y, cfg.ref_lat, cfg.ref_lon);
    loc.geo.easting = cfg.origin_easting + placed[i].x;
    loc.geo.northing = cfg.origin_northing + placed[i].y;
    world.locations.push_back(loc);
  }

  Rng brng(derive_seed(cfg.seed, "world_buildings"));
  const auto n_buildings = static_cast<std::size_t>(std::round(cfg.area_width * cfg.area_height / kAreaPerBuilding));
  std::vector<Box> boxes;
  for (std::size_t b = 0, tries = 0; b < n_buildings && tries < 50 * n_buildings + 50; ++tries) {
    const double cx = brng.uniform(0.0, cfg.area_width);
    const double cy = brng.uniform(0.0, cfg.area_height);
    const double hw = brng.uniform(2.0, 7.0);
    const double hh = brng.uniform(2.0, 7.0);
    const double height = brng.uniform(4.0, 20.0);
    const Box box{cx - hw, cy - hh, cx + hw, cy + hh, height};
    bool clear = true;
    for (const auto& p : placed) {
      if (p.x > box.x0 - kBuildingClearance && p.x < box.x1 + kBuildingClearance &&
          p.y > box.y0 - kBuildingClearance && p.y < box.y1 + kBuildingClearance) {
        clear = false;
        break;
      }
    }
    if (!clear) continue;
    boxes.push_back(box);
    ++b;
  }

  // The cloud is emitted in the LIDAR survey frame, i.e. displaced by the
  // negated survey offset; render::apply_offset(kSurveyOffset) realigns it.
  const double frame_e = cfg.origin_easting - render::kSurveyOffset.easting;
  const double frame_n = cfg.origin_northing - render::kSurveyOffset.northing;
  auto& pts = world.cloud.points;
  const auto ground = [&](double x, double y) { return 0.01 * x + 0.4 * std::sin(y / 35.0); };
  for (double y = 0.0; y <= cfg.area_height; y += kGroundSpacing) {
    for (double x = 0.0; x <= cfg.area_width; x += kGroundSpacing) {
      pts.push_back({frame_e + x, frame_n + y, ground(x, y)});
    }
  }
  for (const auto& box : boxes) {
    const double base = ground(0.5 * (box.x0 + box.x1), 0.5 * (box.y0 + box.y1));
    for (double y = box.y0; y <= box.y1; y += kRoofSpacing) {
      for (double x = box.x0; x <= box.x1; x += kRoofSpacing) {
        pts.push_back({frame_e + x, frame_n + y, base + box.height});
      }
    }
  }
  return world;
}

}  // namespace rgb2lidar::synth
