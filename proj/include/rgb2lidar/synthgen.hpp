#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "rgb2lidar/lidar_render.hpp"
#include "rgb2lidar/pairstore.hpp"

namespace rgb2lidar::synth {

/// Canonical channel order used throughout: A_R, S_R, A_L, S_L.
struct Channel {
  Modality modality;
  Cue cue;
};
inline constexpr std::array<Channel, 4> kChannels = {{{Modality::Rgb, Cue::Appearance},
                                                       {Modality::Rgb, Cue::Semantic},
                                                       {Modality::LidarDepth, Cue::Appearance},
                                                       {Modality::LidarDepth, Cue::Semantic}}};
std::size_t channel_index(Modality m, Cue c);

struct SynthConfig {
  std::size_t n_locations = 200;
  double area_width = 200.0;   // meters east
  double area_height = 200.0;  // meters north
  std::uint64_t seed = 1;
  std::uint32_t rgb_dim = 512;
  std::uint32_t depth_dim = 512;
  std::uint32_t latent_dim = 64;
  /// Per-channel Gaussian noise sigma, in kChannels order.
  std::array<double, 4> channel_noise = {0.0, 0.0, 0.0, 0.0};
  std::uint32_t heading_count = 12;
  double min_spacing = 5.0;
  /// Every channel uses the same linear map (requires rgb_dim == depth_dim).
  bool shared_maps = false;
  double origin_easting = 529000.0;
  double origin_northing = 4466000.0;
  double ref_lat = 40.3487;
  double ref_lon = -74.6593;
};

void validate(const SynthConfig& cfg);

struct Location {
  LocationId id = 0;
  GeoPoint geo;
};

struct World {
  render::PointCloud cloud;
  std::vector<Location> locations;
};

/// Uniform locations at least `min_spacing` apart, box buildings that keep
/// clear of every location, and a ground plane. CapacityError when the area
/// cannot hold the locations.
World generate_world(const SynthConfig& cfg);

/// One latent vector per (location, heading), shared by all four channels.
struct LatentScene {
  std::uint32_t latent_dim = 0;
  std::uint32_t heading_count = 0;
  std::vector<Location> locations;
  Eigen::MatrixXd latents;  // latent_dim x (locations * heading_count), location-major

  Eigen::Ref<const Eigen::VectorXd> latent(std::size_t location_index, std::size_t heading_index) const {
    return latents.col(static_cast<Eigen::Index>(location_index * heading_count + heading_index));
  }
};

LatentScene make_latent_scene(const std::vector<Location>& locations, const SynthConfig& cfg);

/// The seeded linear map z -> channel features (dim x latent_dim).
Eigen::MatrixXd channel_map(const SynthConfig& cfg, std::size_t channel);

/// Four feature sets in kChannels order: map(z) + N(0, sigma^2) per entry.
std::vector<FeatureSet> generate_features(const LatentScene& scene, const SynthConfig& cfg);

/// Adds N(0, sigma_w^2) to every entry, modelling label noise from weak
/// cross-modal supervision of the depth segmentation network.
FeatureSet emulate_weak_semantic(const FeatureSet& depth_semantic, double sigma_w, std::uint64_t seed);

/// Mean cosine between least-squares latent reconstructions of matching
/// (location, heading) records from two channels.
double latent_alignment(const FeatureSet& a, const Eigen::MatrixXd& map_a, const FeatureSet& b,
                        const Eigen::MatrixXd& map_b);

}  // namespace rgb2lidar::synth
