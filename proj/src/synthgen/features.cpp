#include <cmath>
#include <map>

#include "rgb2lidar/error.hpp"
#include "rgb2lidar/seed.hpp"
#include "rgb2lidar/synthgen.hpp"

namespace rgb2lidar::synth {

LatentScene make_latent_scene(const std::vector<Location>& locations, const SynthConfig& cfg) {
  validate(cfg);
  LatentScene scene;
  scene.latent_dim = cfg.latent_dim;
  scene.heading_count = cfg.heading_count;
  scene.locations = locations;
  scene.latents.resize(cfg.latent_dim, static_cast<Eigen::Index>(locations.size() * cfg.heading_count));
  const std::uint64_t base = derive_seed(cfg.seed, "latent");
  for (std::size_t l = 0; l < locations.size(); ++l) {
    for (std::size_t h = 0; h < cfg.heading_count; ++h) {
      Rng rng(mix_seed(mix_seed(base, locations[l].id), h));
      auto col = scene.latents.col(static_cast<Eigen::Index>(l * cfg.heading_count + h));
      for (Eigen::Index k = 0; k < col.size(); ++k) col(k) = rng.normal();
    }
  }
  return scene;
}

Eigen::MatrixXd channel_map(const SynthConfig& cfg, std::size_t channel) {
  const std::uint32_t dim = kChannels.at(channel).modality == Modality::Rgb ? cfg.rgb_dim : cfg.depth_dim;
  Rng rng(mix_seed(derive_seed(cfg.seed, "channel_map"), cfg.shared_maps ? 0 : channel));
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.latent_dim));
  Eigen::MatrixXd m(dim, cfg.latent_dim);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = scale * rng.normal();
  }
  return m;
}

std::vector<FeatureSet> generate_features(const LatentScene& scene, const SynthConfig& cfg) {
  validate(cfg);
  if (scene.latent_dim != cfg.latent_dim || scene.heading_count != cfg.heading_count) {
    throw ParameterError("latent scene does not match the synthetic config");
  }
  std::vector<FeatureSet> out;
  const std::uint64_t noise_base = derive_seed(cfg.seed, "channel_noise");
  for (std::size_t ch = 0; ch < kChannels.size(); ++ch) {
    const Eigen::MatrixXd map = channel_map(cfg, ch);
    const double sigma = cfg.channel_noise[ch];
    FeatureSet set;
    set.modality = kChannels[ch].modality;
    set.cue = kChannels[ch].cue;
    set.dimension = static_cast<std::uint32_t>(map.rows());
    set.records.reserve(scene.locations.size() * scene.heading_count);
    for (std::size_t l = 0; l < scene.locations.size(); ++l) {
      const auto& loc = scene.locations[l];
      for (std::size_t h = 0; h < scene.heading_count; ++h) {
        const Eigen::VectorXd clean = map * scene.latent(l, h);
        Rng rng(mix_seed(mix_seed(mix_seed(noise_base, ch), loc.id), h));
        FeatureRecord r;
        r.location_id = loc.id;
        r.geo = loc.geo;
        r.heading = static_cast<std::uint16_t>(30 * h);
        r.modality = set.modality;
        r.cue = set.cue;
        r.vector.resize(set.dimension);
        for (std::uint32_t i = 0; i < set.dimension; ++i) {
          const double noise = sigma > 0.0 ? sigma * rng.normal() : 0.0;
          r.vector[i] = static_cast<float>(clean(i) + noise);
        }
        set.records.push_back(std::move(r));
      }
    }
    out.push_back(std::move(set));
  }
  return out;
}

FeatureSet emulate_weak_semantic(const FeatureSet& depth_semantic, double sigma_w, std::uint64_t seed) {
  if (!std::isfinite(sigma_w) || sigma_w < 0.0) throw ParameterError("weak-supervision sigma must be >= 0");
  FeatureSet out = depth_semantic;
  if (sigma_w == 0.0) return out;
  const std::uint64_t base = derive_seed(seed, "weak_semantic");
  for (auto& r : out.records) {
    Rng rng(mix_seed(mix_seed(base, r.location_id), r.heading));
    for (float& v : r.vector) v = static_cast<float>(v + sigma_w * rng.normal());
  }
  return out;
}

double latent_alignment(const FeatureSet& a, const Eigen::MatrixXd& map_a, const FeatureSet& b,
                        const Eigen::MatrixXd& map_b) {
  if (map_a.rows() != a.dimension || map_b.rows() != b.dimension || map_a.cols() != map_b.cols()) {
    throw ShapeError("latent_alignment: maps do not match the feature sets");
  }
  const Eigen::MatrixXd pinv_a = map_a.completeOrthogonalDecomposition().pseudoInverse();
  const Eigen::MatrixXd pinv_b = map_b.completeOrthogonalDecomposition().pseudoInverse();
  std::map<RecordKey, const FeatureRecord*> b_by_key;
  for (const auto& r : b.records) b_by_key.emplace(r.key(), &r);

  double total = 0.0;
  std::size_t count = 0;
  for (const auto& ra : a.records) {
    const auto it = b_by_key.find(ra.key());
    if (it == b_by_key.end()) continue;
    const Eigen::VectorXd fa = Eigen::Map<const Eigen::VectorXf>(ra.vector.data(), a.dimension).cast<double>();
    const Eigen::VectorXd fb =
        Eigen::Map<const Eigen::VectorXf>(it->second->vector.data(), b.dimension).cast<double>();
    const Eigen::VectorXd za = pinv_a * fa;
    const Eigen::VectorXd zb = pinv_b * fb;
    const double denom = za.norm() * zb.norm();
    if (denom == 0.0) continue;
    total += za.dot(zb) / denom;
    ++count;
  }
  if (count == 0) throw InsufficientDataError("latent_alignment: no matching records");
  return total / static_cast<double>(count);
}

}  // namespace rgb2lidar::synth
