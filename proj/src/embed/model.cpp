#include <algorithm>
#include <cmath>

#include "rgb2lidar/embed.hpp"
#include "rgb2lidar/error.hpp"
#include "rgb2lidar/seed.hpp"

namespace rgb2lidar::embed {

std::string SpaceLabel::name() const {
  std::string n;
  n += rgb_cue == Cue::Appearance ? "A_R" : "S_R";
  n += '-';
  n += depth_cue == Cue::Appearance ? "A_L" : "S_L";
  return n;
}

std::string SpaceLabel::code() const {
  return {rgb_cue == Cue::Appearance ? 'A' : 'S', depth_cue == Cue::Appearance ? 'A' : 'S'};
}

SpaceLabel parse_space(std::string_view code) {
  const auto cue = [&](char c) {
    if (c == 'A') return Cue::Appearance;
    if (c == 'S') return Cue::Semantic;
    throw ParameterError("unknown space code '" + std::string(code) + "'");
  };
  if (code.size() != 2) throw ParameterError("space code must have two letters, got '" + std::string(code) + "'");
  return {cue(code[0]), cue(code[1])};
}

void validate(const ProjectionModel& model) {
  if (model.rgb_weights.rows() < 1 || model.rgb_weights.cols() < 1 || model.depth_weights.cols() < 1) {
    throw ShapeError("projection model dimensions must be at least 1");
  }
  if (model.rgb_weights.rows() != model.depth_weights.rows()) {
    throw ShapeError("projection model branches disagree on the joint dimension");
  }
  if (!(model.margin > 0.0) || !std::isfinite(model.margin)) throw ParameterError("margin must be positive");
  if (!model.rgb_weights.allFinite() || !model.depth_weights.allFinite()) {
    throw DataError("projection model has non-finite weights");
  }
}

ProjectionModel init_model(SpaceLabel space, std::uint32_t joint_dim, std::uint32_t rgb_dim,
                           std::uint32_t depth_dim, double margin, std::uint64_t seed) {
  if (joint_dim == 0 || rgb_dim == 0 || depth_dim == 0) throw ShapeError("model dimensions must be at least 1");
  ProjectionModel m;
  m.space = space;
  m.margin = margin;
  Rng rng(seed);
  const auto fill = [&](Eigen::MatrixXf& w, std::uint32_t fan_in) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + joint_dim));
    w.resize(joint_dim, fan_in);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = static_cast<float>(rng.uniform(-a, a));
    }
  };
  fill(m.rgb_weights, rgb_dim);
  fill(m.depth_weights, depth_dim);
  validate(m);
  return m;
}

Eigen::VectorXf project(const ProjectionModel& model, std::span<const float> features, Modality modality) {
  const Eigen::MatrixXf& w = modality == Modality::Rgb ? model.rgb_weights : model.depth_weights;
  if (static_cast<Eigen::Index>(features.size()) != w.cols()) {
    throw ShapeError("project: " + std::string(to_string(modality)) + " input has " +
                     std::to_string(features.size()) + " entries, model expects " + std::to_string(w.cols()));
  }
  Eigen::VectorXf out = w * Eigen::Map<const Eigen::VectorXf>(features.data(), w.cols());
  if (model.normalize_output) {
    const float n = out.norm();
    if (n > 0.0f) out /= n;
  }
  return out;
}

double score(const ProjectionModel& model, std::span<const float> rgb, std::span<const float> depth) {
  const Eigen::VectorXd r = project(model, rgb, Modality::Rgb).cast<double>();
  const Eigen::VectorXd d = project(model, depth, Modality::LidarDepth).cast<double>();
  const double denom = r.norm() * d.norm();
  if (denom == 0.0) throw DegenerateVectorError("score: zero-norm projection");
  return std::clamp(r.dot(d) / denom, -1.0, 1.0);
}

}  // namespace rgb2lidar::embed
