#include <algorithm>
#include <limits>
#include <numeric>
#include <set>

#include "rgb2lidar/embed.hpp"
#include "rgb2lidar/error.hpp"
#include "rgb2lidar/seed.hpp"

namespace rgb2lidar::embed {

void validate(const TripletBatch& batch) {
  const auto b = static_cast<Eigen::Index>(batch.location_ids.size());
  if (batch.rgb.rows() != b || batch.depth.rows() != b) {
    throw ShapeError("triplet batch: feature rows do not match the location ids");
  }
  if (b < 2) throw InsufficientDataError("triplet batch of size " + std::to_string(b) + " has no negatives");
  std::set<LocationId> seen;
  for (LocationId id : batch.location_ids) {
    if (!seen.insert(id).second) {
      throw DataError("triplet batch repeats location " + std::to_string(id));
    }
  }
}

NegativeSample sample_negatives(std::size_t batch_size, std::size_t per_positive, std::uint64_t seed) {
  if (batch_size < 2) throw InsufficientDataError("a batch of size 1 has no negatives");
  if (per_positive < 1 || per_positive > batch_size - 1) {
    throw ParameterError("negatives_per_positive must lie in [1, batch_size - 1]");
  }
  NegativeSample out;
  out.per_anchor.resize(batch_size);
  Rng rng(seed);
  std::vector<std::uint32_t> others(batch_size - 1);
  for (std::size_t i = 0; i < batch_size; ++i) {
    for (std::size_t j = 0, k = 0; j < batch_size; ++j) {
      if (j != i) others[k++] = static_cast<std::uint32_t>(j);
    }
    if (per_positive < others.size()) {
      // Partial Fisher-Yates: the first per_positive slots are the sample.
      for (std::size_t k = 0; k < per_positive; ++k) {
        const auto pick = k + static_cast<std::size_t>(rng.uniform_index(others.size() - k));
        std::swap(others[k], others[pick]);
      }
    }
    auto& chosen = out.per_anchor[i];
    chosen.assign(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(per_positive));
    std::sort(chosen.begin(), chosen.end());
  }
  return out;
}

HingeTerms bidirectional_hinge(const Eigen::MatrixXd& scores, const NegativeSample& negatives, double margin) {
  const Eigen::Index b = scores.rows();
  if (scores.cols() != b || static_cast<Eigen::Index>(negatives.per_anchor.size()) != b) {
    throw ShapeError("bidirectional_hinge: score matrix and negatives disagree on the batch size");
  }
  if (b < 2) throw InsufficientDataError("a batch of size 1 has no negatives");
  HingeTerms out;
  out.per_pair.assign(static_cast<std::size_t>(b), 0.0);
  out.score_grad = Eigen::MatrixXd::Zero(b, b);
  const double inv_b = 1.0 / static_cast<double>(b);
  double total = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const auto& cand = negatives.per_anchor[static_cast<std::size_t>(i)];
    if (cand.empty()) throw InsufficientDataError("anchor " + std::to_string(i) + " has no sampled negatives");
    double hardest_depth = -std::numeric_limits<double>::infinity();
    double hardest_rgb = -std::numeric_limits<double>::infinity();
    Eigen::Index depth_neg = -1;
    Eigen::Index rgb_neg = -1;
    for (std::uint32_t j : cand) {
      if (static_cast<Eigen::Index>(j) == i || static_cast<Eigen::Index>(j) >= b) {
        throw ParameterError("negative sample contains an invalid index");
      }
      if (scores(i, j) > hardest_depth) {
        hardest_depth = scores(i, j);
        depth_neg = j;
      }
      if (scores(j, i) > hardest_rgb) {
        hardest_rgb = scores(j, i);
        rgb_neg = j;
      }
    }
    const double positive = scores(i, i);
    const double to_depth = margin - positive + hardest_depth;
    const double to_rgb = margin - positive + hardest_rgb;
    double li = 0.0;
    if (to_depth > 0.0) {
      li += to_depth;
      out.score_grad(i, i) -= inv_b;
      out.score_grad(i, depth_neg) += inv_b;
    }
    if (to_rgb > 0.0) {
      li += to_rgb;
      out.score_grad(i, i) -= inv_b;
      out.score_grad(rgb_neg, i) += inv_b;
    }
    out.per_pair[static_cast<std::size_t>(i)] = li;
    total += li;
  }
  out.loss = total * inv_b;
  return out;
}

template <typename Scalar>
LossAndGradient<Scalar> triplet_loss(const Matrix<Scalar>& rgb_weights, const Matrix<Scalar>& depth_weights,
                                     const Matrix<Scalar>& rgb_features, const Matrix<Scalar>& depth_features,
                                     const NegativeSample& negatives, double margin) {
  if (rgb_features.cols() != rgb_weights.cols() || depth_features.cols() != depth_weights.cols() ||
      rgb_weights.rows() != depth_weights.rows() || rgb_features.rows() != depth_features.rows()) {
    throw ShapeError("triplet_loss: weight and feature shapes disagree");
  }
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Matrix<Scalar> r = rgb_features * rgb_weights.transpose();    // B x J
  const Matrix<Scalar> d = depth_features * depth_weights.transpose();  // B x J
  const Vec r_norm = r.rowwise().norm();
  const Vec d_norm = d.rowwise().norm();
  if ((r_norm.array() == Scalar(0)).any() || (d_norm.array() == Scalar(0)).any()) {
    throw DegenerateVectorError("triplet_loss: zero-norm projection in batch");
  }
  const Matrix<Scalar> r_hat = r.array().colwise() / r_norm.array();
  const Matrix<Scalar> d_hat = d.array().colwise() / d_norm.array();
  const Eigen::MatrixXd scores = (r_hat * d_hat.transpose()).template cast<double>();

  const HingeTerms hinge = bidirectional_hinge(scores, negatives, margin);
  const Matrix<Scalar> g = hinge.score_grad.cast<Scalar>();

  // Back through row normalisation: dx = (g - (g . x_hat) x_hat) / |x|.
  const auto normalize_backward = [](const Matrix<Scalar>& g_hat, const Matrix<Scalar>& x_hat, const Vec& norm) {
    const Vec radial = g_hat.cwiseProduct(x_hat).rowwise().sum();
    Matrix<Scalar> tangential = g_hat - Matrix<Scalar>(x_hat.array().colwise() * radial.array());
    return Matrix<Scalar>(tangential.array().colwise() / norm.array());
  };
  const Matrix<Scalar> g_r = normalize_backward(g * d_hat, r_hat, r_norm);
  const Matrix<Scalar> g_d = normalize_backward(g.transpose() * r_hat, d_hat, d_norm);

  LossAndGradient<Scalar> out;
  out.loss = hinge.loss;
  out.grad_rgb = g_r.transpose() * rgb_features;
  out.grad_depth = g_d.transpose() * depth_features;
  return out;
}

template LossAndGradient<float> triplet_loss<float>(const Matrix<float>&, const Matrix<float>&, const Matrix<float>&,
                                                    const Matrix<float>&, const NegativeSample&, double);
template LossAndGradient<double> triplet_loss<double>(const Matrix<double>&, const Matrix<double>&,
                                                      const Matrix<double>&, const Matrix<double>&,
                                                      const NegativeSample&, double);

LossAndGradient<float> triplet_loss(const ProjectionModel& model, const TripletBatch& batch,
                                    std::size_t negatives_per_positive, std::uint64_t sampler_seed) {
  validate(batch);
  const NegativeSample neg = sample_negatives(batch.size(), negatives_per_positive, sampler_seed);
  return triplet_loss<float>(model.rgb_weights, model.depth_weights, batch.rgb, batch.depth, neg, model.margin);
}

}  // namespace rgb2lidar::embed
