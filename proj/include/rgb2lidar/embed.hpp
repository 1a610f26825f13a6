#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rgb2lidar/pairstore.hpp"

namespace rgb2lidar::embed {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Which RGB cue and which depth cue a joint space was trained on.
struct SpaceLabel {
  Cue rgb_cue = Cue::Appearance;
  Cue depth_cue = Cue::Appearance;

  /// "A_R-A_L" style name.
  std::string name() const;
  /// Two-letter code, RGB cue first: "AA", "AS", "SA", "SS".
  std::string code() const;

  friend bool operator==(const SpaceLabel&, const SpaceLabel&) = default;
};

SpaceLabel parse_space(std::string_view code);

/// The four spaces in fusion-weight order: App-App, App-Sem, Sem-App, Sem-Sem.
inline constexpr std::array<SpaceLabel, 4> kFusionSpaces = {{{Cue::Appearance, Cue::Appearance},
                                                             {Cue::Appearance, Cue::Semantic},
                                                             {Cue::Semantic, Cue::Appearance},
                                                             {Cue::Semantic, Cue::Semantic}}};

/// Linear projections of both modalities into a J-dimensional joint space.
struct ProjectionModel {
  SpaceLabel space;
  Eigen::MatrixXf rgb_weights;    // J x I
  Eigen::MatrixXf depth_weights;  // J x L
  double margin = 0.2;
  bool normalize_output = true;

  std::uint32_t joint_dim() const { return static_cast<std::uint32_t>(rgb_weights.rows()); }
  std::uint32_t rgb_dim() const { return static_cast<std::uint32_t>(rgb_weights.cols()); }
  std::uint32_t depth_dim() const { return static_cast<std::uint32_t>(depth_weights.cols()); }

  friend bool operator==(const ProjectionModel& a, const ProjectionModel& b) {
    return a.space == b.space && a.margin == b.margin && a.normalize_output == b.normalize_output &&
           a.rgb_weights.rows() == b.rgb_weights.rows() && a.rgb_weights.cols() == b.rgb_weights.cols() &&
           a.depth_weights.rows() == b.depth_weights.rows() && a.depth_weights.cols() == b.depth_weights.cols() &&
           a.rgb_weights == b.rgb_weights && a.depth_weights == b.depth_weights;
  }
};

void validate(const ProjectionModel& model);

/// Glorot-uniform initialisation, a = sqrt(6 / (fan_in + fan_out)).
ProjectionModel init_model(SpaceLabel space, std::uint32_t joint_dim, std::uint32_t rgb_dim,
                           std::uint32_t depth_dim, double margin, std::uint64_t seed);

/// W f, unit-normalised when normalize_output is set. ShapeError on a
/// dimension mismatch.
Eigen::VectorXf project(const ProjectionModel& model, std::span<const float> features, Modality modality);

/// Cosine of the two projections, in [-1, 1]. DegenerateVectorError when a
/// projection has zero norm.
double score(const ProjectionModel& model, std::span<const float> rgb, std::span<const float> depth);

/// Row i of both matrices is one positive pair.
struct TripletBatch {
  Eigen::MatrixXf rgb;    // B x I
  Eigen::MatrixXf depth;  // B x L
  std::vector<LocationId> location_ids;

  std::size_t size() const { return location_ids.size(); }
};

/// Shapes agree, B >= 2 and every location occurs once.
void validate(const TripletBatch& batch);

/// Per-anchor negative candidates: indices of other rows, ascending.
struct NegativeSample {
  std::vector<std::vector<std::uint32_t>> per_anchor;
};

/// For each row draws `per_positive` other rows uniformly without
/// replacement. Never returns the anchor itself.
NegativeSample sample_negatives(std::size_t batch_size, std::size_t per_positive, std::uint64_t seed);

struct HingeTerms {
  double loss = 0.0;              // mean over pairs
  std::vector<double> per_pair;   // both hinge terms summed
  Eigen::MatrixXd score_grad;     // dLoss / dScores
};

/// Bidirectional max-of-hinges over a score matrix, scores(i, j) = S(r_i, d_j).
/// For pair i the hardest sampled depth negative and the hardest sampled RGB
/// negative each contribute [margin - S(i,i) + S_neg]_+.
HingeTerms bidirectional_hinge(const Eigen::MatrixXd& scores, const NegativeSample& negatives, double margin);

template <typename Scalar>
struct LossAndGradient {
  double loss = 0.0;
  Matrix<Scalar> grad_rgb;    // J x I
  Matrix<Scalar> grad_depth;  // J x L
};

/// Triplet ranking loss with cosine scores and analytic gradients. Features
/// are row-per-pair (B x I, B x L). Instantiated for float and double.
template <typename Scalar>
LossAndGradient<Scalar> triplet_loss(const Matrix<Scalar>& rgb_weights, const Matrix<Scalar>& depth_weights,
                                     const Matrix<Scalar>& rgb_features, const Matrix<Scalar>& depth_features,
                                     const NegativeSample& negatives, double margin);

LossAndGradient<float> triplet_loss(const ProjectionModel& model, const TripletBatch& batch,
                                    std::size_t negatives_per_positive, std::uint64_t sampler_seed);

enum class OptimizerKind { Sgd, SgdMomentum, Adam };

OptimizerKind parse_optimizer(std::string_view name);
std::string_view to_string(OptimizerKind kind);

struct TrainConfig {
  std::uint32_t joint_dim = 1024;
  double margin = 0.2;
  std::size_t batch_size = 128;
  std::size_t epochs = 30;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::Adam;
  std::size_t negatives_per_positive = 127;
  std::uint64_t seed = 0;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool normalize_output = true;
};

void validate(const TrainConfig& cfg);

/// First-order update rules over one weight matrix.
class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg, Eigen::Index rows, Eigen::Index cols);

  void step(Eigen::MatrixXf& weights, const Eigen::MatrixXf& gradient);

 private:
  OptimizerKind kind_;
  double lr_, momentum_, beta1_, beta2_, epsilon_;
  std::size_t t_ = 0;
  Eigen::MatrixXf m_;
  Eigen::MatrixXf v_;
};

/// Minibatches of row indices in which every location appears at most once:
/// each round takes one pending pair per location in shuffled order.
std::vector<std::vector<std::size_t>> make_batches(const PairSet& pairs, std::size_t batch_size, std::uint64_t seed);

TripletBatch gather_batch(const PairSet& pairs, std::span<const std::size_t> rows);

/// R@1 (fraction in [0, 1]) retrieving the depth side of `pairs` with their
/// own RGB side, ties to the lower row.
double self_recall_at_1(const ProjectionModel& model, const PairSet& pairs);

struct TrainResult {
  ProjectionModel model;               // best-validation checkpoint
  double initial_loss = 0.0;           // first-epoch batches at the initial weights
  std::vector<double> epoch_loss;      // mean batch loss per epoch
  std::vector<double> val_recall_at_1; // index 0 = initial weights
  std::size_t best_epoch = 0;          // 0 = initial weights
};

/// Trains one joint space. An empty validation set keeps the final weights.
/// TrainingError when the loss becomes non-finite.
TrainResult train(const PairSet& train_pairs, const PairSet& val_pairs, const TrainConfig& cfg);

// "XJE1" checkpoints.
void save_checkpoint(const ProjectionModel& model, const std::filesystem::path& path);
ProjectionModel load_checkpoint(const std::filesystem::path& path);

}  // namespace rgb2lidar::embed
