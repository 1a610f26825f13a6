#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rgb2lidar/embed.hpp"
#include "rgb2lidar/pairstore.hpp"

namespace rgb2lidar::retrieve {

struct RowMeta {
  LocationId location_id = 0;
  std::uint16_t heading = 0;
  GeoPoint geo;

  RecordKey key() const { return {location_id, heading}; }
  friend bool operator==(const RowMeta&, const RowMeta&) = default;
};

using EmbeddingMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Immutable, unit-norm depth embeddings of one joint space plus geo metadata.
class EmbeddingIndex {
 public:
  EmbeddingIndex(EmbeddingMatrix embeddings, std::vector<RowMeta> metadata, embed::SpaceLabel space);

  std::size_t size() const noexcept { return metadata_.size(); }
  std::uint32_t dim() const noexcept { return static_cast<std::uint32_t>(embeddings_.cols()); }
  const EmbeddingMatrix& embeddings() const noexcept { return embeddings_; }
  std::span<const float> row(std::size_t i) const {
    return {embeddings_.data() + i * embeddings_.cols(), static_cast<std::size_t>(embeddings_.cols())};
  }
  const std::vector<RowMeta>& metadata() const noexcept { return metadata_; }
  const embed::SpaceLabel& space() const noexcept { return space_; }

  /// Row holding `key`, or size() when absent.
  std::size_t find(const RecordKey& key) const;

  friend bool operator==(const EmbeddingIndex&, const EmbeddingIndex&) = default;

 private:
  EmbeddingMatrix embeddings_;
  std::vector<RowMeta> metadata_;
  embed::SpaceLabel space_;
  std::map<RecordKey, std::size_t> row_of_key_;
};

/// Projects every depth record, in input order. SchemaError when the records'
/// cue or modality does not match the model's depth branch.
EmbeddingIndex build_index(const embed::ProjectionModel& model, const FeatureSet& depth_records);
EmbeddingIndex build_index(const embed::ProjectionModel& model, std::span<const FeatureRecord> depth_records);

// "XIX1" index files.
void save_index(const EmbeddingIndex& index, const std::filesystem::path& path);
EmbeddingIndex load_index(const std::filesystem::path& path);

struct ScoredRow {
  std::size_t row = 0;
  double score = 0.0;

  friend bool operator==(const ScoredRow&, const ScoredRow&) = default;
};

/// Exhaustive dot products of a unit query embedding against every row,
/// accumulated in double.
std::vector<double> score_all(const EmbeddingIndex& index, std::span<const float> query_embedding);

/// Top-K by descending score, ties to the ascending row.
std::vector<ScoredRow> top_k(std::span<const double> scores, std::size_t k);

/// 1-based rank of `row` under the same ordering as top_k.
std::size_t rank_of(std::span<const double> scores, std::size_t row);

struct QueryResult {
  std::vector<ScoredRow> top;
  bool clamped = false;  // K exceeded the index size
};

QueryResult query_single(const EmbeddingIndex& index, const embed::ProjectionModel& model,
                         std::span<const float> rgb_features, std::size_t k);

/// Fusion weights w1..w4 over kFusionSpaces (App-App, App-Sem, Sem-App, Sem-Sem).
struct FusionWeights {
  std::array<double, 4> w = {0.33, 0.16, 0.32, 0.19};

  static FusionWeights published() { return {}; }
  static FusionWeights single(std::size_t space);

  friend bool operator==(const FusionWeights&, const FusionWeights&) = default;
};

/// Finite, non-negative, at least one positive; else ParameterError.
void validate(const FusionWeights& weights);

struct FusionSpace {
  embed::ProjectionModel model;
  EmbeddingIndex index;
};

struct FusionConfig {
  std::vector<FusionSpace> spaces;  // exactly 4, kFusionSpaces order
  FusionWeights weights;
};

/// Four spaces in order, models matching their index, all indexes over the
/// same rows in the same order. AlignmentError / SchemaError otherwise.
void validate(const FusionConfig& cfg);

/// One RGB query: both RGB cues of a (location, heading).
struct Query {
  RecordKey key;
  GeoPoint geo;
  std::span<const float> appearance;
  std::span<const float> semantic;
};

struct RankedResult {
  std::string query_id;  // "<location_id>-<heading>"
  RecordKey query_key;
  std::vector<ScoredRow> candidates;  // top-K, nonincreasing score
  std::size_t rank_of_gt = 0;         // 1-based, exact (location, heading) match
  LocationId top1_location_id = 0;
  double top1_score = 0.0;
  double top1_distance_m = 0.0;       // ground distance between query and top-1
};

std::string query_id(const RecordKey& key);

/// Per-space scores of every query against every row (queries x rows).
struct ScoreTable {
  std::array<Eigen::MatrixXd, 4> per_space;
  std::vector<std::size_t> gt_rows;
  std::vector<RecordKey> query_keys;
  std::vector<GeoPoint> query_geos;
  std::vector<RowMeta> rows;

  std::size_t n_queries() const { return gt_rows.size(); }
  std::size_t n_rows() const { return rows.size(); }
};

ScoreTable score_queries(const FusionConfig& cfg, std::span<const Query> queries);

/// Ranks every query of the table under fused scores
/// w1*S_AA + w2*S_AS + w3*S_SA + w4*S_SS.
std::vector<RankedResult> rank_fused(const ScoreTable& table, const FusionWeights& weights, std::size_t k);

/// Single-query fusion straight from the models and indexes.
RankedResult fuse(const FusionConfig& cfg, const Query& query, std::size_t k);

/// Integer compositions of round(1/step) into 4 parts, ascending lexicographic.
std::vector<FusionWeights> simplex_grid(double step);

struct TuneResult {
  FusionWeights weights;
  double recall_at_1 = 0.0;  // percentage
  std::size_t candidates = 0;
};

/// Exhaustive simplex grid search for the best validation R@1; ties keep the
/// lexicographically smallest weight vector.
TuneResult tune_weights(const ScoreTable& validation, double step);
TuneResult tune_weights(const FusionConfig& validation_cfg, std::span<const Query> validation_queries, double step);

}  // namespace rgb2lidar::retrieve
