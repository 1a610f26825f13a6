#include <cmath>

#include "rgb2lidar/error.hpp"
#include "rgb2lidar/retrieve.hpp"

namespace rgb2lidar::retrieve {
namespace {

inline double fused_score(const std::array<double, 4>& w, double aa, double as, double sa, double ss) {
  return w[0] * aa + w[1] * as + w[2] * sa + w[3] * ss;
}

std::span<const float> rgb_input(const Query& q, Cue cue) {
  return cue == Cue::Appearance ? q.appearance : q.semantic;
}

Eigen::VectorXf query_embedding(const embed::ProjectionModel& model, std::span<const float> rgb) {
  Eigen::VectorXf e = embed::project(model, rgb, Modality::Rgb);
  const float n = e.norm();
  if (n == 0.0f) throw DegenerateVectorError("query projects to zero in space " + model.space.name());
  if (!model.normalize_output) e /= n;
  return e;
}

std::vector<double> space_scores(const FusionSpace& space, const Query& q) {
  const Eigen::VectorXf e = query_embedding(space.model, rgb_input(q, space.model.space.rgb_cue));
  return score_all(space.index, std::span<const float>(e.data(), static_cast<std::size_t>(e.size())));
}

RankedResult make_result(const Query& q, std::span<const double> fused, std::size_t gt_row,
                         const std::vector<RowMeta>& rows, std::size_t k) {
  RankedResult out;
  out.query_key = q.key;
  out.query_id = query_id(q.key);
  out.candidates = top_k(fused, std::max<std::size_t>(k, 1));
  out.rank_of_gt = rank_of(fused, gt_row);
  const auto& top = out.candidates.front();
  out.top1_location_id = rows[top.row].location_id;
  out.top1_score = top.score;
  out.top1_distance_m = ground_distance_m(q.geo, rows[top.row].geo);
  if (k == 0) out.candidates.clear();
  return out;
}

}  // namespace

std::string query_id(const RecordKey& key) {
  return std::to_string(key.location_id) + "-" + std::to_string(key.heading);
}

FusionWeights FusionWeights::single(std::size_t space) {
  FusionWeights f;
  f.w = {0.0, 0.0, 0.0, 0.0};
  f.w.at(space) = 1.0;
  return f;
}

void validate(const FusionWeights& weights) {
  bool any_positive = false;
  for (double w : weights.w) {
    if (!std::isfinite(w) || w < 0.0) throw ParameterError("fusion weights must be finite and >= 0");
    any_positive = any_positive || w > 0.0;
  }
  if (!any_positive) throw ParameterError("at least one fusion weight must be positive");
}

void validate(const FusionConfig& cfg) {
  validate(cfg.weights);
  if (cfg.spaces.size() != 4) throw ParameterError("fusion needs exactly 4 spaces");
  for (std::size_t s = 0; s < 4; ++s) {
    const auto& sp = cfg.spaces[s];
    if (sp.model.space != embed::kFusionSpaces[s] || sp.index.space() != embed::kFusionSpaces[s]) {
      throw SchemaError("fusion space " + std::to_string(s) + " must be " + embed::kFusionSpaces[s].name());
    }
    if (sp.model.joint_dim() != sp.index.dim()) throw ShapeError("fusion space " + sp.model.space.name() + ": model/index dims differ");
  }
  const auto& ref = cfg.spaces[0].index.metadata();
  for (std::size_t s = 1; s < 4; ++s) {
    const auto& other = cfg.spaces[s].index.metadata();
    if (other.size() != ref.size()) throw AlignmentError("fusion indexes have different row counts");
    for (std::size_t r = 0; r < ref.size(); ++r) {
      if (other[r].key() != ref[r].key()) {
        throw AlignmentError("fusion indexes disagree at row " + std::to_string(r));
      }
    }
  }
}

ScoreTable score_queries(const FusionConfig& cfg, std::span<const Query> queries) {
  validate(cfg);
  ScoreTable t;
  const std::size_t n = cfg.spaces[0].index.size();
  t.rows = cfg.spaces[0].index.metadata();
  for (auto& m : t.per_space) m.resize(static_cast<Eigen::Index>(queries.size()), static_cast<Eigen::Index>(n));
  t.gt_rows.reserve(queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const std::size_t gt = cfg.spaces[0].index.find(queries[q].key);
    if (gt == n) throw DataError("query " + query_id(queries[q].key) + " has no ground-truth row in the index");
    t.gt_rows.push_back(gt);
    t.query_keys.push_back(queries[q].key);
    t.query_geos.push_back(queries[q].geo);
    for (std::size_t s = 0; s < 4; ++s) {
      const auto scores = space_scores(cfg.spaces[s], queries[q]);
      t.per_space[s].row(static_cast<Eigen::Index>(q)) =
          Eigen::Map<const Eigen::RowVectorXd>(scores.data(), static_cast<Eigen::Index>(n));
    }
  }
  return t;
}

std::vector<RankedResult> rank_fused(const ScoreTable& table, const FusionWeights& weights, std::size_t k) {
  validate(weights);
  if (table.n_rows() == 0) throw InsufficientDataError("rank_fused: empty index");
  std::vector<RankedResult> out;
  out.reserve(table.n_queries());
  std::vector<double> fused(table.n_rows());
  for (std::size_t q = 0; q < table.n_queries(); ++q) {
    const auto qi = static_cast<Eigen::Index>(q);
    for (std::size_t r = 0; r < table.n_rows(); ++r) {
      const auto ri = static_cast<Eigen::Index>(r);
      fused[r] = fused_score(weights.w, table.per_space[0](qi, ri), table.per_space[1](qi, ri),
                             table.per_space[2](qi, ri), table.per_space[3](qi, ri));
    }
    Query query;
    query.key = table.query_keys[q];
    query.geo = table.query_geos[q];
    out.push_back(make_result(query, fused, table.gt_rows[q], table.rows, k));
  }
  return out;
}

RankedResult fuse(const FusionConfig& cfg, const Query& query, std::size_t k) {
  validate(cfg);
  const auto& rows = cfg.spaces[0].index.metadata();
  if (rows.empty()) throw InsufficientDataError("fuse: empty index");
  const std::size_t gt = cfg.spaces[0].index.find(query.key);
  if (gt == rows.size()) throw DataError("query " + query_id(query.key) + " has no ground-truth row in the index");
  std::array<std::vector<double>, 4> s;
  for (std::size_t i = 0; i < 4; ++i) s[i] = space_scores(cfg.spaces[i], query);
  std::vector<double> fused(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) fused[r] = fused_score(cfg.weights.w, s[0][r], s[1][r], s[2][r], s[3][r]);
  return make_result(query, fused, gt, rows, k);
}

}  // namespace rgb2lidar::retrieve
