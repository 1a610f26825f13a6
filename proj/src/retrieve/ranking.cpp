#include <algorithm>
#include <numeric>

#include "rgb2lidar/error.hpp"
#include "rgb2lidar/retrieve.hpp"

namespace rgb2lidar::retrieve {
namespace {

bool ranks_before(const ScoredRow& a, const ScoredRow& b) {
  return a.score > b.score || (a.score == b.score && a.row < b.row);
}

}  // namespace

std::vector<double> score_all(const EmbeddingIndex& index, std::span<const float> query_embedding) {
  const std::size_t dim = index.dim();
  if (query_embedding.size() != dim) {
    throw ShapeError("score_all: query has " + std::to_string(query_embedding.size()) + " entries, index has " +
                     std::to_string(dim));
  }
  std::vector<double> scores(index.size());
  const float* q = query_embedding.data();
  for (std::size_t r = 0; r < index.size(); ++r) {
    const float* e = index.embeddings().data() + r * dim;
    // Four fixed-order partial sums; the result is a function of the inputs only.
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    std::size_t j = 0;
    for (; j + 4 <= dim; j += 4) {
      a0 += static_cast<double>(e[j]) * q[j];
      a1 += static_cast<double>(e[j + 1]) * q[j + 1];
      a2 += static_cast<double>(e[j + 2]) * q[j + 2];
      a3 += static_cast<double>(e[j + 3]) * q[j + 3];
    }
    for (; j < dim; ++j) a0 += static_cast<double>(e[j]) * q[j];
    scores[r] = (a0 + a1) + (a2 + a3);
  }
  return scores;
}

std::vector<ScoredRow> top_k(std::span<const double> scores, std::size_t k) {
  k = std::min(k, scores.size());
  std::vector<ScoredRow> all(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) all[i] = {i, scores[i]};
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), ranks_before);
  all.resize(k);
  return all;
}

std::size_t rank_of(std::span<const double> scores, std::size_t row) {
  if (row >= scores.size()) throw ParameterError("rank_of: row out of range");
  const double s = scores[row];
  std::size_t ahead = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] > s || (scores[i] == s && i < row)) ++ahead;
  }
  return ahead + 1;
}

QueryResult query_single(const EmbeddingIndex& index, const embed::ProjectionModel& model,
                         std::span<const float> rgb_features, std::size_t k) {
  if (model.space != index.space() || model.joint_dim() != index.dim()) {
    throw SchemaError("query_single: model " + model.space.name() + " does not match index " + index.space().name());
  }
  Eigen::VectorXf q = embed::project(model, rgb_features, Modality::Rgb);
  const float n = q.norm();
  if (n == 0.0f) throw DegenerateVectorError("query_single: query projects to zero");
  if (!model.normalize_output) q /= n;
  const auto scores = score_all(index, std::span<const float>(q.data(), static_cast<std::size_t>(q.size())));
  QueryResult out;
  out.clamped = k > index.size();
  out.top = top_k(scores, k);
  return out;
}

}  // namespace rgb2lidar::retrieve
