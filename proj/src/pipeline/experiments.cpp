#include "rgb2lidar/pipeline.hpp"
#include "rgb2lidar/seed.hpp"

namespace rgb2lidar::pipeline {
namespace {

struct AblationRow {
  const char* name;
  std::array<bool, 4> use;  // kFusionSpaces order: AA, AS, SA, SS
};

constexpr std::array<AblationRow, 8> kRows = {{
    {"A_R-A_L", {true, false, false, false}},
    {"S_R-S_L", {false, false, false, true}},
    {"A_R-S_L", {false, true, false, false}},
    {"S_R-A_L", {false, false, true, false}},
    {"A_R-A_L+S_R-A_L", {true, false, true, false}},
    {"A_R-A_L+A_R-S_L", {true, true, false, false}},
    {"A_R-A_L+S_R-A_L+A_R-S_L", {true, true, true, false}},
    {"A_R-A_L+S_R-A_L+A_R-S_L+S_R-S_L", {true, true, true, true}},
}};

}  // namespace

std::vector<std::string> ablation_row_names() {
  std::vector<std::string> out;
  for (const auto& r : kRows) out.emplace_back(r.name);
  return out;
}

retrieve::FusionWeights ablation_weights(std::size_t row, const retrieve::FusionWeights& base) {
  if (row >= kRows.size()) throw ParameterError("ablation row " + std::to_string(row) + " does not exist");
  const auto& r = kRows[row];
  std::size_t used = 0;
  for (bool u : r.use) used += u ? 1 : 0;
  if (used == 1) {
    for (std::size_t k = 0; k < 4; ++k) {
      if (r.use[k]) return retrieve::FusionWeights::single(k);
    }
  }
  retrieve::FusionWeights w;
  double total = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    w.w[k] = r.use[k] ? base.w[k] : 0.0;
    total += w.w[k];
  }
  // Tuned weights may zero out every space of a row; fall back to equal weights.
  if (total == 0.0) {
    for (std::size_t k = 0; k < 4; ++k) w.w[k] = r.use[k] ? 1.0 / static_cast<double>(used) : 0.0;
  }
  return w;
}

std::vector<std::size_t> chance_ranks(std::size_t n_rows, std::span<const std::size_t> gt_rows, std::uint64_t seed) {
  if (n_rows == 0) throw InsufficientDataError("chance_ranks: empty database");
  std::vector<std::size_t> ranks;
  ranks.reserve(gt_rows.size());
  std::vector<double> scores(n_rows);
  for (std::size_t q = 0; q < gt_rows.size(); ++q) {
    if (gt_rows[q] >= n_rows) throw ParameterError("chance_ranks: ground-truth row out of range");
    Rng rng(mix_seed(seed, q));
    for (auto& s : scores) s = rng.uniform01();
    ranks.push_back(retrieve::rank_of(scores, gt_rows[q]));
  }
  return ranks;
}

}  // namespace rgb2lidar::pipeline
