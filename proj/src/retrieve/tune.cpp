#include <algorithm>
#include <cmath>
#include <limits>

#include "rgb2lidar/error.hpp"
#include "rgb2lidar/retrieve.hpp"

namespace rgb2lidar::retrieve {
namespace {

// Per query: the ground truth's four space scores and every row that could
// outrank it under some non-negative weight vector.
struct Rival {
  std::array<double, 4> s{};
  bool before_gt = false;  // wins ties
};

struct Contest {
  std::array<double, 4> gt{};
  std::vector<Rival> rivals;
};

inline double fused_score(const std::array<double, 4>& w, const std::array<double, 4>& s) {
  return w[0] * s[0] + w[1] * s[1] + w[2] * s[2] + w[3] * s[3];
}

std::vector<Contest> build_contests(const ScoreTable& t) {
  std::vector<Contest> out(t.n_queries());
  for (std::size_t q = 0; q < t.n_queries(); ++q) {
    const auto qi = static_cast<Eigen::Index>(q);
    const std::size_t gt = t.gt_rows[q];
    auto& c = out[q];
    for (std::size_t s = 0; s < 4; ++s) c.gt[s] = t.per_space[s](qi, static_cast<Eigen::Index>(gt));
    std::vector<std::pair<double, Rival>> ranked;
    for (std::size_t r = 0; r < t.n_rows(); ++r) {
      if (r == gt) continue;
      Rival rival;
      rival.before_gt = r < gt;
      bool dominated = true;
      double margin = -std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s < 4; ++s) {
        rival.s[s] = t.per_space[s](qi, static_cast<Eigen::Index>(r));
        dominated = dominated && rival.s[s] < c.gt[s];
        margin = std::max(margin, rival.s[s] - c.gt[s]);
      }
      if (dominated && !rival.before_gt) continue;
      ranked.push_back({margin, rival});
    }
    // Likeliest winners first so misses are found early.
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    c.rivals.reserve(ranked.size());
    for (const auto& [m, rival] : ranked) c.rivals.push_back(rival);
  }
  return out;
}

bool gt_on_top(const Contest& c, const std::array<double, 4>& w) {
  const double g = fused_score(w, c.gt);
  for (const auto& rival : c.rivals) {
    const double f = fused_score(w, rival.s);
    if (f > g || (f == g && rival.before_gt)) return false;
  }
  return true;
}

}  // namespace

std::vector<FusionWeights> simplex_grid(double step) {
  if (!(step > 0.0 && step <= 1.0)) throw ParameterError("grid step must lie in (0, 1]");
  const double parts = std::round(1.0 / step);
  if (std::abs(parts * step - 1.0) > 1e-9) throw ParameterError("grid step must divide 1 evenly");
  const auto n = static_cast<int>(parts);
  std::vector<FusionWeights> out;
  for (int a = 0; a <= n; ++a) {
    for (int b = 0; b <= n - a; ++b) {
      for (int c = 0; c <= n - a - b; ++c) {
        const int d = n - a - b - c;
        FusionWeights f;
        f.w = {a / parts, b / parts, c / parts, d / parts};
        out.push_back(f);
      }
    }
  }
  return out;
}

TuneResult tune_weights(const ScoreTable& validation, double step) {
  if (validation.n_queries() == 0) throw ParameterError("tune_weights: empty validation set");
  const auto grid = simplex_grid(step);
  const auto contests = build_contests(validation);
  TuneResult best;
  best.candidates = grid.size();
  std::size_t best_hits = 0;
  bool have_best = false;
  for (const auto& weights : grid) {
    std::size_t hits = 0;
    for (const auto& c : contests) hits += gt_on_top(c, weights.w) ? 1 : 0;
    if (!have_best || hits > best_hits) {
      have_best = true;
      best_hits = hits;
      best.weights = weights;
    }
  }
  best.recall_at_1 = 100.0 * static_cast<double>(best_hits) / static_cast<double>(contests.size());
  return best;
}

TuneResult tune_weights(const FusionConfig& validation_cfg, std::span<const Query> validation_queries, double step) {
  return tune_weights(score_queries(validation_cfg, validation_queries), step);
}

}  // namespace rgb2lidar::retrieve
