#include <algorithm>
#include <cmath>
#include <numeric>

#include "rgb2lidar/error.hpp"
#include "rgb2lidar/eval.hpp"

namespace rgb2lidar::eval {
namespace {

void check_ranks(std::span<const std::size_t> ranks, const char* what) {
  if (ranks.empty()) throw ParameterError(std::string(what) + ": no queries");
  for (std::size_t r : ranks) {
    if (r == 0) throw ParameterError(std::string(what) + ": ranks are 1-based");
  }
}

constexpr std::size_t kDefaultKs[] = {1, 5, 10};

MetricReport build(std::span<const std::size_t> ranks, std::span<const double> dists, std::span<const std::size_t> ks) {
  if (ks.empty()) ks = kDefaultKs;
  MetricReport rep;
  for (std::size_t k : ks) rep.recall_at[k] = recall_at_k(ranks, k);
  rep.med_rank = median_rank(ranks);
  rep.mean_rank = mean_rank(ranks);
  rep.five_m_recall_at_1 = five_meter_recall(dists);
  rep.n_queries = ranks.size();
  return rep;
}

}  // namespace

double recall_at_k(std::span<const std::size_t> ranks, std::size_t k) {
  check_ranks(ranks, "recall_at_k");
  if (k == 0) throw ParameterError("recall_at_k: K must be >= 1");
  const auto hits = std::count_if(ranks.begin(), ranks.end(), [k](std::size_t r) { return r <= k; });
  return 100.0 * static_cast<double>(hits) / static_cast<double>(ranks.size());
}

double median_rank(std::span<const std::size_t> ranks) {
  check_ranks(ranks, "median_rank");
  std::vector<std::size_t> v(ranks.begin(), ranks.end());
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n % 2 == 1) return static_cast<double>(v[n / 2]);
  return 0.5 * (static_cast<double>(v[n / 2 - 1]) + static_cast<double>(v[n / 2]));
}

double mean_rank(std::span<const std::size_t> ranks) {
  check_ranks(ranks, "mean_rank");
  long double sum = 0;
  for (std::size_t r : ranks) sum += static_cast<long double>(r);
  return static_cast<double>(sum / static_cast<long double>(ranks.size()));
}

double five_meter_recall(std::span<const double> d, double radius_m) {
  if (d.empty()) throw ParameterError("five_meter_recall: no queries");
  std::size_t hits = 0;
  for (double x : d) {
    if (!std::isfinite(x) || x < 0.0) throw DataError("five_meter_recall: invalid distance");
    hits += x <= radius_m ? 1 : 0;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(d.size());
}

MetricReport evaluate(std::span<const retrieve::RankedResult> results, std::span<const std::size_t> ks) {
  std::vector<std::size_t> ranks;
  std::vector<double> dists;
  for (const auto& r : results) {
    ranks.push_back(r.rank_of_gt);
    dists.push_back(r.top1_distance_m);
  }
  return build(ranks, dists, ks);
}

MetricReport evaluate_rows(std::span<const ResultRow> rows, std::span<const std::size_t> ks) {
  std::vector<std::size_t> ranks;
  std::vector<double> dists;
  for (const auto& r : rows) {
    ranks.push_back(r.rank_of_gt);
    dists.push_back(r.top1_distance_m);
  }
  return build(ranks, dists, ks);
}

}  // namespace rgb2lidar::eval
