#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "rgb2lidar/retrieve.hpp"

namespace rgb2lidar::eval {

// All functions throw ParameterError on an empty input and on a rank of 0.

/// Percentage of ranks <= k.
double recall_at_k(std::span<const std::size_t> ranks, std::size_t k);

/// Median of 1-based ranks; an even count averages the two middle values.
double median_rank(std::span<const std::size_t> ranks);

double mean_rank(std::span<const std::size_t> ranks);

/// Percentage of top-1 retrievals within `radius_m` (inclusive).
double five_meter_recall(std::span<const double> top1_distances_m, double radius_m = 5.0);

struct MetricReport {
  std::map<std::size_t, double> recall_at;  // K -> percentage
  double med_rank = 0.0;
  double mean_rank = 0.0;
  double five_m_recall_at_1 = 0.0;
  std::size_t n_queries = 0;
};

/// Default Ks are 1, 5 and 10.
MetricReport evaluate(std::span<const retrieve::RankedResult> results,
                      std::span<const std::size_t> ks = std::span<const std::size_t>());

nlohmann::json to_json(const MetricReport& report);
MetricReport report_from_json(const nlohmann::json& j);

/// One aligned line per row: name, R@1, R@5, R@10, MedR, MeanR, R@1 within 5 m.
std::string format_table(const std::vector<std::pair<std::string, MetricReport>>& rows);

/// Per-query CSV: query_id,rank_of_gt,top1_location_id,top1_score,top1_distance_m
void write_results_csv(std::span<const retrieve::RankedResult> results, const std::filesystem::path& path);

struct ResultRow {
  std::string query_id;
  std::size_t rank_of_gt = 0;
  LocationId top1_location_id = 0;
  double top1_score = 0.0;
  double top1_distance_m = 0.0;
};

std::vector<ResultRow> read_results_csv(const std::filesystem::path& path);

/// Report computed from CSV rows, identical to evaluate() on the originals.
MetricReport evaluate_rows(std::span<const ResultRow> rows, std::span<const std::size_t> ks = std::span<const std::size_t>());

}  // namespace rgb2lidar::eval
