#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "rgb2lidar/error.hpp"
#include "rgb2lidar/eval.hpp"

namespace rgb2lidar::eval {
namespace {

// Shortest round-trip representation.
std::string fmt(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return {buf, res.ptr};
}

std::string fixed(double x, int prec) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, x);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <typename T>
T parse_num(const std::string& s, const std::string& where) {
  T v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw FormatError(where + ": bad number '" + s + "'");
  return v;
}

constexpr const char* kHeader = "query_id,rank_of_gt,top1_location_id,top1_score,top1_distance_m";

}  // namespace

nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : r.recall_at) j["r_at_" + std::to_string(k)] = v;
  j["med_r"] = r.med_rank;
  j["mean_r"] = r.mean_rank;
  j["r5m_at_1"] = r.five_m_recall_at_1;
  j["n"] = r.n_queries;
  return j;
}

MetricReport report_from_json(const nlohmann::json& j) {
  MetricReport r;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key.rfind("r_at_", 0) == 0) r.recall_at[std::stoul(key.substr(5))] = value.get<double>();
    }
    r.med_rank = j.at("med_r").get<double>();
    r.mean_rank = j.at("mean_r").get<double>();
    r.five_m_recall_at_1 = j.at("r5m_at_1").get<double>();
    r.n_queries = j.at("n").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("metric report: ") + e.what());
  }
  return r;
}

std::string format_table(const std::vector<std::pair<std::string, MetricReport>>& rows) {
  std::size_t name_w = 6;
  for (const auto& [name, rep] : rows) name_w = std::max(name_w, name.size());
  auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.insert(0, w - s.size(), ' ');
    return s;
  };
  auto get = [](const MetricReport& r, std::size_t k) {
    const auto it = r.recall_at.find(k);
    return it == r.recall_at.end() ? std::string("-") : fixed(it->second, 1);
  };
  std::string out = std::string("method") + std::string(name_w - 6, ' ');
  for (const char* h : {"R@1", "R@5", "R@10", "MedR", "MeanR", "5m R@1"}) out += pad(h, 9);
  out += '\n';
  for (const auto& [name, rep] : rows) {
    out += name + std::string(name_w - name.size(), ' ');
    out += pad(get(rep, 1), 9) + pad(get(rep, 5), 9) + pad(get(rep, 10), 9);
    out += pad(fixed(rep.med_rank, 1), 9) + pad(fixed(rep.mean_rank, 1), 9) + pad(fixed(rep.five_m_recall_at_1, 1), 9);
    out += '\n';
  }
  return out;
}

void write_results_csv(std::span<const retrieve::RankedResult> results, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path.string());
  os << kHeader << '\n';
  for (const auto& r : results) {
    os << r.query_id << ',' << r.rank_of_gt << ',' << r.top1_location_id << ',' << fmt(r.top1_score) << ','
       << fmt(r.top1_distance_m) << '\n';
  }
  if (!os) throw DataError("write failed: " + path.string());
}

std::vector<ResultRow> read_results_csv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != kHeader) throw FormatError(path.string() + ": missing results header");
  std::vector<ResultRow> out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (cells.size() != 5) throw FormatError(where + ": expected 5 columns");
    ResultRow r;
    r.query_id = cells[0];
    r.rank_of_gt = parse_num<std::size_t>(cells[1], where);
    r.top1_location_id = parse_num<LocationId>(cells[2], where);
    r.top1_score = parse_num<double>(cells[3], where);
    r.top1_distance_m = parse_num<double>(cells[4], where);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace rgb2lidar::eval
