#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>

#include "rgb2lidar/error.hpp"
#include "rgb2lidar/pairstore.hpp"
#include "rgb2lidar/seed.hpp"

namespace rgb2lidar::pairstore {
namespace {

// Average locations per tiling cell; small enough that whole-cell assignment
// lands within a few points of the requested fractions at 100 locations.
constexpr double kLocationsPerCell = 3.0;

void validate_fractions(const SplitFractions& f) {
  if (!(f.train > 0.0) || !(f.val > 0.0) || !(f.test > 0.0)) {
    throw ParameterError("split fractions must all be positive");
  }
  if (std::abs(f.train + f.val + f.test - 1.0) > 1e-9) {
    throw ParameterError("split fractions must sum to 1");
  }
}

}  // namespace

SplitAssignment assign_splits(const std::vector<LocationSite>& sites, const SplitFractions& fractions,
                              std::uint64_t seed) {
  validate_fractions(fractions);
  std::vector<LocationSite> sorted = sites;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  sorted.erase(std::unique(sorted.begin(), sorted.end(),
                           [](const auto& a, const auto& b) { return a.id == b.id; }),
               sorted.end());
  const std::size_t n = sorted.size();
  if (n < 3) {
    throw InsufficientDataError("spatial split needs at least 3 distinct locations, got " + std::to_string(n));
  }

  const bool all_utm = std::all_of(sorted.begin(), sorted.end(), [](const auto& s) { return s.geo.has_utm(); });
  const GeoPoint reference = sorted.front().geo;
  std::vector<PlanarXY> xy;
  xy.reserve(n);
  for (const auto& s : sorted) {
    GeoPoint g = s.geo;
    if (!all_utm) g.easting = g.northing = std::nullopt;
    xy.push_back(planar_xy(g, reference));
  }

  double min_x = xy[0].x, max_x = xy[0].x, min_y = xy[0].y, max_y = xy[0].y;
  for (const auto& p : xy) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  const auto per_axis = static_cast<std::size_t>(
      std::max(1.0, std::ceil(std::sqrt(static_cast<double>(n) / kLocationsPerCell))));
  const double cell_w = max_x > min_x ? (max_x - min_x) / static_cast<double>(per_axis) : 1.0;
  const double cell_h = max_y > min_y ? (max_y - min_y) / static_cast<double>(per_axis) : 1.0;

  Rng rng(derive_seed(seed, "spatial_split"));
  const double origin_x = min_x - rng.uniform01() * cell_w;
  const double origin_y = min_y - rng.uniform01() * cell_h;
  const std::size_t cells_per_row = per_axis + 1;

  std::map<std::size_t, std::vector<LocationId>> cells;
  for (std::size_t i = 0; i < n; ++i) {
    const auto cx = std::min(cells_per_row - 1,
                             static_cast<std::size_t>(std::floor((xy[i].x - origin_x) / cell_w)));
    const auto cy = std::min(cells_per_row - 1,
                             static_cast<std::size_t>(std::floor((xy[i].y - origin_y) / cell_h)));
    cells[cy * cells_per_row + cx].push_back(sorted[i].id);
  }

  std::vector<const std::vector<LocationId>*> order;
  order.reserve(cells.size());
  for (const auto& [id, members] : cells) order.push_back(&members);
  rng.shuffle(order);

  const std::array<double, 3> target = {fractions.train * static_cast<double>(n),
                                        fractions.val * static_cast<double>(n),
                                        fractions.test * static_cast<double>(n)};
  std::array<double, 3> assigned = {0.0, 0.0, 0.0};
  SplitAssignment out;
  for (const auto* members : order) {
    std::size_t best = 0;
    for (std::size_t s = 1; s < 3; ++s) {
      if (target[s] - assigned[s] > target[best] - assigned[best]) best = s;
    }
    assigned[best] += static_cast<double>(members->size());
    for (LocationId id : *members) out.by_location[id] = static_cast<Split>(best);
  }
  return out;
}

SplitPairs apply_split(const PairSet& pairs, const SplitAssignment& assignment) {
  SplitPairs out;
  for (PairSet* part : {&out.train, &out.val, &out.test}) {
    part->rgb_cue = pairs.rgb_cue;
    part->depth_cue = pairs.depth_cue;
    part->rgb_dim = pairs.rgb_dim;
    part->depth_dim = pairs.depth_dim;
  }
  out.train.split = Split::Train;
  out.val.split = Split::Val;
  out.test.split = Split::Test;
  for (const auto& p : pairs.pairs) {
    const auto it = assignment.by_location.find(p.rgb.location_id);
    if (it == assignment.by_location.end()) {
      throw DataError("location " + std::to_string(p.rgb.location_id) + " has no split assignment");
    }
    switch (it->second) {
      case Split::Train: out.train.pairs.push_back(p); break;
      case Split::Val: out.val.pairs.push_back(p); break;
      case Split::Test: out.test.pairs.push_back(p); break;
    }
  }
  return out;
}

SplitPairs spatial_split(const PairSet& pairs, const SplitFractions& fractions, std::uint64_t seed) {
  return apply_split(pairs, assign_splits(locations_of(pairs), fractions, seed));
}

void write_split_manifest(const SplitAssignment& assignment, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write split manifest " + path.string());
  for (const auto& [id, split] : assignment.by_location) out << id << ',' << to_string(split) << '\n';
}

SplitAssignment read_split_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open split manifest " + path.string());
  SplitAssignment out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    LocationId id = 0;
    const auto [ptr, ec] = std::from_chars(line.data(), line.data() + std::min(comma, line.size()), id);
    if (comma == std::string::npos || ec != std::errc{} || ptr != line.data() + comma) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected location_id,split");
    }
    std::string_view name(line.data() + comma + 1, line.size() - comma - 1);
    if (!name.empty() && name.back() == '\r') name.remove_suffix(1);
    if (!out.by_location.emplace(id, parse_split(name)).second) {
      throw FormatError(path.string() + ": duplicate location " + std::to_string(id));
    }
  }
  return out;
}

}  // namespace rgb2lidar::pairstore
