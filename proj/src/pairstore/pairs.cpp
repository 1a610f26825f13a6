#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include "rgb2lidar/binary_io.hpp"
#include "rgb2lidar/error.hpp"
#include "rgb2lidar/pairstore.hpp"

namespace rgb2lidar::pairstore {
namespace {

constexpr std::string_view kPairMagic = "XPS1";
constexpr std::uint8_t kNoSplit = 0xFF;

std::string key_string(const RecordKey& k) {
  return std::to_string(k.location_id) + "@" + std::to_string(k.heading);
}

std::map<RecordKey, const FeatureRecord*> index_by_key(const FeatureSet& set) {
  std::map<RecordKey, const FeatureRecord*> out;
  for (const auto& r : set.records) {
    if (!out.emplace(r.key(), &r).second) {
      throw AmbiguityError("duplicate key " + key_string(r.key()) + " in " +
                           std::string(to_string(set.modality)) + "/" + std::string(to_string(set.cue)) +
                           " channel");
    }
  }
  return out;
}

void write_record(io::BinaryWriter& w, const FeatureRecord& r) {
  w.u64(r.location_id);
  w.f64(r.geo.lat);
  w.f64(r.geo.lon);
  w.f64(r.geo.easting.value_or(std::numeric_limits<double>::quiet_NaN()));
  w.f64(r.geo.northing.value_or(std::numeric_limits<double>::quiet_NaN()));
  w.u16(r.heading);
  w.f32s(r.vector);
}

FeatureRecord read_record(io::BinaryReader& rd, Modality m, Cue c, std::uint32_t dim) {
  FeatureRecord r;
  r.modality = m;
  r.cue = c;
  r.location_id = rd.u64("location_id");
  r.geo.lat = rd.f64("lat");
  r.geo.lon = rd.f64("lon");
  const double e = rd.f64("easting");
  const double n = rd.f64("northing");
  if (!std::isnan(e)) r.geo.easting = e;
  if (!std::isnan(n)) r.geo.northing = n;
  r.heading = rd.u16("heading");
  r.vector.resize(dim);
  rd.f32s(r.vector, "vector entries");
  return r;
}

Cue decode_cue(std::uint8_t v, const std::string& what) {
  if (v > 1) throw FormatError(what + ": bad cue byte");
  return static_cast<Cue>(v);
}

}  // namespace

PairSet pair(const FeatureSet& rgb, const FeatureSet& depth) {
  if (rgb.modality != Modality::Rgb) throw SchemaError("pair: first channel is not RGB");
  if (depth.modality != Modality::LidarDepth) throw SchemaError("pair: second channel is not LIDAR depth");
  const auto rgb_by_key = index_by_key(rgb);
  const auto depth_by_key = index_by_key(depth);

  PairSet out;
  out.rgb_cue = rgb.cue;
  out.depth_cue = depth.cue;
  out.rgb_dim = rgb.dimension;
  out.depth_dim = depth.dimension;
  for (const auto& [key, r] : rgb_by_key) {
    const auto it = depth_by_key.find(key);
    if (it == depth_by_key.end()) continue;
    if (r->geo != it->second->geo) {
      throw DataError("pair " + key_string(key) + ": RGB and depth records disagree on geo position");
    }
    out.pairs.push_back({*r, *it->second});
  }
  return out;
}

void intersect_keys(std::vector<PairSet*> sets) {
  if (sets.empty()) return;
  std::set<RecordKey> common;
  for (const auto& p : sets.front()->pairs) common.insert(p.key());
  for (std::size_t s = 1; s < sets.size(); ++s) {
    std::set<RecordKey> here;
    for (const auto& p : sets[s]->pairs) {
      if (common.contains(p.key())) here.insert(p.key());
    }
    common = std::move(here);
  }
  for (PairSet* set : sets) {
    std::erase_if(set->pairs, [&](const FeaturePair& p) { return !common.contains(p.key()); });
  }
}

std::vector<LocationSite> locations_of(const PairSet& pairs) {
  std::map<LocationId, GeoPoint> seen;
  for (const auto& p : pairs.pairs) seen.emplace(p.rgb.location_id, p.rgb.geo);
  std::vector<LocationSite> out;
  out.reserve(seen.size());
  for (const auto& [id, geo] : seen) out.push_back({id, geo});
  return out;
}

void save_pairs(const PairSet& pairs, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write pair file " + path.string());
  io::BinaryWriter w(out);
  w.magic(kPairMagic);
  w.u8(static_cast<std::uint8_t>(pairs.rgb_cue));
  w.u8(static_cast<std::uint8_t>(pairs.depth_cue));
  w.u8(pairs.split ? static_cast<std::uint8_t>(*pairs.split) : kNoSplit);
  w.u32(static_cast<std::uint32_t>(pairs.pairs.size()));
  w.u32(pairs.rgb_dim);
  w.u32(pairs.depth_dim);
  for (const auto& p : pairs.pairs) {
    if (p.rgb.vector.size() != pairs.rgb_dim || p.depth.vector.size() != pairs.depth_dim) {
      throw SchemaError("save_pairs: vector dimension differs from pair set header");
    }
    write_record(w, p.rgb);
    write_record(w, p.depth);
  }
  if (!out) throw DataError("write failed for " + path.string());
}

PairSet load_pairs(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open pair file " + path.string());
  io::BinaryReader rd(in, path.string());
  rd.expect_magic(kPairMagic);
  PairSet out;
  out.rgb_cue = decode_cue(rd.u8("rgb cue"), rd.what());
  out.depth_cue = decode_cue(rd.u8("depth cue"), rd.what());
  const std::uint8_t split = rd.u8("split");
  if (split != kNoSplit) {
    if (split > 2) throw FormatError(rd.what() + ": bad split byte");
    out.split = static_cast<Split>(split);
  }
  const std::uint32_t count = rd.u32("count");
  out.rgb_dim = rd.u32("rgb dimension");
  out.depth_dim = rd.u32("depth dimension");
  out.pairs.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    FeaturePair p;
    p.rgb = read_record(rd, Modality::Rgb, out.rgb_cue, out.rgb_dim);
    p.depth = read_record(rd, Modality::LidarDepth, out.depth_cue, out.depth_dim);
    out.pairs.push_back(std::move(p));
  }
  if (!rd.at_end()) throw FormatError(rd.what() + ": trailing bytes");
  return out;
}

}  // namespace rgb2lidar::pairstore
