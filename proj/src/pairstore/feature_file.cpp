#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "rgb2lidar/binary_io.hpp"
#include "rgb2lidar/error.hpp"
#include "rgb2lidar/pairstore.hpp"

namespace rgb2lidar {

std::string_view to_string(Modality m) {
  return m == Modality::Rgb ? "rgb" : "lidar_depth";
}

std::string_view to_string(Cue c) {
  return c == Cue::Appearance ? "appearance" : "semantic";
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw FormatError("unknown split name '" + std::string(s) + "'");
}

bool is_valid_heading(int heading_deg) noexcept {
  return heading_deg >= 0 && heading_deg <= 330 && heading_deg % 30 == 0;
}

namespace {

constexpr std::string_view kFeatureMagic = "XMF1";

std::string record_context(std::size_t index) {
  return "record " + std::to_string(index);
}

void validate_record(const FeatureRecord& r, const FeatureSet& set, std::size_t index) {
  if (r.modality != set.modality || r.cue != set.cue) {
    throw SchemaError(record_context(index) + ": channel differs from its set");
  }
  if (r.vector.size() != set.dimension) {
    throw SchemaError(record_context(index) + ": vector has " + std::to_string(r.vector.size()) +
                      " entries, expected " + std::to_string(set.dimension));
  }
  if (!is_valid_heading(r.heading)) {
    throw DataError(record_context(index) + ": heading " + std::to_string(r.heading) +
                    " is not a multiple of 30 in [0, 330]");
  }
  for (std::size_t j = 0; j < r.vector.size(); ++j) {
    if (!std::isfinite(r.vector[j])) {
      throw DataError(record_context(index) + ": non-finite value at entry " + std::to_string(j));
    }
  }
  try {
    validate(r.geo);
  } catch (const DataError& e) {
    throw DataError(record_context(index) + ": " + e.what());
  }
}

Modality decode_modality(std::uint8_t v, const std::string& what) {
  if (v > 1) throw FormatError(what + ": malformed header, bad modality byte " + std::to_string(v));
  return static_cast<Modality>(v);
}

Cue decode_cue(std::uint8_t v, const std::string& what) {
  if (v > 1) throw FormatError(what + ": malformed header, bad cue byte " + std::to_string(v));
  return static_cast<Cue>(v);
}

double utm_or_nan(const std::optional<double>& v) {
  return v ? *v : std::numeric_limits<double>::quiet_NaN();
}

std::optional<double> nan_to_empty(double v) {
  if (std::isnan(v)) return std::nullopt;
  return v;
}

}  // namespace

void validate(const FeatureSet& set) {
  if (set.dimension == 0) throw SchemaError("feature set has dimension 0");
  for (std::size_t i = 0; i < set.records.size(); ++i) validate_record(set.records[i], set, i);
}

namespace pairstore {

void write_features(const FeatureSet& set, std::ostream& os) {
  validate(set);
  io::BinaryWriter w(os);
  w.magic(kFeatureMagic);
  w.u32(static_cast<std::uint32_t>(set.records.size()));
  w.u32(set.dimension);
  w.u8(static_cast<std::uint8_t>(set.modality));
  w.u8(static_cast<std::uint8_t>(set.cue));
  for (const auto& r : set.records) {
    w.u64(r.location_id);
    w.f64(r.geo.lat);
    w.f64(r.geo.lon);
    w.f64(utm_or_nan(r.geo.easting));
    w.f64(utm_or_nan(r.geo.northing));
    w.u16(r.heading);
    w.f32s(r.vector);
  }
}

FeatureSet read_features(std::istream& is, const ChannelSchema& schema, const std::string& what) {
  io::BinaryReader rd(is, what);
  rd.expect_magic(kFeatureMagic);
  FeatureSet set;
  const std::uint32_t count = rd.u32("header count");
  set.dimension = rd.u32("header dimension");
  set.modality = decode_modality(rd.u8("header modality"), what);
  set.cue = decode_cue(rd.u8("header cue"), what);
  if (set.dimension == 0) throw FormatError(what + ": malformed header, dimension 0");

  if (schema.modality && *schema.modality != set.modality) {
    throw SchemaError(what + ": modality " + std::string(to_string(set.modality)) + ", expected " +
                      std::string(to_string(*schema.modality)));
  }
  if (schema.cue && *schema.cue != set.cue) {
    throw SchemaError(what + ": cue " + std::string(to_string(set.cue)) + ", expected " +
                      std::string(to_string(*schema.cue)));
  }
  if (schema.dimension && *schema.dimension != set.dimension) {
    throw SchemaError(what + ": dimension " + std::to_string(set.dimension) + ", expected " +
                      std::to_string(*schema.dimension));
  }

  set.records.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    FeatureRecord r;
    r.modality = set.modality;
    r.cue = set.cue;
    r.location_id = rd.u64("location_id");
    r.geo.lat = rd.f64("lat");
    r.geo.lon = rd.f64("lon");
    r.geo.easting = nan_to_empty(rd.f64("easting"));
    r.geo.northing = nan_to_empty(rd.f64("northing"));
    r.heading = rd.u16("heading");
    r.vector.resize(set.dimension);
    rd.f32s(r.vector, "vector entries");
    validate_record(r, set, i);
    set.records.push_back(std::move(r));
  }
  if (!rd.at_end()) {
    throw FormatError(what + ": trailing bytes after " + std::to_string(count) + " records");
  }
  return set;
}

FeatureSet ingest(const std::filesystem::path& path, const ChannelSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open feature file " + path.string());
  return read_features(in, schema, path.string());
}

void save_features(const FeatureSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write feature file " + path.string());
  write_features(set, out);
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace pairstore
}  // namespace rgb2lidar
