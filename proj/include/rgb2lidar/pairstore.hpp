#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rgb2lidar/geo.hpp"

namespace rgb2lidar {

enum class Modality : std::uint8_t { Rgb = 0, LidarDepth = 1 };
enum class Cue : std::uint8_t { Appearance = 0, Semantic = 1 };
enum class Split : std::uint8_t { Train = 0, Val = 1, Test = 2 };

std::string_view to_string(Modality m);
std::string_view to_string(Cue c);
std::string_view to_string(Split s);
Split parse_split(std::string_view s);

using LocationId = std::uint64_t;

/// (location, heading) identifies one view; RGB and depth records pair on it.
struct RecordKey {
  LocationId location_id = 0;
  std::uint16_t heading = 0;

  friend auto operator<=>(const RecordKey&, const RecordKey&) = default;
};

struct FeatureRecord {
  LocationId location_id = 0;
  GeoPoint geo;
  std::uint16_t heading = 0;  // degrees, multiple of 30 in [0, 330]
  Modality modality = Modality::Rgb;
  Cue cue = Cue::Appearance;
  std::vector<float> vector;

  RecordKey key() const { return {location_id, heading}; }

  friend bool operator==(const FeatureRecord&, const FeatureRecord&) = default;
};

bool is_valid_heading(int heading_deg) noexcept;

/// Records of one (modality, cue) channel, as stored in one feature file.
struct FeatureSet {
  Modality modality = Modality::Rgb;
  Cue cue = Cue::Appearance;
  std::uint32_t dimension = 0;
  std::vector<FeatureRecord> records;

  friend bool operator==(const FeatureSet&, const FeatureSet&) = default;
};

/// Throws DataError/SchemaError naming the first offending record.
void validate(const FeatureSet& set);

/// Expected channel layout; unset fields are not checked.
struct ChannelSchema {
  std::optional<Modality> modality;
  std::optional<Cue> cue;
  std::optional<std::uint32_t> dimension;
};

struct FeaturePair {
  FeatureRecord rgb;
  FeatureRecord depth;

  RecordKey key() const { return rgb.key(); }

  friend bool operator==(const FeaturePair&, const FeaturePair&) = default;
};

/// Location-and-heading aligned pairs for one (rgb cue, depth cue) combination,
/// sorted by key. `split` is empty until spatial_split runs.
struct PairSet {
  Cue rgb_cue = Cue::Appearance;
  Cue depth_cue = Cue::Appearance;
  std::uint32_t rgb_dim = 0;
  std::uint32_t depth_dim = 0;
  std::optional<Split> split;
  std::vector<FeaturePair> pairs;

  std::size_t size() const noexcept { return pairs.size(); }
  bool empty() const noexcept { return pairs.empty(); }

  friend bool operator==(const PairSet&, const PairSet&) = default;
};

struct SplitFractions {
  double train = 0.7;
  double val = 0.2;
  double test = 0.1;
};

/// Location -> split; a pure function of location geometry, fractions and seed.
struct SplitAssignment {
  std::map<LocationId, Split> by_location;

  friend bool operator==(const SplitAssignment&, const SplitAssignment&) = default;
};

struct SplitPairs {
  PairSet train;
  PairSet val;
  PairSet test;
};

namespace pairstore {

// Binary feature file ("XMF1").
FeatureSet ingest(const std::filesystem::path& path, const ChannelSchema& schema = {});
FeatureSet read_features(std::istream& is, const ChannelSchema& schema = {},
                         const std::string& what = "feature stream");
void save_features(const FeatureSet& set, const std::filesystem::path& path);
void write_features(const FeatureSet& set, std::ostream& os);

/// Intersects the two channels on (location_id, heading). Duplicate keys
/// inside one channel raise AmbiguityError.
PairSet pair(const FeatureSet& rgb, const FeatureSet& depth);

/// Restricts every set to the keys present in all of them, keeping sort order.
void intersect_keys(std::vector<PairSet*> sets);

struct LocationSite {
  LocationId id = 0;
  GeoPoint geo;
};

/// Distinct locations of a pair set, by ascending id.
std::vector<LocationSite> locations_of(const PairSet& pairs);

/// Seeded rectangular tiling of the location bounding box; whole cells go to
/// the split with the largest remaining deficit, visiting cells in a seeded
/// shuffled order. Fewer than 3 distinct locations raise InsufficientDataError.
SplitAssignment assign_splits(const std::vector<LocationSite>& sites, const SplitFractions& fractions,
                              std::uint64_t seed);

SplitPairs apply_split(const PairSet& pairs, const SplitAssignment& assignment);

SplitPairs spatial_split(const PairSet& pairs, const SplitFractions& fractions, std::uint64_t seed);

// Split manifest: text lines `location_id,split`.
void write_split_manifest(const SplitAssignment& assignment, const std::filesystem::path& path);
SplitAssignment read_split_manifest(const std::filesystem::path& path);

// Pair set file ("XPS1").
void save_pairs(const PairSet& pairs, const std::filesystem::path& path);
PairSet load_pairs(const std::filesystem::path& path);

}  // namespace pairstore
}  // namespace rgb2lidar
