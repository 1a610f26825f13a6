#include <cmath>
#include <fstream>
#include <limits>

#include "rgb2lidar/binary_io.hpp"
#include "rgb2lidar/error.hpp"
#include "rgb2lidar/retrieve.hpp"

namespace rgb2lidar::retrieve {
namespace {

constexpr std::string_view kIndexMagic = "XIX1";
constexpr double kUnitTolerance = 1e-5;

}  // namespace

EmbeddingIndex::EmbeddingIndex(EmbeddingMatrix embeddings, std::vector<RowMeta> metadata, embed::SpaceLabel space)
    : embeddings_(std::move(embeddings)), metadata_(std::move(metadata)), space_(space) {
  if (static_cast<std::size_t>(embeddings_.rows()) != metadata_.size()) {
    throw ShapeError("embedding index: " + std::to_string(embeddings_.rows()) + " rows but " +
                     std::to_string(metadata_.size()) + " metadata entries");
  }
  for (Eigen::Index r = 0; r < embeddings_.rows(); ++r) {
    const double n = embeddings_.row(r).cast<double>().norm();
    if (!(std::abs(n - 1.0) <= kUnitTolerance)) {
      throw DataError("embedding index: row " + std::to_string(r) + " is not unit norm (" + std::to_string(n) + ")");
    }
  }
  for (std::size_t i = 0; i < metadata_.size(); ++i) {
    if (!row_of_key_.emplace(metadata_[i].key(), i).second) {
      throw AmbiguityError("embedding index: duplicate key at row " + std::to_string(i));
    }
  }
}

std::size_t EmbeddingIndex::find(const RecordKey& key) const {
  const auto it = row_of_key_.find(key);
  return it == row_of_key_.end() ? metadata_.size() : it->second;
}

EmbeddingIndex build_index(const embed::ProjectionModel& model, std::span<const FeatureRecord> depth_records) {
  embed::validate(model);
  EmbeddingMatrix rows(static_cast<Eigen::Index>(depth_records.size()), model.joint_dim());
  std::vector<RowMeta> meta;
  meta.reserve(depth_records.size());
  for (std::size_t i = 0; i < depth_records.size(); ++i) {
    const auto& r = depth_records[i];
    if (r.modality != Modality::LidarDepth) throw SchemaError("build_index: record " + std::to_string(i) + " is not depth");
    if (r.cue != model.space.depth_cue) {
      throw SchemaError("build_index: record " + std::to_string(i) + " has cue " + std::string(to_string(r.cue)) +
                        " but model " + model.space.name() + " expects " +
                        std::string(to_string(model.space.depth_cue)));
    }
    Eigen::VectorXf e = embed::project(model, r.vector, Modality::LidarDepth);
    const float n = e.norm();
    if (n == 0.0f) throw DegenerateVectorError("build_index: record " + std::to_string(i) + " projects to zero");
    if (!model.normalize_output) e /= n;
    rows.row(static_cast<Eigen::Index>(i)) = e.transpose();
    meta.push_back({r.location_id, r.heading, r.geo});
  }
  return EmbeddingIndex(std::move(rows), std::move(meta), model.space);
}

EmbeddingIndex build_index(const embed::ProjectionModel& model, const FeatureSet& depth_records) {
  if (depth_records.modality != Modality::LidarDepth || depth_records.cue != model.space.depth_cue) {
    throw SchemaError("build_index: feature set channel does not match model " + model.space.name());
  }
  return build_index(model, std::span<const FeatureRecord>(depth_records.records));
}

void save_index(const EmbeddingIndex& index, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write index " + path.string());
  io::BinaryWriter w(out);
  w.magic(kIndexMagic);
  w.u32(static_cast<std::uint32_t>(index.size()));
  w.u32(index.dim());
  w.u8(static_cast<std::uint8_t>(index.space().rgb_cue));
  w.u8(static_cast<std::uint8_t>(index.space().depth_cue));
  w.f32s(std::span<const float>(index.embeddings().data(), static_cast<std::size_t>(index.embeddings().size())));
  for (const auto& m : index.metadata()) {
    w.u64(m.location_id);
    w.u16(m.heading);
    w.f64(m.geo.lat);
    w.f64(m.geo.lon);
    w.f64(m.geo.easting.value_or(std::numeric_limits<double>::quiet_NaN()));
    w.f64(m.geo.northing.value_or(std::numeric_limits<double>::quiet_NaN()));
  }
  if (!out) throw DataError("write failed for " + path.string());
}

EmbeddingIndex load_index(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open index " + path.string());
  io::BinaryReader rd(in, path.string());
  rd.expect_magic(kIndexMagic);
  const std::uint32_t n = rd.u32("N");
  const std::uint32_t j = rd.u32("J");
  if (j == 0) throw FormatError(path.string() + ": zero embedding dimension");
  embed::SpaceLabel space;
  const std::uint8_t rc = rd.u8("rgb cue");
  const std::uint8_t dc = rd.u8("depth cue");
  if (rc > 1 || dc > 1) throw FormatError(path.string() + ": bad space label");
  space.rgb_cue = static_cast<Cue>(rc);
  space.depth_cue = static_cast<Cue>(dc);
  EmbeddingMatrix rows(n, j);
  rd.f32s(std::span<float>(rows.data(), static_cast<std::size_t>(rows.size())), "embeddings");
  std::vector<RowMeta> meta(n);
  for (auto& m : meta) {
    m.location_id = rd.u64("location_id");
    m.heading = rd.u16("heading");
    m.geo.lat = rd.f64("lat");
    m.geo.lon = rd.f64("lon");
    if (const double e = rd.f64("easting"); !std::isnan(e)) m.geo.easting = e;
    if (const double no = rd.f64("northing"); !std::isnan(no)) m.geo.northing = no;
  }
  if (!rd.at_end()) throw FormatError(path.string() + ": trailing bytes");
  return EmbeddingIndex(std::move(rows), std::move(meta), space);
}

}  // namespace rgb2lidar::retrieve
