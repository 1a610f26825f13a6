#include <fstream>

#include "rgb2lidar/binary_io.hpp"
#include "rgb2lidar/embed.hpp"
#include "rgb2lidar/error.hpp"

namespace rgb2lidar::embed {
namespace {

constexpr std::string_view kCheckpointMagic = "XJE1";

void write_row_major(io::BinaryWriter& w, const Eigen::MatrixXf& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) w.f32(m(r, c));
  }
}

void read_row_major(io::BinaryReader& rd, Eigen::MatrixXf& m, const char* field) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rd.f32(field);
  }
}

Cue decode_cue(std::uint8_t v, const std::string& what) {
  if (v > 1) throw FormatError(what + ": bad cue label");
  return static_cast<Cue>(v);
}

}  // namespace

void save_checkpoint(const ProjectionModel& model, const std::filesystem::path& path) {
  validate(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  io::BinaryWriter w(out);
  w.magic(kCheckpointMagic);
  w.u32(model.joint_dim());
  w.u32(model.rgb_dim());
  w.u32(model.depth_dim());
  w.f64(model.margin);
  w.u8(model.normalize_output ? 1 : 0);
  write_row_major(w, model.rgb_weights);
  write_row_major(w, model.depth_weights);
  w.u8(static_cast<std::uint8_t>(model.space.rgb_cue));
  w.u8(static_cast<std::uint8_t>(model.space.depth_cue));
  if (!out) throw DataError("write failed for " + path.string());
}

ProjectionModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  io::BinaryReader rd(in, path.string());
  rd.expect_magic(kCheckpointMagic);
  const std::uint32_t j = rd.u32("J");
  const std::uint32_t i = rd.u32("I");
  const std::uint32_t l = rd.u32("L");
  if (j == 0 || i == 0 || l == 0) throw FormatError(path.string() + ": zero model dimension");
  ProjectionModel m;
  m.margin = rd.f64("margin");
  const std::uint8_t norm = rd.u8("normalize flag");
  if (norm > 1) throw FormatError(path.string() + ": bad normalize flag");
  m.normalize_output = norm == 1;
  m.rgb_weights.resize(j, i);
  m.depth_weights.resize(j, l);
  read_row_major(rd, m.rgb_weights, "W_r");
  read_row_major(rd, m.depth_weights, "W_d");
  m.space.rgb_cue = decode_cue(rd.u8("rgb cue"), rd.what());
  m.space.depth_cue = decode_cue(rd.u8("depth cue"), rd.what());
  if (!rd.at_end()) throw FormatError(path.string() + ": trailing bytes");
  validate(m);
  return m;
}

}  // namespace rgb2lidar::embed
