#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rgb2lidar/embed.hpp"
#include "rgb2lidar/error.hpp"
#include "rgb2lidar/eval.hpp"
#include "rgb2lidar/pairstore.hpp"
#include "rgb2lidar/retrieve.hpp"
#include "rgb2lidar/synthgen.hpp"

namespace rgb2lidar::pipeline {

enum class DataSource { Synth, Files };
enum class FusionMode { Published, Tune, Fixed };

struct RenderStageConfig {
  bool enabled = false;
  double cell_size = 1.0;
  double black_threshold = 0.60;
  std::size_t previews = 0;  // PGM previews of the first rendered poses
  render::SplatMode splat = render::SplatMode::Footprint;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "rgb2lidar_out";

  DataSource source = DataSource::Synth;
  /// Input feature files in channel order A_R, S_R, A_L, S_L (Files source).
  std::array<std::filesystem::path, 4> feature_paths;
  std::optional<std::filesystem::path> split_manifest;

  synth::SynthConfig synth;
  /// Extra noise on the depth semantic channel; 0 disables it.
  double weak_semantic_sigma = 0.0;
  RenderStageConfig render;
  SplitFractions fractions;

  /// Per-space training, kFusionSpaces order. Seeds are derived from `seed`.
  std::array<embed::TrainConfig, 4> train;

  FusionMode fusion_mode = FusionMode::Published;
  retrieve::FusionWeights weights;
  double grid_step = 0.01;

  std::vector<std::size_t> ks = {1, 5, 10};

  /// Verbatim config text and the directory relative paths resolve against.
  std::string text;
  std::filesystem::path base_dir;
  std::map<std::string, std::string> path_overrides;
};

/// INI text with sections [run], [data], [synth], [render], [split], [train],
/// [train_AA] .. [train_SS], [fusion], [eval]. Unknown keys raise ConfigError.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});

/// Reads a config file and applies RGB2LIDAR_* environment overrides (paths only).
RunConfig load_config(const std::filesystem::path& path);

/// Applies one path override by key: output_dir, a_r, s_r, a_l, s_l, split_manifest.
void override_path(RunConfig& cfg, const std::string& key, const std::string& value);

/// Ranges, sizes, and pairwise-distinct paths; ConfigError otherwise.
void validate(const RunConfig& cfg);

/// Seeds every stage receives, keyed by stage name.
std::map<std::string, std::uint64_t> stage_seeds(const RunConfig& cfg);

/// Raised (nested around the original error) when a stage fails.
class StageFailure : public Error {
 public:
  StageFailure(std::string stage, const std::string& message)
      : Error("stage " + stage + ": " + message), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

std::string sha256_hex(const std::filesystem::path& path);

/// Run manifest: config, seeds, artifact hashes and stage outcomes.
class Manifest {
 public:
  explicit Manifest(const RunConfig& cfg);

  void stage_ok(const std::string& stage);
  void stage_failed(const std::string& stage, const std::string& error);
  void record_artifacts(const std::filesystem::path& root);
  /// Keeps the stage history of an earlier manifest for the same config.
  void adopt_history(const std::filesystem::path& path);
  void clear_stages();

  const nlohmann::json& json() const noexcept { return j_; }
  void save(const std::filesystem::path& path) const;

 private:
  nlohmann::json j_;
};

/// Rebuilds the RunConfig a manifest was produced from, writing into `output_dir`.
RunConfig config_from_manifest(const std::filesystem::path& manifest_path, const std::filesystem::path& output_dir);

/// File-based stages under cfg.output_dir. Each stage reads the artifacts of
/// the previous ones from disk, so stages can also run one at a time.
class Pipeline {
 public:
  explicit Pipeline(RunConfig cfg);

  const RunConfig& config() const noexcept { return cfg_; }
  std::filesystem::path out(const std::string& rel) const { return cfg_.output_dir / rel; }

  void synth();
  void render();
  void ingest();
  void train(const embed::SpaceLabel& space);
  void train_all();
  void index();
  retrieve::FusionWeights tune();
  void query();
  eval::MetricReport evaluate();

  /// Every stage in order; the manifest is written even when a stage fails.
  eval::MetricReport run();

  /// Table-2-style rows over the four test-split spaces.
  std::vector<std::pair<std::string, eval::MetricReport>> ablation();

  /// Chance and raw-cosine rows, plus errors for rows that cannot be computed.
  struct BaselineRows {
    std::vector<std::pair<std::string, eval::MetricReport>> rows;
    std::vector<std::pair<std::string, std::string>> errors;
  };
  BaselineRows baselines();

  /// Wraps one stage: records success or failure in the manifest and rethrows
  /// failures nested inside a StageFailure.
  template <typename F>
  auto stage(const std::string& name, F&& f) -> decltype(f());

  Manifest& manifest() noexcept { return manifest_; }
  void save_manifest();
  /// Hashes every artifact under the output directory and saves the manifest.
  void finalize();

  // Helpers shared by stages.
  std::array<PairSet, 4> load_split_pairs(Split split) const;
  retrieve::FusionConfig load_fusion(Split split) const;
  retrieve::ScoreTable score_split(Split split) const;
  retrieve::FusionWeights load_weights() const;

 private:
  RunConfig cfg_;
  Manifest manifest_;
  std::map<std::string, std::uint64_t> seeds_;
};

template <typename F>
auto Pipeline::stage(const std::string& name, F&& f) -> decltype(f()) {
  try {
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      manifest_.stage_ok(name);
      save_manifest();
    } else {
      auto result = f();
      manifest_.stage_ok(name);
      save_manifest();
      return result;
    }
  } catch (const StageFailure&) {
    throw;
  } catch (const std::exception& e) {
    manifest_.stage_failed(name, e.what());
    manifest_.record_artifacts(cfg_.output_dir);
    save_manifest();
    std::throw_with_nested(StageFailure(name, e.what()));
  }
}

/// Names of the ablation rows, in table order.
std::vector<std::string> ablation_row_names();

/// Fusion weights for an ablation row: `base` masked to the row's spaces.
retrieve::FusionWeights ablation_weights(std::size_t row, const retrieve::FusionWeights& base);

/// Ranks under i.i.d. uniform scores over `n_rows` with the ground truth at
/// `gt_rows[q]`; deterministic in `seed`.
std::vector<std::size_t> chance_ranks(std::size_t n_rows, std::span<const std::size_t> gt_rows, std::uint64_t seed);

}  // namespace rgb2lidar::pipeline
