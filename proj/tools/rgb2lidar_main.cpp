#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "rgb2lidar/pipeline.hpp"

namespace {

using namespace rgb2lidar;
using pipeline::Pipeline;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitTraining = 4;
constexpr int kExitOther = 1;

int classify(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const DataError*>(&e)) return kExitData;
  if (dynamic_cast<const TrainingError*>(&e)) return kExitTraining;
  return kExitOther;
}

// Innermost error of a nested chain decides the exit code.
int report_error(const std::exception& e) {
  std::cerr << "error: " << e.what() << '\n';
  try {
    std::rethrow_if_nested(e);
  } catch (const std::exception& inner) {
    const int code = classify(inner);
    return code == kExitOther ? classify(e) : code;
  }
  return classify(e);
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void print_report(const eval::MetricReport& r) { std::cout << eval::to_json(r).dump(2) << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-modal RGB to LIDAR depth retrieval pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "INI run config")->required()->check(CLI::ExistingFile);
    sub->add_option("-o,--output-dir", out_dir, "Overrides [run] output_dir");
  };

  std::string space_code = "all";
  std::string manifest_path;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic world and its four feature channels");
  auto* render = app.add_subcommand("render", "Render depth images from the world cloud and apply the no-return filter");
  auto* ingest = app.add_subcommand("ingest", "Read, pair and spatially split the feature channels");
  auto* train = app.add_subcommand("train", "Train joint embedding spaces");
  auto* index = app.add_subcommand("index", "Project the depth records of the val and test splits");
  auto* tune = app.add_subcommand("tune", "Choose fusion weights (published, fixed or validation grid search)");
  auto* query = app.add_subcommand("query", "Rank the test database for every test query");
  auto* evalc = app.add_subcommand("eval", "Compute the metric report from the results CSV");
  auto* ablation = app.add_subcommand("ablation", "Single-space and sub-ensemble rows over the test split");
  auto* baselines = app.add_subcommand("baselines", "Chance and raw-feature cosine baselines");
  auto* run = app.add_subcommand("run", "Every stage in order");
  auto* replay = app.add_subcommand("replay", "Rerun from a manifest and compare the report bytes");
  for (auto* sub : {synth, render, ingest, train, index, tune, query, evalc, ablation, baselines, run}) add_common(sub);
  train->add_option("-s,--space", space_code, "AA, AS, SA, SS or all");
  replay->add_option("-m,--manifest", manifest_path, "manifest.json of the original run")->required()->check(CLI::ExistingFile);
  replay->add_option("-o,--output-dir", out_dir, "Directory for the replayed artifacts")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (replay->parsed()) {
      const auto original = std::filesystem::path(manifest_path).parent_path();
      Pipeline p(pipeline::config_from_manifest(manifest_path, out_dir));
      p.run();
      const std::string a = read_file(original / "report.json");
      const std::string b = read_file(p.out("report.json"));
      if (a.empty() || a != b) {
        std::cerr << "replay: report differs from " << (original / "report.json").string() << '\n';
        return kExitData;
      }
      std::cout << "replay: report identical (sha256 " << pipeline::sha256_hex(p.out("report.json")) << ")\n";
      return kExitOk;
    }

    auto cfg = pipeline::load_config(config_path);
    if (!out_dir.empty()) pipeline::override_path(cfg, "output_dir", out_dir);
    pipeline::validate(cfg);
    Pipeline p(std::move(cfg));

    if (synth->parsed()) p.stage("synth", [&] { p.synth(); });
    if (render->parsed()) p.stage("render", [&] { p.render(); });
    if (ingest->parsed()) p.stage("ingest", [&] { p.ingest(); });
    if (train->parsed()) {
      if (space_code == "all") {
        for (const auto& sp : embed::kFusionSpaces) p.stage("train_" + sp.code(), [&] { p.train(sp); });
      } else {
        embed::SpaceLabel sp;
        try {
          sp = embed::parse_space(space_code);
        } catch (const Error& e) {
          throw ConfigError(e.what());
        }
        p.stage("train_" + sp.code(), [&] { p.train(sp); });
      }
    }
    if (index->parsed()) p.stage("index", [&] { p.index(); });
    if (tune->parsed()) {
      const auto w = p.stage("tune", [&] { return p.tune(); });
      std::cout << "weights " << w.w[0] << ' ' << w.w[1] << ' ' << w.w[2] << ' ' << w.w[3] << '\n';
    }
    if (query->parsed()) p.stage("query", [&] { p.query(); });
    if (evalc->parsed()) print_report(p.stage("eval", [&] { return p.evaluate(); }));
    if (ablation->parsed()) {
      const auto rows = p.stage("ablation", [&] { return p.ablation(); });
      std::cout << eval::format_table(rows);
    }
    if (baselines->parsed()) {
      const auto b = p.stage("baselines", [&] { return p.baselines(); });
      std::cout << eval::format_table(b.rows);
      for (const auto& [name, msg] : b.errors) std::cout << name << ": " << msg << '\n';
    }
    if (run->parsed()) {
      const auto report = p.run();
      std::cout << eval::format_table({{"fusion", report}});
    } else {
      p.finalize();
    }
  } catch (const std::exception& e) {
    return report_error(e);
  }
  return kExitOk;
}
