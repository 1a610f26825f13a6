#include <algorithm>
#include <fstream>
#include <set>

#include "rgb2lidar/lidar_render.hpp"
#include "rgb2lidar/pipeline.hpp"
#include "rgb2lidar/seed.hpp"

namespace rgb2lidar::pipeline {
namespace {

constexpr std::array<const char*, 4> kChannelFiles = {"A_R", "S_R", "A_L", "S_L"};
// Channel feeding each fusion space's RGB and depth branch.
constexpr std::array<std::pair<std::size_t, std::size_t>, 4> kSpaceChannels = {{{0, 2}, {0, 3}, {1, 2}, {1, 3}}};

std::string split_name(Split s) { return std::string(to_string(s)); }

std::string pairs_file(std::size_t space, Split s) {
  return "pairs/" + embed::kFusionSpaces[space].code() + "_" + split_name(s) + ".xps";
}

std::string index_file(std::size_t space, Split s) {
  return "indexes/" + embed::kFusionSpaces[space].code() + "_" + split_name(s) + ".xix";
}

std::string checkpoint_file(std::size_t space) { return "checkpoints/" + embed::kFusionSpaces[space].code() + ".xje"; }

std::size_t space_slot(const embed::SpaceLabel& space) {
  for (std::size_t k = 0; k < 4; ++k) {
    if (embed::kFusionSpaces[k] == space) return k;
  }
  throw ParameterError("unknown space " + space.name());
}

void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_text(const std::string& text, const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path.string());
  os << text;
}

std::vector<FeatureRecord> depth_records(const PairSet& pairs) {
  std::vector<FeatureRecord> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs.pairs) out.push_back(p.depth);
  return out;
}

nlohmann::json reports_json(const std::vector<std::pair<std::string, eval::MetricReport>>& rows) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& [name, rep] : rows) j.push_back({{"method", name}, {"metrics", eval::to_json(rep)}});
  return j;
}

std::size_t max_k(const RunConfig& cfg) { return *std::max_element(cfg.ks.begin(), cfg.ks.end()); }

}  // namespace

Pipeline::Pipeline(RunConfig cfg) : cfg_(std::move(cfg)), manifest_(cfg_), seeds_(stage_seeds(cfg_)) {
  validate(cfg_);
  std::filesystem::create_directories(cfg_.output_dir);
  manifest_.adopt_history(out("manifest.json"));
}

void Pipeline::save_manifest() { manifest_.save(out("manifest.json")); }

void Pipeline::finalize() {
  manifest_.record_artifacts(cfg_.output_dir);
  save_manifest();
}

void Pipeline::synth() {
  if (cfg_.source != DataSource::Synth) throw ConfigError("the synth stage needs [data] source = synth");
  synth::SynthConfig y = cfg_.synth;
  y.seed = seeds_.at("synth");
  synth::World world = synth::generate_world(y);
  if (cfg_.render.enabled) {
    std::filesystem::create_directories(out("world"));
    render::write_xyz(world.cloud, out("world/cloud.xyz"));
  }
  const auto scene = synth::make_latent_scene(world.locations, y);
  auto sets = synth::generate_features(scene, y);
  if (cfg_.weak_semantic_sigma > 0.0) {
    sets[3] = synth::emulate_weak_semantic(sets[3], cfg_.weak_semantic_sigma, seeds_.at("weak_semantic"));
  }
  std::filesystem::create_directories(out("features"));
  for (std::size_t c = 0; c < 4; ++c) {
    pairstore::save_features(sets[c], out(std::string("features/") + kChannelFiles[c] + ".xmf"));
  }
}

void Pipeline::render() {
  if (!cfg_.render.enabled) return;
  const auto cloud = render::apply_offset(render::read_xyz(out("world/cloud.xyz")), render::kSurveyOffset);
  const auto dem = render::build_dem(cloud, cfg_.render.cell_size);
  std::filesystem::create_directories(out("render"));
  render::save_dem(dem, out("render/dem.xdm"));

  const FeatureSet depth = pairstore::ingest(out("features/A_L.xmf"));
  std::set<RecordKey> wanted;
  for (const auto& r : depth.records) wanted.insert(r.key());
  std::vector<std::pair<LocationId, GeoPoint>> sites;
  for (const auto& r : depth.records) {
    if (sites.empty() || sites.back().first != r.location_id) sites.emplace_back(r.location_id, r.geo);
  }

  std::ofstream csv(out("render/kept.csv"), std::ios::binary);
  if (!csv) throw DataError("cannot write render/kept.csv");
  csv << "location_id,heading,no_return_fraction,kept\n";
  std::size_t previews = 0;
  for (const auto& [id, geo] : sites) {
    for (const auto& pose : render::enumerate_poses(geo)) {
      const RecordKey key{id, static_cast<std::uint16_t>(std::lround(pose.heading_deg))};
      if (!wanted.count(key)) continue;
      render::RenderOptions opts;
      opts.splat = cfg_.render.splat;
      const auto img = render::render(dem, pose, opts);
      const bool kept = render::keep_image(img, cfg_.render.black_threshold);
      csv << id << ',' << key.heading << ',' << img.no_return_fraction() << ',' << (kept ? 1 : 0) << '\n';
      if (previews < cfg_.render.previews) {
        render::write_preview_pgm(img, out("render/preview_" + std::to_string(id) + "_" + std::to_string(key.heading) + ".pgm"));
        ++previews;
      }
    }
  }
  if (!csv) throw DataError("write failed: render/kept.csv");
}

void Pipeline::ingest() {
  std::array<FeatureSet, 4> sets;
  for (std::size_t c = 0; c < 4; ++c) {
    const auto path = cfg_.source == DataSource::Synth ? out(std::string("features/") + kChannelFiles[c] + ".xmf")
                                                       : cfg_.feature_paths[c];
    ChannelSchema schema;
    schema.modality = synth::kChannels[c].modality;
    schema.cue = synth::kChannels[c].cue;
    sets[c] = pairstore::ingest(path, schema);
  }

  std::array<PairSet, 4> spaces;
  for (std::size_t k = 0; k < 4; ++k) {
    spaces[k] = pairstore::pair(sets[kSpaceChannels[k].first], sets[kSpaceChannels[k].second]);
  }

  if (cfg_.render.enabled) {
    std::set<RecordKey> rejected;
    std::ifstream is(out("render/kept.csv"), std::ios::binary);
    if (!is) throw DataError("missing render/kept.csv; run the render stage first");
    std::string line;
    std::getline(is, line);
    while (std::getline(is, line)) {
      unsigned long long id = 0;
      unsigned heading = 0;
      double frac = 0;
      int kept = 1;
      if (std::sscanf(line.c_str(), "%llu,%u,%lf,%d", &id, &heading, &frac, &kept) != 4) {
        throw FormatError("render/kept.csv: bad line '" + line + "'");
      }
      if (!kept) rejected.insert({id, static_cast<std::uint16_t>(heading)});
    }
    for (auto& ps : spaces) {
      std::erase_if(ps.pairs, [&](const FeaturePair& p) { return rejected.count(p.key()) > 0; });
    }
  }

  pairstore::intersect_keys({&spaces[0], &spaces[1], &spaces[2], &spaces[3]});
  if (spaces[0].empty()) throw InsufficientDataError("no (location, heading) is present in all four channels");

  SplitAssignment assignment = cfg_.split_manifest
                                   ? pairstore::read_split_manifest(*cfg_.split_manifest)
                                   : pairstore::assign_splits(pairstore::locations_of(spaces[0]), cfg_.fractions,
                                                              seeds_.at("split"));
  pairstore::write_split_manifest(assignment, out("split.csv"));
  std::filesystem::create_directories(out("pairs"));
  for (std::size_t k = 0; k < 4; ++k) {
    const SplitPairs parts = pairstore::apply_split(spaces[k], assignment);
    if (parts.test.empty()) throw InsufficientDataError("empty test split");
    pairstore::save_pairs(parts.train, out(pairs_file(k, Split::Train)));
    pairstore::save_pairs(parts.val, out(pairs_file(k, Split::Val)));
    pairstore::save_pairs(parts.test, out(pairs_file(k, Split::Test)));
  }
}

void Pipeline::train(const embed::SpaceLabel& space) {
  const std::size_t k = space_slot(space);
  const PairSet train_pairs = pairstore::load_pairs(out(pairs_file(k, Split::Train)));
  const PairSet val_pairs = pairstore::load_pairs(out(pairs_file(k, Split::Val)));
  embed::TrainConfig tc = cfg_.train[k];
  tc.seed = seeds_.at("train_" + space.code());
  const auto result = embed::train(train_pairs, val_pairs, tc);
  std::filesystem::create_directories(out("checkpoints"));
  embed::save_checkpoint(result.model, out(checkpoint_file(k)));
  write_json({{"space", space.name()},
              {"initial_loss", result.initial_loss},
              {"epoch_loss", result.epoch_loss},
              {"val_recall_at_1", result.val_recall_at_1},
              {"best_epoch", result.best_epoch}},
             out("training/" + space.code() + ".json"));
}

void Pipeline::train_all() {
  for (const auto& sp : embed::kFusionSpaces) train(sp);
}

void Pipeline::index() {
  std::filesystem::create_directories(out("indexes"));
  for (std::size_t k = 0; k < 4; ++k) {
    const auto model = embed::load_checkpoint(out(checkpoint_file(k)));
    for (Split s : {Split::Val, Split::Test}) {
      const PairSet pairs = pairstore::load_pairs(out(pairs_file(k, s)));
      if (pairs.empty()) continue;
      const auto records = depth_records(pairs);
      retrieve::save_index(retrieve::build_index(model, records), out(index_file(k, s)));
    }
  }
}

std::array<PairSet, 4> Pipeline::load_split_pairs(Split split) const {
  std::array<PairSet, 4> out_sets;
  for (std::size_t k = 0; k < 4; ++k) out_sets[k] = pairstore::load_pairs(out(pairs_file(k, split)));
  return out_sets;
}

retrieve::FusionConfig Pipeline::load_fusion(Split split) const {
  retrieve::FusionConfig fc;
  for (std::size_t k = 0; k < 4; ++k) {
    fc.spaces.push_back({embed::load_checkpoint(out(checkpoint_file(k))), retrieve::load_index(out(index_file(k, split)))});
  }
  return fc;
}

retrieve::ScoreTable Pipeline::score_split(Split split) const {
  const auto pairs = load_split_pairs(split);
  if (pairs[0].empty()) throw InsufficientDataError("no " + split_name(split) + " queries");
  const auto fc = load_fusion(split);
  std::vector<retrieve::Query> queries;
  queries.reserve(pairs[0].size());
  for (std::size_t i = 0; i < pairs[0].size(); ++i) {
    const auto& app = pairs[0].pairs[i].rgb;
    const auto& sem = pairs[2].pairs[i].rgb;
    if (app.key() != sem.key()) throw AlignmentError("A_R and S_R queries disagree at row " + std::to_string(i));
    queries.push_back({app.key(), app.geo, app.vector, sem.vector});
  }
  return retrieve::score_queries(fc, queries);
}

retrieve::FusionWeights Pipeline::tune() {
  retrieve::FusionWeights w;
  nlohmann::json j;
  switch (cfg_.fusion_mode) {
    case FusionMode::Published:
      w = retrieve::FusionWeights::published();
      j["mode"] = "published";
      break;
    case FusionMode::Fixed:
      w = cfg_.weights;
      j["mode"] = "fixed";
      break;
    case FusionMode::Tune: {
      const auto result = retrieve::tune_weights(score_split(Split::Val), cfg_.grid_step);
      w = result.weights;
      j["mode"] = "tune";
      j["grid_step"] = cfg_.grid_step;
      j["val_recall_at_1"] = result.recall_at_1;
      j["candidates"] = result.candidates;
      break;
    }
  }
  j["weights"] = w.w;
  write_json(j, out("fusion/weights.json"));
  return w;
}

retrieve::FusionWeights Pipeline::load_weights() const {
  const auto j = read_json(out("fusion/weights.json"));
  retrieve::FusionWeights w;
  try {
    w.w = j.at("weights").get<std::array<double, 4>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("fusion/weights.json: ") + e.what());
  }
  retrieve::validate(w);
  return w;
}

void Pipeline::query() {
  const auto results = retrieve::rank_fused(score_split(Split::Test), load_weights(), max_k(cfg_));
  eval::write_results_csv(results, out("results.csv"));
}

eval::MetricReport Pipeline::evaluate() {
  const auto rows = eval::read_results_csv(out("results.csv"));
  const auto report = eval::evaluate_rows(rows, cfg_.ks);
  write_json(eval::to_json(report), out("report.json"));
  write_text(eval::format_table({{"fusion", report}}), out("report.txt"));
  return report;
}

eval::MetricReport Pipeline::run() {
  manifest_.clear_stages();
  if (cfg_.source == DataSource::Synth) stage("synth", [&] { synth(); });
  if (cfg_.render.enabled) stage("render", [&] { render(); });
  stage("ingest", [&] { ingest(); });
  for (const auto& sp : embed::kFusionSpaces) stage("train_" + sp.code(), [&] { train(sp); });
  stage("index", [&] { index(); });
  stage("tune", [&] { tune(); });
  stage("query", [&] { query(); });
  const auto report = stage("eval", [&] { return evaluate(); });
  finalize();
  return report;
}

std::vector<std::pair<std::string, eval::MetricReport>> Pipeline::ablation() {
  const auto table = score_split(Split::Test);
  const auto base = load_weights();
  const auto names = ablation_row_names();
  std::vector<std::pair<std::string, eval::MetricReport>> rows;
  for (std::size_t r = 0; r < names.size(); ++r) {
    const auto results = retrieve::rank_fused(table, ablation_weights(r, base), max_k(cfg_));
    rows.emplace_back(names[r], eval::evaluate(results, cfg_.ks));
  }
  write_json(reports_json(rows), out("ablation.json"));
  write_text(eval::format_table(rows), out("ablation.txt"));
  return rows;
}

Pipeline::BaselineRows Pipeline::baselines() {
  const auto pairs = load_split_pairs(Split::Test);
  if (pairs[0].empty()) throw InsufficientDataError("no test queries");
  retrieve::ScoreTable table;
  for (std::size_t i = 0; i < pairs[0].size(); ++i) {
    const auto& p = pairs[0].pairs[i];
    table.rows.push_back({p.depth.location_id, p.depth.heading, p.depth.geo});
    table.query_keys.push_back(p.key());
    table.query_geos.push_back(p.rgb.geo);
    table.gt_rows.push_back(i);
  }
  const auto nq = static_cast<Eigen::Index>(table.n_queries());
  const auto nr = static_cast<Eigen::Index>(table.n_rows());
  for (auto& m : table.per_space) m = Eigen::MatrixXd::Zero(nq, nr);

  BaselineRows out_rows;
  const auto single = retrieve::FusionWeights::single(0);

  const std::uint64_t chance_seed = seeds_.at("chance");
  for (Eigen::Index q = 0; q < nq; ++q) {
    Rng rng(mix_seed(chance_seed, static_cast<std::uint64_t>(q)));
    for (Eigen::Index r = 0; r < nr; ++r) table.per_space[0](q, r) = rng.uniform01();
  }
  out_rows.rows.emplace_back("Chance", eval::evaluate(retrieve::rank_fused(table, single, max_k(cfg_)), cfg_.ks));

  for (std::size_t k : {std::size_t{0}, std::size_t{3}}) {
    const std::string name = "raw " + embed::kFusionSpaces[k].name();
    const PairSet& ps = pairs[k];
    if (ps.rgb_dim != ps.depth_dim) {
      out_rows.errors.emplace_back(name, "dimension mismatch: rgb " + std::to_string(ps.rgb_dim) + " vs depth " +
                                             std::to_string(ps.depth_dim));
      continue;
    }
    const auto unit = [](const std::vector<float>& v) {
      Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXf>(v.data(), static_cast<Eigen::Index>(v.size())).cast<double>();
      const double n = x.norm();
      if (n == 0.0) throw DegenerateVectorError("raw baseline: zero feature vector");
      return Eigen::VectorXd(x / n);
    };
    Eigen::MatrixXd rgb(nq, ps.rgb_dim), depth(nr, ps.depth_dim);
    for (Eigen::Index q = 0; q < nq; ++q) rgb.row(q) = unit(ps.pairs[static_cast<std::size_t>(q)].rgb.vector);
    for (Eigen::Index r = 0; r < nr; ++r) depth.row(r) = unit(ps.pairs[static_cast<std::size_t>(r)].depth.vector);
    table.per_space[0] = rgb * depth.transpose();
    out_rows.rows.emplace_back(name, eval::evaluate(retrieve::rank_fused(table, single, max_k(cfg_)), cfg_.ks));
  }

  nlohmann::json j = reports_json(out_rows.rows);
  nlohmann::json errors = nlohmann::json::array();
  for (const auto& [name, msg] : out_rows.errors) errors.push_back({{"method", name}, {"error", msg}});
  write_json({{"rows", j}, {"errors", errors}}, out("baselines.json"));
  std::string text = eval::format_table(out_rows.rows);
  for (const auto& [name, msg] : out_rows.errors) text += name + ": " + msg + "\n";
  write_text(text, out("baselines.txt"));
  return out_rows;
}

}  // namespace rgb2lidar::pipeline
