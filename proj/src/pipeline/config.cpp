#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "rgb2lidar/pipeline.hpp"
#include "rgb2lidar/seed.hpp"

namespace rgb2lidar::pipeline {
namespace {

namespace pt = boost::property_tree;

constexpr std::array<const char*, 4> kFeatureKeys = {"a_r", "s_r", "a_l", "s_l"};

// Typed reads off a section, remembering which keys were consumed so the
// leftovers can be reported.
class Section {
 public:
  Section(const pt::ptree& tree, std::string name) : tree_(tree), name_(std::move(name)) {}

  bool has(const std::string& key) const { return tree_.find(key) != tree_.not_found(); }

  template <typename T>
  void read(const std::string& key, T& out) {
    used_.insert(key);
    const auto it = tree_.find(key);
    if (it == tree_.not_found()) return;
    out = convert<T>(key, it->second.data());
  }

  std::optional<std::string> raw(const std::string& key) {
    used_.insert(key);
    const auto it = tree_.find(key);
    if (it == tree_.not_found()) return std::nullopt;
    return it->second.data();
  }

  void finish() const {
    for (const auto& [key, child] : tree_) {
      if (!used_.count(key)) throw ConfigError("unknown key [" + name_ + "] " + key);
    }
  }

 private:
  template <typename T>
  T convert(const std::string& key, const std::string& value) const {
    const std::string where = "[" + name_ + "] " + key;
    if constexpr (std::is_same_v<T, std::string>) {
      return value;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (value == "true" || value == "1" || value == "yes") return true;
      if (value == "false" || value == "0" || value == "no") return false;
      throw ConfigError(where + ": expected a boolean, got '" + value + "'");
    } else {
      std::istringstream is(value);
      T v{};
      if constexpr (std::is_unsigned_v<T>) {
        if (!value.empty() && value[0] == '-') throw ConfigError(where + ": must be non-negative");
      }
      is >> v;
      if (!is || !(is >> std::ws).eof()) throw ConfigError(where + ": cannot parse '" + value + "'");
      return v;
    }
  }

  const pt::ptree& tree_;
  std::string name_;
  std::set<std::string> used_;
};

// Lists separate items with commas and/or whitespace.
std::vector<std::string> split_list(const std::string& s) {
  std::string flat = s;
  std::replace(flat.begin(), flat.end(), ',', ' ');
  std::vector<std::string> out;
  std::istringstream ss(flat);
  for (std::string item; ss >> item;) out.push_back(item);
  return out;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

void read_train(Section& s, embed::TrainConfig& t) {
  s.read("joint_dim", t.joint_dim);
  s.read("margin", t.margin);
  s.read("batch_size", t.batch_size);
  s.read("epochs", t.epochs);
  s.read("learning_rate", t.learning_rate);
  if (auto o = s.raw("optimizer")) {
    try {
      t.optimizer = embed::parse_optimizer(*o);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }
  s.read("negatives", t.negatives_per_positive);
  s.read("momentum", t.momentum);
  s.read("beta1", t.beta1);
  s.read("beta2", t.beta2);
  s.read("epsilon", t.epsilon);
  s.read("normalize", t.normalize_output);
}

const pt::ptree& section(const pt::ptree& root, const std::string& name) {
  static const pt::ptree empty;
  const auto it = root.find(name);
  return it == root.not_found() ? empty : it->second;
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  pt::ptree root;
  try {
    std::istringstream is(text);
    pt::read_ini(is, root);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  RunConfig cfg;
  cfg.text = text;
  cfg.base_dir = base_dir;

  std::set<std::string> known = {"run", "data", "synth", "render", "split", "train", "fusion", "eval"};
  for (const auto& sp : embed::kFusionSpaces) known.insert("train_" + sp.code());
  for (const auto& [name, child] : root) {
    if (!known.count(name)) throw ConfigError("unknown config section [" + name + "]");
    if (!child.data().empty() && child.empty()) throw ConfigError("key '" + name + "' must sit inside a section");
  }

  {
    Section s(section(root, "run"), "run");
    s.read("seed", cfg.seed);
    if (auto o = s.raw("output_dir")) cfg.output_dir = resolve(base_dir, *o);
    else cfg.output_dir = resolve(base_dir, cfg.output_dir.string());
    s.finish();
  }
  {
    Section s(section(root, "data"), "data");
    if (auto src = s.raw("source")) {
      if (*src == "synth") cfg.source = DataSource::Synth;
      else if (*src == "files") cfg.source = DataSource::Files;
      else throw ConfigError("[data] source must be synth or files");
    }
    for (std::size_t c = 0; c < 4; ++c) {
      if (auto p = s.raw(kFeatureKeys[c])) cfg.feature_paths[c] = resolve(base_dir, *p);
    }
    if (auto p = s.raw("split_manifest")) cfg.split_manifest = resolve(base_dir, *p);
    s.finish();
  }
  {
    Section s(section(root, "synth"), "synth");
    auto& y = cfg.synth;
    s.read("n_locations", y.n_locations);
    s.read("area_width", y.area_width);
    s.read("area_height", y.area_height);
    s.read("rgb_dim", y.rgb_dim);
    s.read("depth_dim", y.depth_dim);
    s.read("latent_dim", y.latent_dim);
    s.read("heading_count", y.heading_count);
    s.read("min_spacing", y.min_spacing);
    s.read("shared_maps", y.shared_maps);
    double all = -1.0;
    s.read("noise", all);
    if (all >= 0.0) y.channel_noise = {all, all, all, all};
    for (std::size_t c = 0; c < 4; ++c) s.read(std::string("noise_") + kFeatureKeys[c], y.channel_noise[c]);
    s.read("weak_semantic_sigma", cfg.weak_semantic_sigma);
    s.finish();
  }
  {
    Section s(section(root, "render"), "render");
    s.read("enabled", cfg.render.enabled);
    s.read("cell_size", cfg.render.cell_size);
    s.read("black_threshold", cfg.render.black_threshold);
    s.read("previews", cfg.render.previews);
    if (auto m = s.raw("splat")) {
      if (*m == "point") cfg.render.splat = render::SplatMode::Point;
      else if (*m == "footprint") cfg.render.splat = render::SplatMode::Footprint;
      else throw ConfigError("[render] splat must be point or footprint");
    }
    s.finish();
  }
  {
    Section s(section(root, "split"), "split");
    s.read("train", cfg.fractions.train);
    s.read("val", cfg.fractions.val);
    s.read("test", cfg.fractions.test);
    s.finish();
  }
  {
    Section s(section(root, "train"), "train");
    embed::TrainConfig base;
    read_train(s, base);
    s.finish();
    for (std::size_t k = 0; k < 4; ++k) {
      cfg.train[k] = base;
      const std::string name = "train_" + embed::kFusionSpaces[k].code();
      Section o(section(root, name), name);
      read_train(o, cfg.train[k]);
      o.finish();
    }
  }
  {
    Section s(section(root, "fusion"), "fusion");
    if (auto w = s.raw("weights")) {
      if (*w == "published") {
        cfg.fusion_mode = FusionMode::Published;
      } else if (*w == "tune") {
        cfg.fusion_mode = FusionMode::Tune;
      } else {
        const auto parts = split_list(*w);
        if (parts.size() != 4) throw ConfigError("[fusion] weights must be published, tune or four numbers");
        cfg.fusion_mode = FusionMode::Fixed;
        for (std::size_t k = 0; k < 4; ++k) {
          try {
            std::size_t used = 0;
            cfg.weights.w[k] = std::stod(parts[k], &used);
            if (used != parts[k].size()) throw std::invalid_argument("trailing");
          } catch (const std::exception&) {
            throw ConfigError("[fusion] bad weight '" + parts[k] + "'");
          }
        }
      }
    }
    s.read("grid_step", cfg.grid_step);
    s.finish();
  }
  {
    Section s(section(root, "eval"), "eval");
    if (auto ks = s.raw("ks")) {
      cfg.ks.clear();
      for (const auto& k : split_list(*ks)) {
        try {
          std::size_t used = 0;
          const long v = std::stol(k, &used);
          if (used != k.size() || v < 1) throw std::invalid_argument("bad");
          cfg.ks.push_back(static_cast<std::size_t>(v));
        } catch (const std::exception&) {
          throw ConfigError("[eval] bad K '" + k + "'");
        }
      }
    }
    s.finish();
  }
  validate(cfg);
  return cfg;
}

void override_path(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "output_dir") {
    cfg.output_dir = value;
  } else if (key == "split_manifest") {
    cfg.split_manifest = std::filesystem::path(value);
  } else {
    bool found = false;
    for (std::size_t c = 0; c < 4; ++c) {
      if (key == kFeatureKeys[c]) {
        cfg.feature_paths[c] = value;
        found = true;
      }
    }
    if (!found) throw ConfigError("unknown path override '" + key + "'");
  }
  cfg.path_overrides[key] = value;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  RunConfig cfg = parse_config(ss.str(), std::filesystem::absolute(path).parent_path());
  const std::pair<const char*, const char*> env[] = {{"RGB2LIDAR_OUTPUT_DIR", "output_dir"},
                                                     {"RGB2LIDAR_A_R", "a_r"},
                                                     {"RGB2LIDAR_S_R", "s_r"},
                                                     {"RGB2LIDAR_A_L", "a_l"},
                                                     {"RGB2LIDAR_S_L", "s_l"},
                                                     {"RGB2LIDAR_SPLIT_MANIFEST", "split_manifest"}};
  for (const auto& [var, key] : env) {
    if (const char* v = std::getenv(var); v && *v) override_path(cfg, key, v);
  }
  validate(cfg);
  return cfg;
}

void validate(const RunConfig& cfg) {
  try {
    synth::validate(cfg.synth);
    for (const auto& t : cfg.train) embed::validate(t);
    if (cfg.fusion_mode == FusionMode::Fixed) retrieve::validate(cfg.weights);
    if (cfg.fusion_mode == FusionMode::Tune) (void)retrieve::simplex_grid(cfg.grid_step);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  const double fsum = cfg.fractions.train + cfg.fractions.val + cfg.fractions.test;
  if (cfg.fractions.train <= 0 || cfg.fractions.val <= 0 || cfg.fractions.test <= 0 || std::abs(fsum - 1.0) > 1e-9) {
    throw ConfigError("[split] fractions must be positive and sum to 1");
  }
  if (!(cfg.weak_semantic_sigma >= 0.0)) throw ConfigError("[synth] weak_semantic_sigma must be >= 0");
  if (!(cfg.render.cell_size > 0.0)) throw ConfigError("[render] cell_size must be > 0");
  if (!(cfg.render.black_threshold >= 0.0 && cfg.render.black_threshold <= 1.0)) {
    throw ConfigError("[render] black_threshold must lie in [0, 1]");
  }
  if (cfg.ks.empty()) throw ConfigError("[eval] ks must not be empty");
  if (cfg.output_dir.empty()) throw ConfigError("[run] output_dir must not be empty");
  if (cfg.source == DataSource::Files) {
    for (std::size_t c = 0; c < 4; ++c) {
      if (cfg.feature_paths[c].empty()) throw ConfigError(std::string("[data] ") + kFeatureKeys[c] + " is required");
    }
    if (cfg.render.enabled) throw ConfigError("[render] needs the synth source");
  }

  std::vector<std::pair<std::string, std::filesystem::path>> paths = {{"output_dir", cfg.output_dir}};
  if (cfg.source == DataSource::Files) {
    for (std::size_t c = 0; c < 4; ++c) paths.emplace_back(kFeatureKeys[c], cfg.feature_paths[c]);
  }
  if (cfg.split_manifest) paths.emplace_back("split_manifest", *cfg.split_manifest);
  for (std::size_t i = 0; i < paths.size(); ++i) {
    for (std::size_t j = i + 1; j < paths.size(); ++j) {
      if (std::filesystem::weakly_canonical(paths[i].second) == std::filesystem::weakly_canonical(paths[j].second)) {
        throw ConfigError("paths " + paths[i].first + " and " + paths[j].first + " must differ");
      }
    }
  }
}

std::map<std::string, std::uint64_t> stage_seeds(const RunConfig& cfg) {
  std::map<std::string, std::uint64_t> s;
  for (const char* name : {"synth", "weak_semantic", "split", "chance"}) s[name] = derive_seed(cfg.seed, name);
  for (const auto& sp : embed::kFusionSpaces) s["train_" + sp.code()] = derive_seed(cfg.seed, "train_" + sp.code());
  return s;
}

}  // namespace rgb2lidar::pipeline
