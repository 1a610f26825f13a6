#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "rgb2lidar/pipeline.hpp"

namespace rgb2lidar::pipeline {

std::string sha256_hex(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot hash " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error("sha256 init failed");
  }
  std::vector<char> buf(1 << 16);
  while (is) {
    is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (is.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(is.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

Manifest::Manifest(const RunConfig& cfg) {
  j_["config_text"] = cfg.text;
  j_["config_dir"] = cfg.base_dir.string();
  j_["path_overrides"] = cfg.path_overrides;
  j_["root_seed"] = cfg.seed;
  nlohmann::json seeds = nlohmann::json::object();
  for (const auto& [k, v] : stage_seeds(cfg)) seeds[k] = v;
  j_["seeds"] = seeds;
  j_["stages"] = nlohmann::json::array();
  j_["artifacts"] = nlohmann::json::object();
}

void Manifest::stage_ok(const std::string& stage) {
  j_["stages"].push_back({{"stage", stage}, {"status", "ok"}});
}

void Manifest::stage_failed(const std::string& stage, const std::string& error) {
  j_["stages"].push_back({{"stage", stage}, {"status", "failed"}, {"error", error}});
}

void Manifest::record_artifacts(const std::filesystem::path& root) {
  nlohmann::json a = nlohmann::json::object();
  if (std::filesystem::exists(root)) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
      if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) a[std::filesystem::relative(f, root).generic_string()] = sha256_hex(f);
  }
  j_["artifacts"] = a;
}

void Manifest::adopt_history(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) return;
  const auto old = nlohmann::json::parse(is, nullptr, false);
  if (old.is_discarded() || !old.is_object()) return;
  if (old.value("config_text", std::string()) != j_["config_text"].get<std::string>()) return;
  if (old.value("root_seed", std::uint64_t{0}) != j_["root_seed"].get<std::uint64_t>()) return;
  if (old.contains("stages") && old["stages"].is_array()) j_["stages"] = old["stages"];
  if (old.contains("artifacts") && old["artifacts"].is_object()) j_["artifacts"] = old["artifacts"];
}

void Manifest::clear_stages() { j_["stages"] = nlohmann::json::array(); }

void Manifest::save(const std::filesystem::path& path) const {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path.string());
  os << j_.dump(2) << '\n';
}

RunConfig config_from_manifest(const std::filesystem::path& manifest_path, const std::filesystem::path& output_dir) {
  std::ifstream is(manifest_path, std::ios::binary);
  if (!is) throw ConfigError("cannot read manifest " + manifest_path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("manifest " + manifest_path.string() + ": " + e.what());
  }
  if (!j.contains("config_text") || !j.contains("config_dir")) {
    throw ConfigError("manifest " + manifest_path.string() + " lacks the config");
  }
  RunConfig cfg = parse_config(j["config_text"].get<std::string>(), j["config_dir"].get<std::string>());
  if (j.contains("path_overrides")) {
    for (const auto& [k, v] : j["path_overrides"].items()) {
      if (k != "output_dir") override_path(cfg, k, v.get<std::string>());
    }
  }
  override_path(cfg, "output_dir", output_dir.string());
  validate(cfg);
  return cfg;
}

}  // namespace rgb2lidar::pipeline
