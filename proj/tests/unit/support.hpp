#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "rgb2lidar/pairstore.hpp"

namespace testing {

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            ("rgb2lidar_" + tag + "_" + std::to_string(stamp) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline rgb2lidar::GeoPoint utm_point(double e, double n) {
  rgb2lidar::GeoPoint g;
  g.lat = 40.0 + n * 1e-6;
  g.lon = -74.0 + e * 1e-6;
  g.easting = e;
  g.northing = n;
  return g;
}

inline rgb2lidar::FeatureRecord make_record(rgb2lidar::LocationId id, std::uint16_t heading,
                                            rgb2lidar::Modality m, rgb2lidar::Cue c,
                                            std::vector<float> v, rgb2lidar::GeoPoint geo = {}) {
  rgb2lidar::FeatureRecord r;
  r.location_id = id;
  r.heading = heading;
  r.modality = m;
  r.cue = c;
  r.vector = std::move(v);
  r.geo = geo;
  return r;
}

inline std::vector<float> random_vector(std::mt19937_64& gen, std::size_t dim) {
  std::normal_distribution<float> d(0.0f, 1.0f);
  std::vector<float> v(dim);
  for (auto& x : v) x = d(gen);
  return v;
}

// FNV-1a over raw bytes, used to compare large payloads bit-for-bit.
inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xCBF29CE484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

// Little-endian byte builder independent of the library's writer.
struct Bytes {
  std::string buf;
  void raw(const char* s, std::size_t n) { buf.append(s, n); }
  template <typename T>
  void le(T v) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    buf.append(reinterpret_cast<const char*>(b), sizeof(T));
  }
};

}  // namespace testing
