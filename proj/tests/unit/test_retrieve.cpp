#include <algorithm>
#include <chrono>
#include <numeric>
#include <random>

#include "doctest.h"
#include "rgb2lidar/error.hpp"
#include "rgb2lidar/retrieve.hpp"
#include "support.hpp"

using namespace rgb2lidar;
using namespace rgb2lidar::retrieve;
using embed::kFusionSpaces;

namespace {

FeatureSet random_depth(std::mt19937_64& gen, std::size_t n, std::uint32_t dim, Cue cue = Cue::Appearance) {
  FeatureSet fs;
  fs.modality = Modality::LidarDepth;
  fs.cue = cue;
  fs.dimension = dim;
  for (std::size_t i = 0; i < n; ++i) {
    fs.records.push_back(testing::make_record(i / 12 + 1, static_cast<std::uint16_t>(30 * (i % 12)),
                                              Modality::LidarDepth, cue, testing::random_vector(gen, dim),
                                              testing::utm_point(double(i), 0.0)));
  }
  return fs;
}

// Reference ordering: descending score, ties to the lower row.
std::vector<std::size_t> naive_order(const std::vector<double>& s) {
  std::vector<std::size_t> idx(s.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b] || (s[a] == s[b] && a < b); });
  return idx;
}

// A table with hand-set per-space scores; gt of query q is row q.
ScoreTable table_of(std::array<Eigen::MatrixXd, 4> s) {
  ScoreTable t;
  const auto q = static_cast<std::size_t>(s[0].rows()), n = static_cast<std::size_t>(s[0].cols());
  t.per_space = std::move(s);
  for (std::size_t i = 0; i < q; ++i) {
    t.gt_rows.push_back(i);
    t.query_keys.push_back({i + 1, 0});
    t.query_geos.push_back(testing::utm_point(double(i), 0));
  }
  for (std::size_t r = 0; r < n; ++r) t.rows.push_back({r + 1, 0, testing::utm_point(double(r), 0)});
  return t;
}

struct Fixture {
  std::vector<FeatureSet> rgb;    // A_R, S_R
  std::vector<FeatureSet> depth;  // A_L, S_L
  FusionConfig cfg;
  std::vector<Query> queries;
};

Fixture make_fixture(std::size_t n, std::uint64_t seed, bool identical_spaces = false) {
  std::mt19937_64 gen(seed);
  Fixture f;
  const std::uint32_t dim = 8;
  for (Cue c : {Cue::Appearance, Cue::Semantic}) {
    auto d = random_depth(gen, n, dim, c);
    FeatureSet r = d;
    r.modality = Modality::Rgb;
    for (auto& rec : r.records) {
      rec.modality = Modality::Rgb;
      for (auto& x : rec.vector) x += 0.3f * std::normal_distribution<float>()(gen);
    }
    f.rgb.push_back(r);
    f.depth.push_back(d);
  }
  if (identical_spaces) {
    f.rgb[1].records = f.rgb[0].records;
    f.depth[1].records = f.depth[0].records;
    for (auto& r : f.rgb[1].records) r.cue = Cue::Semantic;
    for (auto& r : f.depth[1].records) r.cue = Cue::Semantic;
  }
  const auto shared = embed::init_model({}, 6, dim, dim, 0.2, seed);
  for (std::size_t s = 0; s < 4; ++s) {
    auto m = identical_spaces ? shared : embed::init_model(kFusionSpaces[s], 6, dim, dim, 0.2, seed + s);
    m.space = kFusionSpaces[s];
    const auto& d = f.depth[kFusionSpaces[s].depth_cue == Cue::Appearance ? 0 : 1];
    auto idx = build_index(m, d);
    f.cfg.spaces.push_back({m, std::move(idx)});
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = f.rgb[0].records[i];
    f.queries.push_back({a.key(), a.geo, a.vector, f.rgb[1].records[i].vector});
  }
  return f;
}

}  // namespace

TEST_CASE("one record gives a one-row unit index") {
  std::mt19937_64 gen(1);
  const auto m = embed::init_model({}, 4, 5, 5, 0.2, 1);
  const auto idx = build_index(m, random_depth(gen, 1, 5));
  REQUIRE(idx.size() == 1);
  CHECK(idx.dim() == 4);
  CHECK(idx.embeddings().row(0).norm() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(idx.find({1, 0}) == 0);
  CHECK(idx.find({1, 30}) == 1);
}

TEST_CASE("index rows equal independent re-projections") {
  std::mt19937_64 gen(2);
  const auto m = embed::init_model({}, 12, 16, 16, 0.2, 5);
  const auto fs = random_depth(gen, 10000, 16);
  const auto idx = build_index(m, fs);
  REQUIRE(idx.size() == 10000);
  double worst = 0.0;
  for (std::size_t i = 0; i < fs.records.size(); ++i) {
    Eigen::VectorXd p = Eigen::VectorXd::Zero(12);
    for (int j = 0; j < 12; ++j)
      for (int k = 0; k < 16; ++k) p(j) += double(m.depth_weights(j, k)) * double(fs.records[i].vector[k]);
    p.normalize();
    for (int j = 0; j < 12; ++j) worst = std::max(worst, std::abs(double(idx.embeddings()(i, j)) - p(j)));
    CHECK(idx.metadata()[i].location_id == fs.records[i].location_id);
  }
  CHECK(worst <= 1e-6);
  CHECK(build_index(m, fs) == idx);
}

TEST_CASE("index build rejects the wrong channel") {
  std::mt19937_64 gen(3);
  const auto m = embed::init_model({Cue::Appearance, Cue::Semantic}, 4, 5, 5, 0.2, 1);
  CHECK_THROWS_AS(build_index(m, random_depth(gen, 3, 5, Cue::Appearance)), SchemaError);
  auto rgb = random_depth(gen, 3, 5, Cue::Semantic);
  rgb.modality = Modality::Rgb;
  for (auto& r : rgb.records) r.modality = Modality::Rgb;
  CHECK_THROWS_AS(build_index(m, rgb), SchemaError);
  CHECK_NOTHROW(build_index(m, random_depth(gen, 3, 5, Cue::Semantic)));
}

TEST_CASE("top_k tie rule and rank") {
  const std::vector<double> s = {0.9, 0.9, 0.1};
  const auto top = top_k(s, 3);
  REQUIRE(top.size() == 3);
  CHECK(top[0].row == 0);
  CHECK(top[1].row == 1);
  CHECK(top[2].row == 2);
  CHECK(rank_of(s, 1) == 2);
  CHECK(rank_of(s, 2) == 3);
  const std::vector<double> t = {0.1, 0.5, 0.5, 0.7};
  CHECK(rank_of(t, 2) == 3);
  CHECK(top_k(t, 2) == std::vector<ScoredRow>{{3, 0.7}, {1, 0.5}});
}

TEST_CASE("a row's own embedding retrieves it") {
  std::mt19937_64 gen(4);
  embed::ProjectionModel m;
  m.rgb_weights = Eigen::MatrixXf::Identity(6, 6);
  m.depth_weights = Eigen::MatrixXf::Identity(6, 6);
  const auto fs = random_depth(gen, 20, 6);
  const auto idx = build_index(m, fs);
  const auto res = query_single(idx, m, fs.records[7].vector, 5);
  CHECK_FALSE(res.clamped);
  REQUIRE(res.top.size() == 5);
  CHECK(res.top[0].row == 7);
  CHECK(res.top[0].score == doctest::Approx(1.0).epsilon(1e-6));
  for (std::size_t i = 1; i < res.top.size(); ++i) CHECK(res.top[i - 1].score >= res.top[i].score);

  const auto all = query_single(idx, m, fs.records[7].vector, 50);
  CHECK(all.clamped);
  CHECK(all.top.size() == 20);
}

TEST_CASE("indexed ranking equals a brute-force oracle") {
  std::mt19937_64 gen(5);
  const auto m = embed::init_model({}, 10, 12, 12, 0.2, 7);
  auto fs = random_depth(gen, 5000, 12);
  // Duplicate vectors force exact ties.
  for (std::size_t i = 0; i < 200; ++i) fs.records[4999 - i].vector = fs.records[i].vector;
  const auto idx = build_index(m, fs);
  for (int q = 0; q < 20; ++q) {
    const auto f = testing::random_vector(gen, 12);
    const auto res = query_single(idx, m, f, 5000);
    const auto e = embed::project(m, f, Modality::Rgb);
    std::vector<double> s(5000);
    for (std::size_t r = 0; r < 5000; ++r) {
      double acc = 0.0;
      for (int j = 0; j < 10; ++j) acc += double(idx.embeddings()(r, j)) * double(e(j));
      s[r] = acc;
    }
    const auto ref = naive_order(s);
    bool same = true;
    for (std::size_t i = 0; i < ref.size(); ++i) same = same && res.top[i].row == ref[i];
    CHECK(same);
  }
}

TEST_CASE("index file round trip") {
  testing::TempDir dir("xix");
  std::mt19937_64 gen(6);
  const auto m = embed::init_model({Cue::Semantic, Cue::Appearance}, 5, 7, 7, 0.2, 2);
  const auto idx = build_index(m, random_depth(gen, 30, 7));
  save_index(idx, dir / "i.xix");
  CHECK(load_index(dir / "i.xix") == idx);
  std::filesystem::resize_file(dir / "i.xix", std::filesystem::file_size(dir / "i.xix") - 3);
  CHECK_THROWS_AS(load_index(dir / "i.xix"), FormatError);
}

TEST_CASE("index rejects rows that are not unit norm") {
  EmbeddingMatrix e(2, 2);
  e << 1, 0, 0.5, 0.5;
  CHECK_THROWS_AS(EmbeddingIndex(e, {{1, 0, {}}, {2, 0, {}}}, {}), DataError);
  e << 1, 0, 0, 1;
  CHECK_THROWS_AS(EmbeddingIndex(e, {{1, 0, {}}, {1, 0, {}}}, {}), AmbiguityError);
  CHECK_THROWS_AS(EmbeddingIndex(e, {{1, 0, {}}}, {}), ShapeError);
}

TEST_CASE("degenerate fusion equals the single space") {
  const auto f = make_fixture(60, 7);
  const auto table = score_queries(f.cfg, f.queries);
  for (std::size_t s = 0; s < 4; ++s) {
    const auto fused = rank_fused(table, FusionWeights::single(s), 60);
    const auto& sp = f.cfg.spaces[s];
    for (std::size_t q = 0; q < f.queries.size(); ++q) {
      const auto rgb = sp.model.space.rgb_cue == Cue::Appearance ? f.queries[q].appearance : f.queries[q].semantic;
      const auto single = query_single(sp.index, sp.model, rgb, 60);
      CHECK(fused[q].candidates == single.top);
    }
  }
}

TEST_CASE("fuse agrees with the score table path") {
  auto f = make_fixture(36, 8);
  f.cfg.weights = FusionWeights::published();
  const auto table = score_queries(f.cfg, f.queries);
  const auto batch = rank_fused(table, f.cfg.weights, 10);
  for (std::size_t q = 0; q < f.queries.size(); ++q) {
    const auto one = fuse(f.cfg, f.queries[q], 10);
    CHECK(one.candidates == batch[q].candidates);
    CHECK(one.rank_of_gt == batch[q].rank_of_gt);
    CHECK(one.query_id == batch[q].query_id);
    CHECK(one.top1_distance_m == batch[q].top1_distance_m);
    // Linear functional of the four per-space scores.
    const auto& c = one.candidates[0];
    double expect = 0.0;
    for (std::size_t s = 0; s < 4; ++s) expect += f.cfg.weights.w[s] * table.per_space[s](q, c.row);
    CHECK(c.score == doctest::Approx(expect).epsilon(1e-12));
  }
  CHECK(batch[0].query_id == "1-0");
}

TEST_CASE("identical spaces make fusion weights irrelevant") {
  const auto f = make_fixture(48, 9, true);
  const auto table = score_queries(f.cfg, f.queries);
  const auto ref = rank_fused(table, FusionWeights::single(0), 48);
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int t = 0; t < 5; ++t) {
    FusionWeights w;
    for (auto& x : w.w) x = u(gen);
    const auto got = rank_fused(table, w, 48);
    for (std::size_t q = 0; q < got.size(); ++q) {
      std::vector<std::size_t> a, b;
      for (const auto& c : got[q].candidates) a.push_back(c.row);
      for (const auto& c : ref[q].candidates) b.push_back(c.row);
      CHECK(a == b);
    }
  }
  const auto tuned = tune_weights(table, 0.25);
  CHECK(tuned.weights.w == std::array<double, 4>{0, 0, 0, 1});
}

TEST_CASE("positive rescaling leaves ranks unchanged") {
  const auto f = make_fixture(120, 10);
  const auto table = score_queries(f.cfg, f.queries);
  const FusionWeights w = FusionWeights::published();
  const auto base = rank_fused(table, w, 120);
  for (double c : {1e-3, 0.37, 3.0, 250.0}) {
    FusionWeights scaled = w;
    for (auto& x : scaled.w) x *= c;
    const auto got = rank_fused(table, scaled, 120);
    for (std::size_t q = 0; q < got.size(); ++q) {
      CHECK(got[q].rank_of_gt == base[q].rank_of_gt);
      CHECK(got[q].candidates.front().row == base[q].candidates.front().row);
    }
  }
}

TEST_CASE("fusion config validation") {
  auto f = make_fixture(24, 11);
  CHECK_NOTHROW(validate(f.cfg));
  auto c = f.cfg;
  c.spaces.pop_back();
  CHECK_THROWS_AS(validate(c), ParameterError);
  c = f.cfg;
  std::swap(c.spaces[1], c.spaces[2]);
  CHECK_THROWS_AS(validate(c), SchemaError);
  c = f.cfg;
  c.weights.w = {0, 0, 0, 0};
  CHECK_THROWS_AS(validate(c), ParameterError);
  c.weights.w = {1, -0.1, 0, 0};
  CHECK_THROWS_AS(validate(c), ParameterError);

  // Index over a different row set.
  std::mt19937_64 gen(1);
  c = f.cfg;
  auto d = random_depth(gen, 24, 8, Cue::Semantic);
  std::reverse(d.records.begin(), d.records.end());
  c.spaces[3].index = build_index(c.spaces[3].model, d);
  CHECK_THROWS_AS(validate(c), AlignmentError);
  CHECK_THROWS_AS(score_queries(c, f.queries), AlignmentError);
}

TEST_CASE("simplex grid") {
  const auto g = simplex_grid(0.5);
  REQUIRE(g.size() == 10);
  CHECK(g.front().w == std::array<double, 4>{0, 0, 0, 1});
  CHECK(g.back().w == std::array<double, 4>{1, 0, 0, 0});
  for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i - 1].w < g[i].w);
  for (const auto& w : g) CHECK(w.w[0] + w.w[1] + w.w[2] + w.w[3] == doctest::Approx(1.0));
  CHECK(simplex_grid(0.1).size() == 286);
  CHECK(simplex_grid(1.0).size() == 4);
  CHECK(simplex_grid(0.01).size() == 176851);
  CHECK_THROWS_AS(simplex_grid(0.3), ParameterError);
  CHECK_THROWS_AS(simplex_grid(0.0), ParameterError);
}

TEST_CASE("tuning finds the informative space") {
  for (std::size_t informative : {0u, 2u, 3u}) {
    std::mt19937_64 gen(12 + informative);
    std::uniform_real_distribution<double> noise(-1.0, 1.0), low(-1.0, 0.6);
    const int q = 200, n = 200;
    std::array<Eigen::MatrixXd, 4> s;
    for (std::size_t k = 0; k < 4; ++k) {
      s[k].resize(q, n);
      for (int i = 0; i < q; ++i)
        for (int j = 0; j < n; ++j) s[k](i, j) = k == informative ? (i == j ? 1.0 : low(gen)) : noise(gen);
    }
    const auto table = table_of(s);
    const auto res = tune_weights(table, 0.1);
    CHECK(res.weights.w[informative] >= 0.8 - 1e-9);
    CHECK(res.recall_at_1 == doctest::Approx(100.0));
    CHECK(res.candidates == 286);
  }
}

TEST_CASE("tuning picks the lexicographic minimum among ties") {
  // Space AS and SA are perfect, the others are noise.
  std::mt19937_64 gen(13);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::array<Eigen::MatrixXd, 4> s;
  for (std::size_t k = 0; k < 4; ++k) {
    s[k].resize(30, 30);
    for (int i = 0; i < 30; ++i)
      for (int j = 0; j < 30; ++j) s[k](i, j) = (k == 1 || k == 2) ? (i == j ? 1.0 : -1.0) : u(gen);
  }
  // (0, 0, 0.5, 0.5) already wins every query: the perfect space's margin of
  // 0.5 * 2 exceeds any noise difference 0.5 * |u - u'| < 1.
  const auto res = tune_weights(table_of(s), 0.5);
  CHECK(res.weights.w == std::array<double, 4>{0, 0, 0.5, 0.5});
  CHECK(res.recall_at_1 == 100.0);
  CHECK(res.candidates == 10);
  CHECK_THROWS_AS(tune_weights(ScoreTable{}, 0.5), ParameterError);
}

TEST_CASE("table ranking honours ties") {
  Eigen::MatrixXd a(1, 3);
  a << 0.9, 0.9, 0.1;
  const Eigen::MatrixXd z = Eigen::MatrixXd::Zero(1, 3);
  auto t = table_of({a, z, z, z});
  t.gt_rows = {1};
  const auto r = rank_fused(t, FusionWeights::single(0), 3);
  CHECK(r[0].rank_of_gt == 2);
  CHECK(r[0].top1_location_id == 1);
  CHECK(r[0].candidates[1].row == 1);
  // Tuning sees the tie against the earlier row as a miss.
  CHECK(tune_weights(t, 1.0).recall_at_1 == 0.0);
  t.gt_rows = {0};
  CHECK(tune_weights(t, 1.0).recall_at_1 == 100.0);
}

TEST_CASE("single query over 50k x 1024 stays interactive") {
  std::mt19937_64 gen(14);
  const std::size_t n = 50000, j = 1024;
  EmbeddingMatrix e(n, j);
  std::normal_distribution<float> nd;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < j; ++c) e(r, c) = nd(gen);
    e.row(r).normalize();
  }
  std::vector<RowMeta> meta(n);
  for (std::size_t r = 0; r < n; ++r) meta[r] = {r / 12 + 1, static_cast<std::uint16_t>(30 * (r % 12)), {}};
  const EmbeddingIndex idx(std::move(e), std::move(meta), {});
  std::vector<float> q(j);
  for (auto& x : q) x = nd(gen);
  Eigen::Map<Eigen::VectorXf>(q.data(), j).normalize();
  double best = 1e9;
  for (int rep = 0; rep < 3; ++rep) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto s = score_all(idx, q);
    const auto top = top_k(s, 10);
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    CHECK(top.size() == 10);
  }
  MESSAGE("50k x 1024 query: " << best << " ms");
  CHECK(best < 100.0);
}
