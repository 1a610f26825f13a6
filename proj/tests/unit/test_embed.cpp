#include <cmath>
#include <fstream>
#include <cstring>
#include <random>
#include <set>

#include "doctest.h"
#include "gradcheck.hpp"
#include "rgb2lidar/error.hpp"
#include "rgb2lidar/embed.hpp"
#include "rgb2lidar/seed.hpp"
#include "support.hpp"
#include "synth_support.hpp"

using namespace rgb2lidar;
using namespace rgb2lidar::embed;

namespace {

ProjectionModel identity_model(int n, float scale = 1.0f) {
  ProjectionModel m;
  m.rgb_weights = Eigen::MatrixXf::Identity(n, n) * scale;
  m.depth_weights = Eigen::MatrixXf::Identity(n, n);
  return m;
}

synth::SynthConfig small_synth(std::uint64_t seed, std::size_t n = 40) {
  synth::SynthConfig c;
  c.n_locations = n;
  c.area_width = c.area_height = 200.0;
  c.rgb_dim = c.depth_dim = 16;
  c.latent_dim = 8;
  c.seed = seed;
  return c;
}

TrainConfig small_train(std::uint64_t seed) {
  TrainConfig t;
  t.joint_dim = 16;
  t.batch_size = 16;
  t.negatives_per_positive = 15;
  t.epochs = 5;
  t.learning_rate = 1e-2;
  t.seed = seed;
  return t;
}

}  // namespace

TEST_CASE("project examples") {
  const std::vector<float> e1 = {1, 0, 0};
  auto v = project(identity_model(3), e1, Modality::Rgb);
  CHECK(v(0) == 1.0f);
  CHECK(v(1) == 0.0f);
  v = project(identity_model(3, 3.0f), e1, Modality::Rgb);
  CHECK(v(0) == doctest::Approx(1.0));
  CHECK(v.norm() == doctest::Approx(1.0));

  auto m = identity_model(3, 3.0f);
  m.normalize_output = false;
  CHECK(project(m, e1, Modality::Rgb)(0) == 3.0f);
  CHECK_THROWS_AS(project(m, std::vector<float>{1, 0}, Modality::Rgb), ShapeError);
}

TEST_CASE("project matches a triple-loop matmul") {
  auto m = init_model({}, 7, 11, 5, 0.2, 42);
  m.normalize_output = false;
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto f = testing::random_vector(gen, 11);
    const auto out = project(m, f, Modality::Rgb);
    for (int j = 0; j < 7; ++j) {
      double acc = 0.0;
      double mag = 0.0;
      for (int i = 0; i < 11; ++i) {
        acc += double(m.rgb_weights(j, i)) * double(f[i]);
        mag += std::abs(double(m.rgb_weights(j, i)) * double(f[i]));
      }
      // Relative to the magnitude of the summands, the conditioning of a dot product.
      CHECK(std::abs(out(j) - acc) <= 1e-6 * mag);
    }
    const auto g = testing::random_vector(gen, 5);
    const auto outd = project(m, g, Modality::LidarDepth);
    for (int j = 0; j < 7; ++j) {
      double acc = 0.0;
      double mag = 0.0;
      for (int i = 0; i < 5; ++i) {
        acc += double(m.depth_weights(j, i)) * double(g[i]);
        mag += std::abs(double(m.depth_weights(j, i)) * double(g[i]));
      }
      // Relative to the magnitude of the summands, the conditioning of a dot product.
      CHECK(std::abs(outd(j) - acc) <= 1e-6 * mag);
    }
  }
}

TEST_CASE("init uses the Glorot bound") {
  const auto m = init_model({Cue::Semantic, Cue::Appearance}, 10, 30, 20, 0.2, 9);
  const float a_r = std::sqrt(6.0f / 40.0f), a_d = std::sqrt(6.0f / 30.0f);
  CHECK(m.rgb_weights.cwiseAbs().maxCoeff() <= a_r);
  CHECK(m.depth_weights.cwiseAbs().maxCoeff() <= a_d);
  CHECK(m.rgb_weights.cwiseAbs().maxCoeff() > 0.8f * a_r);
  CHECK(m == init_model({Cue::Semantic, Cue::Appearance}, 10, 30, 20, 0.2, 9));
  CHECK(m.space.code() == "SA");
  CHECK(m.space.name() == "S_R-A_L");
}

TEST_CASE("score examples") {
  const auto m = identity_model(2);
  CHECK(score(m, std::vector<float>{1, 0}, std::vector<float>{2, 0}) == doctest::Approx(1.0));
  CHECK(score(m, std::vector<float>{1, 0}, std::vector<float>{0, 5}) == doctest::Approx(0.0));
  CHECK(score(m, std::vector<float>{1, 1}, std::vector<float>{-1, -1}) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(score(m, std::vector<float>{0, 0}, std::vector<float>{1, 0}), DegenerateVectorError);
}

TEST_CASE("score is symmetric and scale invariant") {
  std::mt19937_64 gen(5);
  auto m = init_model({}, 6, 6, 6, 0.2, 1);
  m.depth_weights = m.rgb_weights;
  auto scaled = m;
  scaled.rgb_weights *= 7.5f;
  for (int t = 0; t < 50; ++t) {
    const auto a = testing::random_vector(gen, 6), b = testing::random_vector(gen, 6);
    CHECK(score(m, a, b) == doctest::Approx(score(m, b, a)).epsilon(1e-6));
    CHECK(score(scaled, a, b) == doctest::Approx(score(m, a, b)).epsilon(1e-6));
  }
}

TEST_CASE("hinge hand example") {
  // Pair 0: S(r0,d0)=0.5, S(r0,d1)=0.6, S(r1,d0)=0.4.
  Eigen::MatrixXd s(2, 2);
  s << 0.5, 0.6, 0.4, 0.5;
  NegativeSample neg;
  neg.per_anchor = {{1}, {0}};
  const auto h = bidirectional_hinge(s, neg, 0.2);
  CHECK(h.per_pair[0] == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(h.per_pair[0] >= 0.0);

  Eigen::MatrixXd sep(3, 3);
  sep << 1.0, 0.8, 0.1, 0.8, 1.0, -0.3, 0.0, 0.8, 1.0;
  neg.per_anchor = {{1, 2}, {0, 2}, {0, 1}};
  const auto z = bidirectional_hinge(sep, neg, 0.2);
  CHECK(z.loss == 0.0);
  CHECK(z.score_grad.isZero(0.0));
}

TEST_CASE("hinge picks the hardest sampled negative only") {
  Eigen::MatrixXd s(3, 3);
  s << 0.5, 0.9, 0.55, 0.0, 0.5, 0.0, 0.0, 0.0, 0.5;
  NegativeSample neg;
  neg.per_anchor = {{2}, {0}, {0}};  // row 1 is hard for anchor 0 but not sampled
  const auto h = bidirectional_hinge(s, neg, 0.2);
  CHECK(h.per_pair[0] == doctest::Approx(0.25 + 0.0));
  for (double p : h.per_pair) CHECK(p >= 0.0);
}

TEST_CASE("triplet loss on a model and batch") {
  // Two rows with the hand-example scores would not come from unit vectors
  // in two dims, so check the model path against the score-matrix path.
  std::mt19937_64 gen(11);
  const auto m = init_model({}, 4, 5, 6, 0.2, 3);
  TripletBatch b;
  b.rgb = Eigen::MatrixXf::Random(5, 5);
  b.depth = Eigen::MatrixXf::Random(5, 6);
  b.location_ids = {1, 2, 3, 4, 5};
  const auto lg = triplet_loss(m, b, 4, 77);
  Eigen::MatrixXd r = (b.rgb * m.rgb_weights.transpose()).cast<double>();
  Eigen::MatrixXd d = (b.depth * m.depth_weights.transpose()).cast<double>();
  r.rowwise().normalize();
  d.rowwise().normalize();
  const auto ref = bidirectional_hinge(r * d.transpose(), sample_negatives(5, 4, 77), 0.2);
  CHECK(lg.loss == doctest::Approx(ref.loss).epsilon(1e-5));
  CHECK(lg.loss >= 0.0);
  CHECK(lg.grad_rgb.rows() == 4);
  CHECK(lg.grad_rgb.cols() == 5);
  CHECK(lg.grad_depth.cols() == 6);
}

TEST_CASE("analytic gradient matches central differences") {
  std::mt19937_64 gen(2024);
  int checked = 0, drawn = 0;
  double worst = 0.0;
  while (checked < 25 && drawn < 2000) {
    ++drawn;
    const auto r = testing::check_gradient(gen, 4, 6, 6, 5);
    if (!r) continue;
    ++checked;
    worst = std::max(worst, r->max_rel_error);
    CHECK(r->loss > 0.0);
  }
  CHECK(checked >= 10);
  CHECK(worst <= 1e-3);
}

TEST_CASE("negative sampling") {
  const auto a = sample_negatives(8, 3, 99);
  REQUIRE(a.per_anchor.size() == 8);
  for (std::size_t i = 0; i < 8; ++i) {
    const auto& c = a.per_anchor[i];
    CHECK(c.size() == 3);
    CHECK(std::is_sorted(c.begin(), c.end()));
    CHECK(std::adjacent_find(c.begin(), c.end()) == c.end());
    for (auto j : c) {
      CHECK(j != i);
      CHECK(j < 8);
    }
  }
  CHECK(sample_negatives(8, 3, 99).per_anchor == a.per_anchor);
  CHECK(sample_negatives(8, 3, 100).per_anchor != a.per_anchor);
  const auto all = sample_negatives(4, 3, 1);
  CHECK(all.per_anchor[2] == std::vector<std::uint32_t>{0, 1, 3});
  CHECK_THROWS_AS(sample_negatives(1, 1, 0), InsufficientDataError);
  CHECK_THROWS_AS(sample_negatives(4, 4, 0), ParameterError);
}

TEST_CASE("negative sampling is roughly uniform") {
  std::vector<int> counts(10, 0);
  for (std::uint64_t s = 0; s < 2000; ++s) {
    const auto neg = sample_negatives(10, 2, s);
    for (auto j : neg.per_anchor[0]) ++counts[j];
  }
  CHECK(counts[0] == 0);
  for (int j = 1; j < 10; ++j) CHECK(std::abs(counts[j] - 4000.0 / 9.0) < 80.0);
}

TEST_CASE("batch validation") {
  TripletBatch b;
  b.rgb = Eigen::MatrixXf::Ones(1, 3);
  b.depth = Eigen::MatrixXf::Ones(1, 3);
  b.location_ids = {1};
  CHECK_THROWS_AS(validate(b), InsufficientDataError);
  const auto m = init_model({}, 2, 3, 3, 0.2, 1);
  CHECK_THROWS_AS(triplet_loss(m, b, 1, 0), InsufficientDataError);
  b.rgb = Eigen::MatrixXf::Ones(2, 3);
  b.depth = Eigen::MatrixXf::Ones(2, 3);
  b.location_ids = {4, 4};
  CHECK_THROWS_AS(validate(b), DataError);
}

TEST_CASE("batches never repeat a location") {
  const auto ch = testing::synth_channels(small_synth(1));
  const auto pairs = testing::synth_pairs(ch, 0, 2);
  const auto batches = make_batches(pairs, 16, 5);
  std::size_t covered = 0;
  for (const auto& b : batches) {
    CHECK(b.size() >= 2);
    CHECK(b.size() <= 17);
    std::set<LocationId> ids;
    for (auto r : b) ids.insert(pairs.pairs[r].rgb.location_id);
    CHECK(ids.size() == b.size());
    covered += b.size();
  }
  CHECK(covered == pairs.size());
  CHECK(make_batches(pairs, 16, 5) == batches);
}

TEST_CASE("zero learning rate keeps the initial weights") {
  const auto ch = testing::synth_channels(small_synth(2));
  const auto pairs = testing::synth_pairs(ch, 0, 2);
  auto cfg = small_train(4);
  for (auto kind : {OptimizerKind::Sgd, OptimizerKind::SgdMomentum, OptimizerKind::Adam}) {
    cfg.learning_rate = 0.0;
    cfg.optimizer = kind;
    const auto res = train(pairs, PairSet{}, cfg);
    const auto init = init_model({}, cfg.joint_dim, 16, 16, cfg.margin, derive_seed(cfg.seed, "init"));
    CHECK(res.model.rgb_weights == init.rgb_weights);
    CHECK(res.model.depth_weights == init.depth_weights);
  }
}

TEST_CASE("training is deterministic and reduces the loss") {
  auto sc = small_synth(3, 60);
  sc.channel_noise = {0.2, 0.2, 0.2, 0.2};
  const auto ch = testing::synth_channels(sc);
  const auto all = testing::synth_pairs(ch, 0, 2);
  const auto split = pairstore::spatial_split(all, {}, 8);
  const auto cfg = small_train(6);
  const auto a = train(split.train, split.val, cfg);
  const auto b = train(split.train, split.val, cfg);
  CHECK(a.epoch_loss == b.epoch_loss);
  CHECK(a.val_recall_at_1 == b.val_recall_at_1);
  CHECK(a.model == b.model);
  CHECK(a.epoch_loss.size() == cfg.epochs);
  CHECK(a.epoch_loss.back() < a.initial_loss);
  CHECK(a.val_recall_at_1.size() == cfg.epochs + 1);
  CHECK(a.val_recall_at_1[a.best_epoch] == *std::max_element(a.val_recall_at_1.begin(), a.val_recall_at_1.end()));

  auto other = cfg;
  other.seed = 7;
  CHECK(train(split.train, split.val, other).epoch_loss != a.epoch_loss);
}

TEST_CASE("zero noise training retrieves its own validation set") {
  const auto ch = testing::synth_channels(small_synth(4, 80));
  const auto all = testing::synth_pairs(ch, 1, 3);
  const auto split = pairstore::spatial_split(all, {}, 2);
  auto cfg = small_train(1);
  cfg.epochs = 15;
  const auto res = train(split.train, split.val, cfg);
  CHECK(res.val_recall_at_1.back() >= 0.99);
  CHECK(res.model.space.code() == "SS");
}

TEST_CASE("divergence is a training error") {
  const auto ch = testing::synth_channels(small_synth(5));
  auto pairs = testing::synth_pairs(ch, 0, 2);
  pairs.pairs[3].rgb.vector[0] = std::numeric_limits<float>::infinity();
  try {
    train(pairs, PairSet{}, small_train(1));
    FAIL("expected a training error");
  } catch (const TrainingError& e) {
    CHECK(e.epoch() >= 1);
  } catch (const DegenerateVectorError&) {
    // An infinite feature may also zero out a norm; both stop training.
  }
}

TEST_CASE("training config validation") {
  auto c = small_train(0);
  c.batch_size = 1;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = small_train(0);
  c.negatives_per_positive = 16;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = small_train(0);
  c.margin = 0.0;
  CHECK_THROWS_AS(validate(c), ConfigError);
  CHECK(parse_optimizer("adam") == OptimizerKind::Adam);
  CHECK_THROWS_AS(parse_optimizer("lbfgs"), ConfigError);
  CHECK(parse_space("AS") == SpaceLabel{Cue::Appearance, Cue::Semantic});
  CHECK_THROWS_AS(parse_space("AX"), ParameterError);
}

TEST_CASE("checkpoint round trip") {
  testing::TempDir dir("ckpt");
  auto m = init_model({Cue::Appearance, Cue::Semantic}, 9, 12, 7, 0.35, 21);
  m.normalize_output = false;
  save_checkpoint(m, dir / "m.xje");
  const auto back = load_checkpoint(dir / "m.xje");
  CHECK(back == m);
  std::mt19937_64 gen(8);
  for (int t = 0; t < 100; ++t) {
    const auto a = testing::random_vector(gen, 12), b = testing::random_vector(gen, 7);
    const double s1 = score(m, a, b), s2 = score(back, a, b);
    CHECK(std::memcmp(&s1, &s2, sizeof s1) == 0);
  }
  const auto big = init_model({}, 1024, 8, 8, 0.2, 1);
  save_checkpoint(big, dir / "big.xje");
  const auto bb = load_checkpoint(dir / "big.xje");
  CHECK(bb.joint_dim() == 1024);
  CHECK(bb.rgb_dim() == 8);
  CHECK(bb.depth_dim() == 8);
}

TEST_CASE("corrupt checkpoints") {
  testing::TempDir dir("ckpt");
  save_checkpoint(init_model({}, 3, 3, 3, 0.2, 1), dir / "m.xje");
  const auto size = std::filesystem::file_size(dir / "m.xje");
  std::filesystem::resize_file(dir / "m.xje", size - 5);
  CHECK_THROWS_AS(load_checkpoint(dir / "m.xje"), FormatError);
  {
    std::ofstream out(dir / "bad.xje", std::ios::binary);
    out << "XJE2 and more bytes here";
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.xje"), VersionError);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.xje"), DataError);
}
