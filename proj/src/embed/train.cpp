#include <algorithm>
#include <cmath>
#include <map>

#include "rgb2lidar/embed.hpp"
#include "rgb2lidar/error.hpp"
#include "rgb2lidar/seed.hpp"

namespace rgb2lidar::embed {

void validate(const TrainConfig& cfg) {
  if (cfg.joint_dim < 1) throw ConfigError("joint_dim must be at least 1");
  if (!(cfg.margin > 0.0)) throw ConfigError("margin must be positive");
  if (cfg.batch_size < 2) throw ConfigError("batch_size must be at least 2");
  if (cfg.negatives_per_positive < 1 || cfg.negatives_per_positive > cfg.batch_size - 1) {
    throw ConfigError("negatives_per_positive must lie in [1, batch_size - 1]");
  }
  if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate)) {
    throw ConfigError("learning_rate must be finite and >= 0");
  }
}

std::vector<std::vector<std::size_t>> make_batches(const PairSet& pairs, std::size_t batch_size,
                                                   std::uint64_t seed) {
  std::map<LocationId, std::vector<std::size_t>> by_location;
  for (std::size_t i = 0; i < pairs.pairs.size(); ++i) by_location[pairs.pairs[i].rgb.location_id].push_back(i);

  Rng rng(seed);
  std::vector<std::vector<std::size_t>*> queues;
  for (auto& [id, rows] : by_location) {
    rng.shuffle(rows);
    queues.push_back(&rows);
  }
  std::vector<std::size_t> cursor(queues.size(), 0);

  std::vector<std::vector<std::size_t>> batches;
  const auto location_of = [&](std::size_t row) { return pairs.pairs[row].rgb.location_id; };
  for (;;) {
    std::vector<std::size_t> live;
    for (std::size_t q = 0; q < queues.size(); ++q) {
      if (cursor[q] < queues[q]->size()) live.push_back(q);
    }
    if (live.empty()) break;
    rng.shuffle(live);
    std::vector<std::size_t> round;
    round.reserve(live.size());
    for (std::size_t q : live) round.push_back((*queues[q])[cursor[q]++]);

    for (std::size_t start = 0; start < round.size(); start += batch_size) {
      const std::size_t end = std::min(round.size(), start + batch_size);
      batches.emplace_back(round.begin() + static_cast<std::ptrdiff_t>(start),
                           round.begin() + static_cast<std::ptrdiff_t>(end));
    }
    // A lone trailing row cannot form a batch: fold it into a batch that does
    // not contain its location yet, else drop it for this epoch.
    if (!batches.empty() && batches.back().size() == 1) {
      const std::size_t row = batches.back().front();
      batches.pop_back();
      for (auto it = batches.rbegin(); it != batches.rend(); ++it) {
        const bool clash = std::any_of(it->begin(), it->end(),
                                       [&](std::size_t r) { return location_of(r) == location_of(row); });
        if (!clash) {
          it->push_back(row);
          break;
        }
      }
    }
  }
  return batches;
}

TripletBatch gather_batch(const PairSet& pairs, std::span<const std::size_t> rows) {
  TripletBatch b;
  const auto n = static_cast<Eigen::Index>(rows.size());
  b.rgb.resize(n, pairs.rgb_dim);
  b.depth.resize(n, pairs.depth_dim);
  b.location_ids.reserve(rows.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = pairs.pairs[rows[static_cast<std::size_t>(i)]];
    if (p.rgb.vector.size() != pairs.rgb_dim || p.depth.vector.size() != pairs.depth_dim) {
      throw ShapeError("gather_batch: record dimension differs from pair set header");
    }
    b.rgb.row(i) = Eigen::Map<const Eigen::RowVectorXf>(p.rgb.vector.data(), pairs.rgb_dim);
    b.depth.row(i) = Eigen::Map<const Eigen::RowVectorXf>(p.depth.vector.data(), pairs.depth_dim);
    b.location_ids.push_back(p.rgb.location_id);
  }
  return b;
}

double self_recall_at_1(const ProjectionModel& model, const PairSet& pairs) {
  if (pairs.empty()) throw InsufficientDataError("self_recall_at_1: empty pair set");
  std::vector<std::size_t> rows(pairs.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  const TripletBatch all = gather_batch(pairs, rows);
  Eigen::MatrixXd r = (all.rgb * model.rgb_weights.transpose()).cast<double>();
  Eigen::MatrixXd d = (all.depth * model.depth_weights.transpose()).cast<double>();
  r.rowwise().normalize();
  d.rowwise().normalize();
  const Eigen::MatrixXd s = r * d.transpose();
  std::size_t hits = 0;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double gt = s(i, i);
    bool top = true;
    for (Eigen::Index j = 0; j < s.cols() && top; ++j) {
      if (j == i) continue;
      if (s(i, j) > gt || (s(i, j) == gt && j < i)) top = false;
    }
    hits += top ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(s.rows());
}

TrainResult train(const PairSet& train_pairs, const PairSet& val_pairs, const TrainConfig& cfg) {
  validate(cfg);
  if (train_pairs.empty()) throw InsufficientDataError("train: empty training set");
  const SpaceLabel space{train_pairs.rgb_cue, train_pairs.depth_cue};
  if (!val_pairs.empty() && (SpaceLabel{val_pairs.rgb_cue, val_pairs.depth_cue} != space ||
                             val_pairs.rgb_dim != train_pairs.rgb_dim ||
                             val_pairs.depth_dim != train_pairs.depth_dim)) {
    throw SchemaError("train: validation pairs come from a different channel combination");
  }

  ProjectionModel model = init_model(space, cfg.joint_dim, train_pairs.rgb_dim, train_pairs.depth_dim,
                                     cfg.margin, derive_seed(cfg.seed, "init"));
  model.normalize_output = cfg.normalize_output;
  Optimizer rgb_opt(cfg, model.rgb_weights.rows(), model.rgb_weights.cols());
  Optimizer depth_opt(cfg, model.depth_weights.rows(), model.depth_weights.cols());

  const std::uint64_t batch_seed = derive_seed(cfg.seed, "batches");
  const std::uint64_t negative_seed = derive_seed(cfg.seed, "negatives");
  const auto negatives_for = [&](std::size_t size) { return std::min(cfg.negatives_per_positive, size - 1); };

  TrainResult result;
  {
    const auto batches = make_batches(train_pairs, cfg.batch_size, mix_seed(batch_seed, 1));
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const TripletBatch tb = gather_batch(train_pairs, batches[b]);
      const auto lg = triplet_loss(model, tb, negatives_for(tb.size()), mix_seed(mix_seed(negative_seed, 1), b));
      sum += lg.loss * static_cast<double>(tb.size());
      count += tb.size();
    }
    if (count == 0) throw InsufficientDataError("train: no minibatch can be formed (need 2 distinct locations)");
    result.initial_loss = sum / static_cast<double>(count);
  }

  ProjectionModel best = model;
  double best_val = -1.0;
  if (!val_pairs.empty()) {
    best_val = self_recall_at_1(model, val_pairs);
    result.val_recall_at_1.push_back(best_val);
  }

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto batches = make_batches(train_pairs, cfg.batch_size, mix_seed(batch_seed, epoch));
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const TripletBatch tb = gather_batch(train_pairs, batches[b]);
      const auto lg =
          triplet_loss(model, tb, negatives_for(tb.size()), mix_seed(mix_seed(negative_seed, epoch), b));
      if (!std::isfinite(lg.loss) || !lg.grad_rgb.allFinite() || !lg.grad_depth.allFinite()) {
        throw TrainingError("training diverged: loss became non-finite", epoch);
      }
      rgb_opt.step(model.rgb_weights, lg.grad_rgb);
      depth_opt.step(model.depth_weights, lg.grad_depth);
      if (!model.rgb_weights.allFinite() || !model.depth_weights.allFinite()) {
        throw TrainingError("training diverged: weights became non-finite", epoch);
      }
      sum += lg.loss * static_cast<double>(tb.size());
      count += tb.size();
    }
    result.epoch_loss.push_back(sum / static_cast<double>(count));

    if (val_pairs.empty()) {
      best = model;
      result.best_epoch = epoch;
      continue;
    }
    const double r1 = self_recall_at_1(model, val_pairs);
    result.val_recall_at_1.push_back(r1);
    if (r1 > best_val) {
      best_val = r1;
      best = model;
      result.best_epoch = epoch;
    }
  }
  result.model = std::move(best);
  return result;
}

}  // namespace rgb2lidar::embed
