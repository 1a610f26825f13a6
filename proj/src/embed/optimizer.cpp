#include <cmath>

#include "rgb2lidar/embed.hpp"
#include "rgb2lidar/error.hpp"

namespace rgb2lidar::embed {

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "sgd") return OptimizerKind::Sgd;
  if (name == "momentum" || name == "sgd_momentum") return OptimizerKind::SgdMomentum;
  if (name == "adam") return OptimizerKind::Adam;
  throw ConfigError("unknown optimizer '" + std::string(name) + "' (sgd, momentum, adam)");
}

std::string_view to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::Sgd: return "sgd";
    case OptimizerKind::SgdMomentum: return "momentum";
    case OptimizerKind::Adam: return "adam";
  }
  return "?";
}

Optimizer::Optimizer(const TrainConfig& cfg, Eigen::Index rows, Eigen::Index cols)
    : kind_(cfg.optimizer),
      lr_(cfg.learning_rate),
      momentum_(cfg.momentum),
      beta1_(cfg.beta1),
      beta2_(cfg.beta2),
      epsilon_(cfg.epsilon) {
  if (kind_ != OptimizerKind::Sgd) m_ = Eigen::MatrixXf::Zero(rows, cols);
  if (kind_ == OptimizerKind::Adam) v_ = Eigen::MatrixXf::Zero(rows, cols);
}

void Optimizer::step(Eigen::MatrixXf& weights, const Eigen::MatrixXf& gradient) {
  const auto lr = static_cast<float>(lr_);
  switch (kind_) {
    case OptimizerKind::Sgd:
      weights -= lr * gradient;
      break;
    case OptimizerKind::SgdMomentum:
      m_ = static_cast<float>(momentum_) * m_ + gradient;
      weights -= lr * m_;
      break;
    case OptimizerKind::Adam: {
      ++t_;
      const auto b1 = static_cast<float>(beta1_);
      const auto b2 = static_cast<float>(beta2_);
      m_ = b1 * m_ + (1.0f - b1) * gradient;
      v_ = b2 * v_ + (1.0f - b2) * gradient.cwiseAbs2();
      const auto c1 = static_cast<float>(1.0 - std::pow(beta1_, static_cast<double>(t_)));
      const auto c2 = static_cast<float>(1.0 - std::pow(beta2_, static_cast<double>(t_)));
      weights.array() -=
          lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + static_cast<float>(epsilon_));
      break;
    }
  }
}

}  // namespace rgb2lidar::embed
