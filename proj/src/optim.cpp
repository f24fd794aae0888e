#include "tadner/optim.hpp"

#include <algorithm>

namespace tadner {

void OptimizerConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw Error(Errc::InvalidConfig, "learning_rate must be a finite non-negative number");
  }
  if (warmup_fraction < 0.0 || warmup_fraction > 1.0) {
    throw Error(Errc::InvalidConfig, "warmup_fraction must lie in [0, 1]");
  }
  if (batch_size < 1) throw Error(Errc::InvalidConfig, "batch_size must be at least 1");
  if (weight_decay < 0.0) throw Error(Errc::InvalidConfig, "weight_decay must be non-negative");
}

double scheduled_learning_rate(double base, std::size_t step, std::size_t total_steps,
                               double warmup_fraction) {
  if (total_steps == 0) return base;
  const auto warmup = static_cast<std::size_t>(
      std::ceil(warmup_fraction * static_cast<double>(total_steps)));
  const double s = static_cast<double>(step);
  if (step < warmup) return base * (s + 1.0) / static_cast<double>(warmup);
  const double remaining = static_cast<double>(total_steps - std::min(step, total_steps));
  const double span = static_cast<double>(total_steps - warmup);
  return span <= 0.0 ? base : base * remaining / span;
}

AdamW::AdamW(std::size_t size, const OptimizerConfig& config)
    : m_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size))),
      v_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size))),
      beta1_(config.beta1),
      beta2_(config.beta2),
      epsilon_(config.epsilon),
      weight_decay_(config.weight_decay) {}

void AdamW::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double learning_rate) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw Error(Errc::LengthMismatch, "optimizer state does not match parameter size");
  }
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params *= (1.0 - learning_rate * weight_decay_);
  params.array() -= learning_rate * (m_.array() / c1) / ((v_.array() / c2).sqrt() + epsilon_);
  if (!params.allFinite()) {
    throw Error(Errc::NonFiniteLoss, "parameter update produced non-finite values");
  }
}

void FinetuneConfig::validate() const {
  if (beta < 1) throw Error(Errc::InvalidConfig, "beta must be at least 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw Error(Errc::InvalidConfig, "fine-tune learning_rate must be finite and non-negative");
  }
}

std::size_t default_beta(std::size_t k_shot) { return k_shot <= 1 ? 2 : 6; }

}  // namespace tadner
