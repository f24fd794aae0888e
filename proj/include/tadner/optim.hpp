#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tadner/errors.hpp"

namespace tadner {

struct OptimizerConfig {
  double learning_rate = 3e-5;
  double warmup_fraction = 0.01;
  std::size_t batch_size = 64;
  std::size_t epochs = 10;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
};

// Linear warmup over the first warmup_fraction of steps, then linear decay to zero.
double scheduled_learning_rate(double base, std::size_t step, std::size_t total_steps,
                               double warmup_fraction);

// Adam with decoupled weight decay.
class AdamW {
 public:
  AdamW() = default;
  AdamW(std::size_t size, const OptimizerConfig& config);

  // Applies one update in place; throws NonFiniteLoss if any parameter stops being finite.
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double learning_rate);

  std::size_t steps_taken() const { return t_; }

 private:
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double epsilon_ = 1e-8;
  double weight_decay_ = 0.0;
  std::size_t t_ = 0;
};

struct FinetuneConfig {
  // Consecutive loss rises that stop fine-tuning.
  std::size_t beta = 2;
  double learning_rate = 1e-3;
  std::size_t max_steps = 50;
  // Count an unchanged loss as a rise, as the strict-decrease loop of the reference procedure does.
  bool ties_count_as_rise = false;
  double weight_decay = 0.0;

  void validate() const;
};

// Per-shot default: 2 for 1-shot, 6 otherwise.
std::size_t default_beta(std::size_t k_shot);

struct EarlyStopResult {
  std::vector<double> losses;     // one per evaluation, in order
  std::size_t returned_step = 0;  // 1-based evaluation whose parameters were kept; 0 = final update
  bool stopped_early = false;
};

inline void require_finite_loss(double loss, const char* what) {
  if (!std::isfinite(loss)) {
    throw Error(Errc::NonFiniteLoss, std::string(what) + " loss is not finite");
  }
}

// Runs `step` until the loss has risen `beta` times in a row or max_steps is
// reached. `step` evaluates the loss at the current state, then updates the
// state in place and returns that loss. On an early stop the state is rolled
// back to the one evaluated just before the rise streak began.
template <typename State>
EarlyStopResult run_early_stopping(const FinetuneConfig& cfg, State& state,
                                   const std::function<double(State&)>& step) {
  cfg.validate();
  EarlyStopResult result;
  State anchor = state;
  double prev = std::numeric_limits<double>::infinity();
  std::size_t streak = 0;
  for (std::size_t t = 1; t <= cfg.max_steps; ++t) {
    State before = state;
    const double loss = step(state);
    require_finite_loss(loss, "fine-tuning");
    result.losses.push_back(loss);
    const bool rising = loss > prev || (cfg.ties_count_as_rise && loss == prev);
    if (rising) {
      ++streak;
    } else {
      streak = 0;
      anchor = std::move(before);
      result.returned_step = t;
    }
    prev = loss;
    if (streak >= cfg.beta) {
      state = std::move(anchor);
      result.stopped_early = true;
      return result;
    }
  }
  result.returned_step = 0;
  return result;
}

}  // namespace tadner
