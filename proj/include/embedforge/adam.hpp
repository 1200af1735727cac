#pragma once

#include <cstdint>

#include "embedforge/nn.hpp"

namespace embedforge {

struct AdamHyperparams {
  double learning_rate = 3e-5;  // epsilon_0
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;  // denominator guard, not the learning rate
  std::int64_t decay_start = 25000;
  std::int64_t total_iters = 50000;
  // Learning rate reached at total_iters, as a fraction of learning_rate.
  double final_lr_factor = 1e-3;

  void validate() const;
  friend bool operator==(const AdamHyperparams&, const AdamHyperparams&) = default;
};

// Constant until decay_start, then exponential decay to
// learning_rate * final_lr_factor at total_iters. `step` is 1-based.
double learning_rate_at(const AdamHyperparams& h, std::int64_t step);

struct AdamState {
  AdamHyperparams hyper;
  std::int64_t step_count = 0;
  MlpParams m;
  MlpParams v;

  static AdamState for_params(const MlpParams& params, const AdamHyperparams& hyper);
  friend bool operator==(const AdamState&, const AdamState&) = default;
};

// Bias-corrected Adam update of `params` in place. Returns the learning rate used.
double adam_step(AdamState& state, MlpParams& params, const MlpGrads& grads);

}  // namespace embedforge
