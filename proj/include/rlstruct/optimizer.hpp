#pragma once

#include <vector>

#include "rlstruct/config.hpp"
#include "rlstruct/policy.hpp"

namespace rlstruct {

// Adam over the trainable tensors of a PolicyParams. Frozen tensors are never
// touched.
class Adam {
 public:
  Adam(const PolicyParams& params, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  // Descends along `grad` (a loss gradient).
  void step(PolicyParams& params, const Gradient& grad, double learning_rate);
  long steps() const { return t_; }

 private:
  double beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Learning rate at RL step `step` (0-based) of `total`.
double scheduled_lr(const OptimizerConfig& cfg, int step);

// Rescales `grad` so its norm is at most `max_norm` (no-op for max_norm <= 0).
// Returns the norm before clipping.
double clip_gradient(Gradient& grad, double max_norm);

}  // namespace rlstruct
