#include "rlstruct/optimizer.hpp"

#include <cmath>
#include <numbers>

namespace rlstruct {

Adam::Adam(const PolicyParams& params, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& t : params.tensors()) {
    m_.emplace_back(t.data.size(), 0.0);
    v_.emplace_back(t.data.size(), 0.0);
  }
}

void Adam::step(PolicyParams& params, const Gradient& grad, double learning_rate) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto& tensors = params.tensors();
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (!tensors[i].trainable) continue;
    auto& w = tensors[i].data;
    const auto& g = grad.data[i];
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * g[k];
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * g[k] * g[k];
      w[k] -= learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps_);
    }
  }
}

double scheduled_lr(const OptimizerConfig& cfg, int step) {
  if (cfg.schedule == Schedule::Constant || cfg.total_steps <= 1) return cfg.learning_rate;
  const double progress = static_cast<double>(step) / static_cast<double>(cfg.total_steps - 1);
  const double floor = cfg.min_lr_ratio * cfg.learning_rate;
  return floor + (cfg.learning_rate - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

double clip_gradient(Gradient& grad, double max_norm) {
  const double n = grad.norm();
  if (max_norm > 0.0 && n > max_norm) grad.scale(max_norm / n);
  return n;
}

}  // namespace rlstruct
