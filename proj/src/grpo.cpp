#include "rlstruct/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rlstruct/errors.hpp"

namespace rlstruct {

void GrpoConfig::validate() const {
  if (group_size < 2) throw ConfigError("grpo.group_size must be at least 2");
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw ConfigError("grpo.clip_eps must lie in (0, 1)");
  if (!(kl_beta >= 0.0)) throw ConfigError("grpo.kl_beta must be non-negative");
  if (!(epsilon_std > 0.0)) throw ConfigError("grpo.epsilon_std must be positive");
  if (epochs < 1) throw ConfigError("grpo.epochs must be at least 1");
}

GroupAdvantages group_advantages(std::span<const double> rewards, double epsilon_std) {
  if (rewards.size() < 2) throw GroupTooSmall("group needs at least 2 rewards, got " + std::to_string(rewards.size()));
  GroupAdvantages g;
  g.rewards.assign(rewards.begin(), rewards.end());
  g.epsilon_std = epsilon_std;
  const double n = static_cast<double>(rewards.size());
  double sum = 0.0;
  for (double r : rewards) sum += r;
  g.mean = sum / n;
  double sq = 0.0;
  for (double r : rewards) sq += (r - g.mean) * (r - g.mean);
  g.std = std::sqrt(sq / n);
  // Identical rewards carry no signal. Rounding in the mean could otherwise
  // leave a ~1e-17 residual that a zero epsilon would blow up.
  const bool flat = std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards[0]; });
  if (flat) {
    g.std = 0.0;
    g.advantages.assign(rewards.size(), 0.0);
    return g;
  }
  g.advantages.reserve(rewards.size());
  for (double r : rewards) g.advantages.push_back((r - g.mean) / (g.std + epsilon_std));
  return g;
}

double clipped_surrogate(double ratio, double advantage, double clip_eps) {
  const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
  return std::min(ratio * advantage, clipped * advantage);
}

bool clip_active(double ratio, double advantage, double clip_eps) {
  const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
  return clipped * advantage < ratio * advantage;
}

double kl_penalty(std::span<const double> logp_theta, std::span<const double> logp_ref) {
  if (logp_theta.size() != logp_ref.size()) {
    throw LengthMismatch("kl_penalty: " + std::to_string(logp_theta.size()) + " vs " +
                         std::to_string(logp_ref.size()) + " tokens");
  }
  if (logp_theta.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t t = 0; t < logp_theta.size(); ++t) {
    const double d = logp_ref[t] - logp_theta[t];
    sum += std::exp(d) - d - 1.0;
  }
  return sum / static_cast<double>(logp_theta.size());
}

std::vector<double> kl_penalty_grad(std::span<const double> logp_theta, std::span<const double> logp_ref) {
  if (logp_theta.size() != logp_ref.size()) throw LengthMismatch("kl_penalty_grad: length mismatch");
  std::vector<double> g(logp_theta.size(), 0.0);
  const double n = static_cast<double>(logp_theta.size());
  for (std::size_t t = 0; t < g.size(); ++t) {
    const double d = logp_ref[t] - logp_theta[t];
    g[t] = (1.0 - std::exp(d)) / n;
  }
  return g;
}

ObjectiveResult grpo_objective(std::span<const GroupTerms> groups, const GrpoConfig& cfg) {
  ObjectiveResult res;
  if (groups.empty()) return res;
  const double inv_groups = 1.0 / static_cast<double>(groups.size());
  std::size_t n_terms = 0;
  std::size_t n_clipped = 0;
  std::size_t n_samples = 0;
  res.token_coefficients.resize(groups.size());

  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& samples = groups[gi].samples;
    if (static_cast<int>(samples.size()) != cfg.group_size) {
      throw GroupTooSmall("group " + std::to_string(gi) + " has " + std::to_string(samples.size()) +
                          " samples, expected " + std::to_string(cfg.group_size));
    }
    const double inv_g = 1.0 / static_cast<double>(samples.size());
    double group_sum = 0.0;
    auto& group_coeffs = res.token_coefficients[gi];
    group_coeffs.resize(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const SampleTerms& s = samples[i];
      const std::size_t T = s.logp_theta.size();
      if (s.logp_old.size() != T || s.logp_ref.size() != T) {
        throw LengthMismatch("grpo_objective: per-token lists differ in length");
      }
      const double scale = inv_groups * inv_g;
      std::vector<double>& coeff = group_coeffs[i];
      coeff.assign(T, 0.0);

      double surrogate = 0.0;
      if (cfg.ratio_level == RatioLevel::Sequence) {
        double log_ratio = 0.0;
        for (std::size_t t = 0; t < T; ++t) log_ratio += s.logp_theta[t] - s.logp_old[t];
        const double ratio = std::exp(log_ratio);
        surrogate = clipped_surrogate(ratio, s.advantage, cfg.clip_eps);
        ++n_terms;
        if (clip_active(ratio, s.advantage, cfg.clip_eps)) {
          ++n_clipped;
        } else {
          for (std::size_t t = 0; t < T; ++t) coeff[t] += scale * s.advantage * ratio;
        }
      } else if (T > 0) {
        const double inv_t = 1.0 / static_cast<double>(T);
        for (std::size_t t = 0; t < T; ++t) {
          const double ratio = std::exp(s.logp_theta[t] - s.logp_old[t]);
          surrogate += inv_t * clipped_surrogate(ratio, s.advantage, cfg.clip_eps);
          ++n_terms;
          if (clip_active(ratio, s.advantage, cfg.clip_eps)) {
            ++n_clipped;
          } else {
            coeff[t] += scale * inv_t * s.advantage * ratio;
          }
        }
      }

      const double kl = kl_penalty(s.logp_theta, s.logp_ref);
      if (cfg.kl_beta != 0.0) {
        const auto kg = kl_penalty_grad(s.logp_theta, s.logp_ref);
        for (std::size_t t = 0; t < T; ++t) coeff[t] -= scale * cfg.kl_beta * kg[t];
      }
      res.surrogate_sum += surrogate;
      res.kl_sum += kl;
      group_sum += surrogate - cfg.kl_beta * kl;
      ++n_samples;
    }
    res.objective += inv_groups * inv_g * group_sum;
  }
  res.kl_mean = n_samples > 0 ? res.kl_sum / static_cast<double>(n_samples) : 0.0;
  res.clip_fraction = n_terms > 0 ? static_cast<double>(n_clipped) / static_cast<double>(n_terms) : 0.0;
  return res;
}

}  // namespace rlstruct
