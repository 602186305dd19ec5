#pragma once

// Group-relative policy optimization math: group-normalized advantages, the
// clipped surrogate, the per-token KL estimator and the scalar objective.
// No critic is involved; the group mean is the baseline.

#include <cstddef>
#include <span>
#include <vector>

namespace rlstruct {

enum class RatioLevel { Sequence, Token };

struct GrpoConfig {
  int group_size = 8;
  double clip_eps = 0.2;
  double kl_beta = 0.02;
  double epsilon_std = 1e-8;
  // Policy-gradient epochs per sampled batch. With 1, ratios are exactly 1.
  int epochs = 1;
  RatioLevel ratio_level = RatioLevel::Sequence;

  void validate() const;
};

struct GroupAdvantages {
  std::vector<double> rewards;
  double mean = 0.0;
  double std = 0.0;  // population statistic
  std::vector<double> advantages;
  double epsilon_std = 0.0;
};

// Throws GroupTooSmall for fewer than two rewards.
GroupAdvantages group_advantages(std::span<const double> rewards, double epsilon_std);

double clipped_surrogate(double ratio, double advantage, double clip_eps);
// True when the clipped branch is strictly smaller than the unclipped one, so
// the surrogate does not depend on the ratio.
bool clip_active(double ratio, double advantage, double clip_eps);

// Mean over tokens of exp(d) - d - 1 with d = logp_ref - logp_theta.
// Throws LengthMismatch.
double kl_penalty(std::span<const double> logp_theta, std::span<const double> logp_ref);

// Derivative of kl_penalty with respect to each logp_theta entry.
std::vector<double> kl_penalty_grad(std::span<const double> logp_theta, std::span<const double> logp_ref);

struct SampleTerms {
  std::vector<double> logp_theta;  // current policy, per completion token
  std::vector<double> logp_old;    // sampling policy
  std::vector<double> logp_ref;    // frozen reference
  double advantage = 0.0;
};

struct GroupTerms {
  std::vector<SampleTerms> samples;
};

struct ObjectiveResult {
  double objective = 0.0;
  double surrogate_sum = 0.0;
  double kl_sum = 0.0;
  double kl_mean = 0.0;
  double clip_fraction = 0.0;
  // d objective / d logp_theta[token], same shape as the inputs.
  std::vector<std::vector<std::vector<double>>> token_coefficients;
};

// Mean over groups of (1/G) * sum_i [surrogate_i - beta * kl_i]. The surrogate
// uses a sequence-level ratio exp(sum(logp_theta - logp_old)) or, for
// RatioLevel::Token, the token-mean of per-token clipped terms.
ObjectiveResult grpo_objective(std::span<const GroupTerms> groups, const GrpoConfig& cfg);

}  // namespace rlstruct
