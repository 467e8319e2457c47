#pragma once

#include <span>
#include <vector>

namespace vcurl {

struct RewardGroup {
  std::vector<double> rewards;  // one per rollout, G >= 2
  double eps = 1e-8;
  double beta = 0.04;
  double clip_eps = 0.2;
};

/// Log-probabilities of each rollout under the current, behaviour and
/// reference policies.
struct PolicyEval {
  std::vector<double> logp_new;
  std::vector<double> logp_old;
  std::vector<double> logp_ref;
};

/// (r_i - mean) / (std + eps) with the population std. An all-equal group
/// yields exact zeros. Throws GroupTooSmall, NonFiniteInput.
std::vector<double> group_advantages(const RewardGroup& g);

/// Effective KL coefficient: 0 when every reward is exactly equal, else beta.
double kl_gate(const RewardGroup& g);

/// sum p (log p - log q) over one discrete support, given log-probabilities.
/// Throws SupportMismatch (different sizes or p > 0 where q = 0) and
/// Unnormalized (either side not summing to 1 within 1e-9).
double kl_divergence(std::span<const double> logp_policy, std::span<const double> logp_ref);

/// Clipped surrogate, to be maximized:
///   (1/G) sum_i min(rho_i A_i, clip(rho_i, 1 - c, 1 + c) A_i) - beta_eff kl
/// with rho_i = exp(logp_new_i - logp_old_i), beta_eff = kl_gate(g).
/// Throws LengthMismatch.
double grpo_objective(const PolicyEval& pe, const RewardGroup& g, double kl);

/// Two-action softmax policy pi(a | theta) with logits (theta, 0); used to
/// differentiate the objective through a single parameter.
struct TwoActionPolicy {
  double theta = 0.0;

  double logp(int action) const;
  /// d log pi(action) / d theta.
  double dlogp(int action) const;
  /// Reference-KL D(pi_theta || pi_ref) and its derivative.
  double kl_to(const TwoActionPolicy& ref) const;
  double dkl_to(const TwoActionPolicy& ref) const;
};

struct GradientCase {
  std::vector<int> actions;  // sampled action per rollout
  RewardGroup group;
  TwoActionPolicy old_policy;
  TwoActionPolicy ref_policy;
};

/// Objective as a function of theta for a fixed set of rollouts.
double grpo_objective_at(const GradientCase& c, double theta);
/// Analytic d objective / d theta. The clipped branch contributes zero
/// gradient; at a branch boundary the unclipped derivative is returned.
double grpo_objective_gradient(const GradientCase& c, double theta);

}  // namespace vcurl
