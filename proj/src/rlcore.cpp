#include "vcurl/rlcore.hpp"

#include <algorithm>
#include <cmath>

#include "vcurl/error.hpp"

namespace vcurl {

namespace {

void require_group(const RewardGroup& g) {
  if (g.rewards.size() < 2) {
    throw Error(Errc::group_too_small, "group has " + std::to_string(g.rewards.size()) + " reward(s)");
  }
  for (double r : g.rewards) {
    if (!std::isfinite(r)) throw Error(Errc::non_finite_input, "reward");
  }
}

bool all_equal(const std::vector<double>& xs) {
  return std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs.front(); });
}

// Numerically stable log(1 + e^x).
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

std::vector<double> group_advantages(const RewardGroup& g) {
  require_group(g);
  const auto n = static_cast<double>(g.rewards.size());
  std::vector<double> adv(g.rewards.size(), 0.0);
  if (all_equal(g.rewards)) return adv;
  double mean = 0.0;
  for (double r : g.rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : g.rewards) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / n);
  for (std::size_t i = 0; i < adv.size(); ++i) adv[i] = (g.rewards[i] - mean) / (sd + g.eps);
  return adv;
}

double kl_gate(const RewardGroup& g) {
  if (g.rewards.empty() || all_equal(g.rewards)) return 0.0;
  return g.beta;
}

double kl_divergence(std::span<const double> logp_policy, std::span<const double> logp_ref) {
  if (logp_policy.size() != logp_ref.size() || logp_policy.empty()) {
    throw Error(Errc::support_mismatch, "distributions have different supports");
  }
  double sp = 0.0, sq = 0.0, kl = 0.0;
  for (std::size_t k = 0; k < logp_policy.size(); ++k) {
    const double lp = logp_policy[k], lq = logp_ref[k];
    if (std::isnan(lp) || std::isnan(lq) || lp > 0.0 || lq > 0.0) {
      throw Error(Errc::unnormalized, "log-probabilities must be <= 0");
    }
    const double p = std::exp(lp);
    sp += p;
    sq += std::exp(lq);
    if (p == 0.0) continue;
    if (std::isinf(lq)) throw Error(Errc::support_mismatch, "policy mass outside the reference support");
    kl += p * (lp - lq);
  }
  if (std::abs(sp - 1.0) > 1e-9 || std::abs(sq - 1.0) > 1e-9) {
    throw Error(Errc::unnormalized, "probabilities do not sum to 1");
  }
  return std::max(kl, 0.0);
}

double grpo_objective(const PolicyEval& pe, const RewardGroup& g, double kl) {
  const std::size_t n = g.rewards.size();
  if (pe.logp_new.size() != n || pe.logp_old.size() != n || (!pe.logp_ref.empty() && pe.logp_ref.size() != n)) {
    throw Error(Errc::length_mismatch, "policy evaluations and rewards differ in length");
  }
  const auto adv = group_advantages(g);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double rho = std::exp(pe.logp_new[i] - pe.logp_old[i]);
    const double clipped = std::clamp(rho, 1.0 - g.clip_eps, 1.0 + g.clip_eps);
    sum += std::min(rho * adv[i], clipped * adv[i]);
  }
  return sum / static_cast<double>(n) - kl_gate(g) * kl;
}

double TwoActionPolicy::logp(int action) const {
  // logits (theta, 0): log pi(0) = -softplus(-theta), log pi(1) = -softplus(theta)
  return action == 0 ? -softplus(-theta) : -softplus(theta);
}

double TwoActionPolicy::dlogp(int action) const {
  const double p0 = sigmoid(theta);
  return action == 0 ? 1.0 - p0 : -p0;
}

double TwoActionPolicy::kl_to(const TwoActionPolicy& ref) const {
  const double lp[2] = {logp(0), logp(1)};
  const double lq[2] = {ref.logp(0), ref.logp(1)};
  return kl_divergence(lp, lq);
}

double TwoActionPolicy::dkl_to(const TwoActionPolicy& ref) const {
  // KL = sum_a p_a (lp_a - lq_a); with dp_0 = p0 p1 = -dp_1 and
  // sum_a p_a dlp_a = 0 this reduces to p0 p1 ((lp0 - lq0) - (lp1 - lq1)).
  const double p0 = sigmoid(theta);
  const double p1 = 1.0 - p0;
  return p0 * p1 * ((logp(0) - ref.logp(0)) - (logp(1) - ref.logp(1)));
}

double grpo_objective_at(const GradientCase& c, double theta) {
  const TwoActionPolicy pol{theta};
  PolicyEval pe;
  for (int a : c.actions) {
    pe.logp_new.push_back(pol.logp(a));
    pe.logp_old.push_back(c.old_policy.logp(a));
    pe.logp_ref.push_back(c.ref_policy.logp(a));
  }
  return grpo_objective(pe, c.group, pol.kl_to(c.ref_policy));
}

double grpo_objective_gradient(const GradientCase& c, double theta) {
  if (c.actions.size() != c.group.rewards.size()) {
    throw Error(Errc::length_mismatch, "actions and rewards differ in length");
  }
  const TwoActionPolicy pol{theta};
  const auto adv = group_advantages(c.group);
  const double lo = 1.0 - c.group.clip_eps, hi = 1.0 + c.group.clip_eps;
  double grad = 0.0;
  for (std::size_t i = 0; i < adv.size(); ++i) {
    const int a = c.actions[i];
    const double rho = std::exp(pol.logp(a) - c.old_policy.logp(a));
    // min(rho A, clip(rho) A) follows the clipped constant exactly when
    // A > 0 and rho > hi, or A < 0 and rho < lo.
    const bool clipped = (adv[i] > 0.0 && rho > hi) || (adv[i] < 0.0 && rho < lo);
    if (!clipped) grad += adv[i] * rho * pol.dlogp(a);
  }
  grad /= static_cast<double>(adv.size());
  return grad - kl_gate(c.group) * pol.dkl_to(c.ref_policy);
}

}  // namespace vcurl
