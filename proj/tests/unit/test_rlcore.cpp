#include <cmath>

#include <gtest/gtest.h>

#include "support/fixtures.hpp"
#include "vcurl/rlcore.hpp"

using namespace vcurl;
using vcurl::testing::error_code_of;

namespace {

RewardGroup group(std::vector<double> r) {
  RewardGroup g;
  g.rewards = std::move(r);
  return g;
}

// Single-rollout objective term, written out from the clip rule.
double clip_term(double rho, double adv, double c) {
  const double clipped = std::min(std::max(rho, 1.0 - c), 1.0 + c);
  return std::min(rho * adv, clipped * adv);
}

GradientCase random_case(Rng& rng, bool gate_open) {
  GradientCase c;
  const int g = 2 + static_cast<int>(uniform_index(rng, 7));
  for (int i = 0; i < g; ++i) {
    c.actions.push_back(static_cast<int>(uniform_index(rng, 2)));
    c.group.rewards.push_back(gate_open ? std::round(uniform01(rng) * 4.0) / 4.0 : 0.75);
  }
  if (gate_open) c.group.rewards[0] = c.group.rewards[1] + 0.5;
  c.group.beta = 0.04 + 0.5 * uniform01(rng);
  c.old_policy.theta = 2.0 * standard_normal(rng);
  c.ref_policy.theta = 2.0 * standard_normal(rng);
  return c;
}

}  // namespace

TEST(Advantages, BinaryGroupExample) {
  const auto a = group_advantages(group({1, 0, 0, 1}));
  const double expect[] = {1, -1, -1, 1};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(a[i], expect[i], 1e-6);
}

TEST(Advantages, AllEqualGroupIsExactlyZeroAndGated) {
  for (double r : {0.0, 1.0, 0.37}) {
    const auto g = group({r, r, r, r, r});
    for (double x : group_advantages(g)) EXPECT_EQ(x, 0.0);
    EXPECT_EQ(kl_gate(g), 0.0);
  }
  EXPECT_EQ(kl_gate(group({0, 1})), 0.04);
  EXPECT_EQ(RewardGroup{}.beta, 0.04);
}

TEST(Advantages, MatchPopulationStdOracle) {
  Rng rng = derive_rng(2, 2);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> r(2 + uniform_index(rng, 10));
    for (auto& x : r) x = standard_normal(rng);
    double mean = 0.0;
    for (double x : r) mean += x;
    mean /= static_cast<double>(r.size());
    double ss = 0.0;
    for (double x : r) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / static_cast<double>(r.size()));
    const auto a = group_advantages(group(r));
    double sum = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      EXPECT_NEAR(a[i], (r[i] - mean) / (sd + 1e-8), 1e-12);
      sum += a[i];
    }
    EXPECT_NEAR(sum, 0.0, 1e-9);
  }
}

TEST(Advantages, Errors) {
  EXPECT_EQ(error_code_of([] { group_advantages(group({1.0})); }), Errc::group_too_small);
  EXPECT_EQ(error_code_of([] { group_advantages(group({1.0, INFINITY})); }), Errc::non_finite_input);
}

TEST(Kl, DiscreteCases) {
  const double lp[] = {std::log(0.5), std::log(0.5)};
  EXPECT_EQ(kl_divergence(lp, lp), 0.0);
  const double lq[] = {std::log(0.25), std::log(0.75)};
  const double expect = 0.5 * std::log(0.5 / 0.25) + 0.5 * std::log(0.5 / 0.75);
  EXPECT_NEAR(kl_divergence(lp, lq), expect, 1e-15);

  const double p0[] = {0.0, -INFINITY};
  const double q0[] = {-INFINITY, 0.0};
  EXPECT_EQ(error_code_of([&] { kl_divergence(p0, q0); }), Errc::support_mismatch);
  const double three[] = {std::log(0.2), std::log(0.3), std::log(0.5)};
  EXPECT_EQ(error_code_of([&] { kl_divergence(lp, three); }), Errc::support_mismatch);
  const double unnorm[] = {std::log(0.5), std::log(0.6)};
  EXPECT_EQ(error_code_of([&] { kl_divergence(unnorm, lp); }), Errc::unnormalized);
  // Zero policy mass where the reference is zero contributes nothing.
  const double pz[] = {0.0, -INFINITY};
  const double qz[] = {std::log(0.5), std::log(0.5)};
  EXPECT_NEAR(kl_divergence(pz, qz), std::log(2.0), 1e-15);
}

TEST(Objective, ClipExamples) {
  EXPECT_DOUBLE_EQ(clip_term(2.0, 1.0, 0.2), 1.2);
  EXPECT_DOUBLE_EQ(clip_term(0.5, -1.0, 0.2), -0.8);
  // A two-rollout group with advantages +1 / -1 exercises both through the library.
  PolicyEval pe;
  pe.logp_old = {std::log(0.25), std::log(0.5)};
  pe.logp_new = {std::log(0.5), std::log(0.25)};  // rho = 2 and 0.5
  const auto g = group({1, 0});
  EXPECT_NEAR(grpo_objective(pe, g, 0.0), (1.2 + -0.8) / 2.0, 1e-6);
}

TEST(Objective, MatchesTermwiseOracle) {
  Rng rng = derive_rng(5, 5);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 2 + uniform_index(rng, 6);
    RewardGroup g;
    PolicyEval pe;
    for (std::size_t i = 0; i < n; ++i) {
      g.rewards.push_back(static_cast<double>(uniform_index(rng, 2)));
      pe.logp_old.push_back(-uniform01(rng) * 3.0);
      pe.logp_new.push_back(pe.logp_old.back() + 0.6 * standard_normal(rng));
    }
    const double kl = uniform01(rng);
    const auto adv = group_advantages(g);
    double want = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      want += clip_term(std::exp(pe.logp_new[i] - pe.logp_old[i]), adv[i], g.clip_eps);
    }
    want = want / static_cast<double>(n) - kl_gate(g) * kl;
    EXPECT_NEAR(grpo_objective(pe, g, kl), want, 1e-12);
  }
}

TEST(Objective, ClipMonotonicity) {
  // Rollout 0 has A > 0, rollout 1 has A < 0; only one ratio moves at a time.
  const auto g = group({1, 0});
  for (int moving : {0, 1}) {
    double prev = 0.0;
    for (int t = 0; t < 300; ++t) {
      const double rho = 0.01 + 0.01 * t;
      PolicyEval pe;
      pe.logp_old = {-1.0, -1.0};
      pe.logp_new = {-1.0, -1.0};
      pe.logp_new[moving] += std::log(rho);
      const double obj = grpo_objective(pe, g, 0.0);
      if (t > 0) {
        if (moving == 0) EXPECT_GE(obj, prev - 1e-12);
        else EXPECT_LE(obj, prev + 1e-12);
      }
      if (moving == 0 && rho >= 1.2) EXPECT_NEAR(obj, (1.2 - 1.0) / 2.0, 1e-6);
      if (moving == 1 && rho <= 0.8) EXPECT_NEAR(obj, (1.0 - 0.8) / 2.0, 1e-6);
      prev = obj;
    }
  }
}

TEST(Objective, LengthMismatch) {
  PolicyEval pe;
  pe.logp_new = {0.0};
  pe.logp_old = {0.0, 0.0};
  EXPECT_EQ(error_code_of([&] { grpo_objective(pe, group({0, 1}), 0.0); }), Errc::length_mismatch);
}

TEST(TwoAction, LogProbabilitiesAndKl) {
  const TwoActionPolicy p{0.7};
  EXPECT_NEAR(std::exp(p.logp(0)) + std::exp(p.logp(1)), 1.0, 1e-15);
  EXPECT_NEAR(std::exp(p.logp(0)), 1.0 / (1.0 + std::exp(-0.7)), 1e-15);
  const TwoActionPolicy far{-40.0};
  EXPECT_TRUE(std::isfinite(far.logp(0)));
  EXPECT_NEAR(p.kl_to(p), 0.0, 1e-15);
  for (double th : {-3.0, -0.4, 0.0, 1.3, 5.0}) {
    const TwoActionPolicy a{th}, ref{0.3};
    const double h = 1e-6;
    const double num = (TwoActionPolicy{th + h}.kl_to(ref) - TwoActionPolicy{th - h}.kl_to(ref)) / (2 * h);
    EXPECT_NEAR(a.dkl_to(ref), num, 1e-7);
    const double dl = (TwoActionPolicy{th + h}.logp(1) - TwoActionPolicy{th - h}.logp(1)) / (2 * h);
    EXPECT_NEAR(a.dlogp(1), dl, 1e-7);
  }
}

TEST(Gradient, MatchesCentralDifference) {
  Rng rng = derive_rng(8, 8);
  int checked = 0;
  for (int t = 0; checked < 200 && t < 5000; ++t) {
    const bool open = t % 2 == 0;
    const auto c = random_case(rng, open);
    const double theta = c.old_policy.theta + 0.5 * standard_normal(rng);
    const double h = 1e-6;
    // Skip points within h of a clip boundary, where the objective has a kink.
    bool near_kink = false;
    for (int a : c.actions) {
      for (double th : {theta - 2 * h, theta + 2 * h}) {
        const double rho = std::exp(TwoActionPolicy{th}.logp(a) - c.old_policy.logp(a));
        const double rho0 = std::exp(TwoActionPolicy{theta}.logp(a) - c.old_policy.logp(a));
        if ((rho - 1.2) * (rho0 - 1.2) <= 0 || (rho - 0.8) * (rho0 - 0.8) <= 0) near_kink = true;
      }
    }
    if (near_kink) continue;
    const double num = (grpo_objective_at(c, theta + h) - grpo_objective_at(c, theta - h)) / (2 * h);
    const double ana = grpo_objective_gradient(c, theta);
    const double scale = std::max({std::abs(num), std::abs(ana), 1e-3});
    EXPECT_LE(std::abs(num - ana) / scale, 1e-5) << "case " << t << " gate " << open;
    EXPECT_EQ(kl_gate(c.group) > 0.0, open);
    ++checked;
  }
  EXPECT_EQ(checked, 200);
}
