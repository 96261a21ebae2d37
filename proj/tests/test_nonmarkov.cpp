#include "noisy_tunnel/nonmarkov.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

using namespace noisy_tunnel;

namespace {

// Sum of positive increments of D sampled on `grid`.
template <class F> double positive_increments(F &&d, const std::vector<double> &grid) {
  double sum = 0.0;
  double prev = d(grid.front());
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double cur = d(grid[i]);
    if (cur > prev)
      sum += cur - prev;
    prev = cur;
  }
  return sum;
}

// Uniform grid of step h plus the zeros of D in the underdamped telegraph-only
// case, g t_k = k pi - atan(g / nu), where |.| puts a cusp that sampling would clip.
std::vector<double> grid_with_zeros(double nu, double horizon, double h) {
  const double g = std::sqrt(1.0 - nu * nu);
  std::vector<double> grid;
  for (double t = 0.0; t <= horizon; t += h)
    grid.push_back(t);
  for (int k = 1;; ++k) {
    const double tk = (k * std::numbers::pi - std::atan(g / nu)) / g;
    if (tk > horizon)
      break;
    grid.push_back(tk);
  }
  std::sort(grid.begin(), grid.end());
  return grid;
}

ModelParams telegraph_only(double k) { return ModelParams::with_kubo(0.0, 0.0, 0.0, 1.0, k); }

} // namespace

TEST(BlpClosedForm, Values) {
  EXPECT_EQ(blp_closed_form(0.5), 0.0);
  EXPECT_EQ(blp_closed_form(1.0), 0.0);
  EXPECT_NEAR(blp_closed_form(2.0), 1.0 / (std::exp(std::numbers::pi / std::sqrt(3.0)) - 1.0), 1e-15);
  EXPECT_NEAR(blp_closed_form(2.0), 0.19484, 1e-4);
  // Geometric series of revival heights e^{-pi/sqrt(K^2-1)} per half period.
  const double q = std::exp(-std::numbers::pi / std::sqrt(15.0));
  EXPECT_NEAR(blp_closed_form(4.0), q / (1.0 - q), 1e-14);
}

TEST(BlpClosedForm, AgreesWithBruteForceRevivalSum) {
  for (double k : {1.5, 2.0, 4.0}) {
    const double nu = 1.0 / k;
    const double brute = positive_increments([&](double t) { return rtn_only_trace_distance(1.0, nu, t); },
                                             grid_with_zeros(nu, 40.0 / nu, 1e-3));
    EXPECT_NEAR(brute, blp_closed_form(k), 1e-5 * blp_closed_form(k)) << "K " << k;
  }
}

TEST(Blp, TelegraphOnlyMatchesClosedForm) {
  for (double k : {1.5, 2.0, 4.0, 8.0}) {
    const BlpResult r = blp_measure(telegraph_only(k));
    EXPECT_NEAR(r.n_value, blp_closed_form(k), 1e-3 * blp_closed_form(k)) << "K " << k;
    EXPECT_FALSE(r.horizon_warning);
  }
}

TEST(Blp, NoBackflowAtOrBelowCriticalKubo) {
  for (double k : {0.25, 0.5, 1.0}) {
    const BlpResult r = blp_measure(telegraph_only(k));
    EXPECT_LE(r.n_value, 1e-9) << "K " << k;
  }
}

TEST(Blp, StaticBarrierIsMarkovian) {
  for (double eps : {0.0, 2.0}) {
    const BlpResult r = blp_measure(ModelParams{eps, 0.1, 1.0, 0.0, 1.0});
    EXPECT_LE(r.n_value, 1e-9) << "epsilon " << eps;
    EXPECT_TRUE(r.revival_intervals.empty());
  }
}

TEST(Blp, GrowsWithKuboInTelegraphOnlyRegime) {
  double prev = 0.0;
  for (double k : {1.5, 2.0, 3.0, 4.0, 6.0, 8.0}) {
    const double n = blp_measure(telegraph_only(k)).n_value;
    EXPECT_GT(n, prev) << "K " << k;
    prev = n;
  }
}

TEST(Blp, IntervalGainsSumToN) {
  const ModelParams p = ModelParams::with_kubo(0.5, 0.05, 1.0, 1.0, 4.0);
  const BlpResult r = blp_measure(p);
  ASSERT_FALSE(r.revival_intervals.empty());
  double sum = 0.0;
  for (const auto &iv : r.revival_intervals) {
    EXPECT_GT(iv.gain, 0.0);
    EXPECT_LT(iv.t_start, iv.t_end);
    sum += iv.gain;
  }
  EXPECT_NEAR(sum, r.n_value, 1e-15);
  for (std::size_t i = 1; i < r.revival_intervals.size(); ++i)
    EXPECT_GE(r.revival_intervals[i].t_start, r.revival_intervals[i - 1].t_end);
}

TEST(Blp, AgreesWithBruteForceOnGeneralParameters) {
  const ModelParams p = ModelParams::with_kubo(2.0, 0.05, 1.0, 1.0, 8.0);
  const BlpResult r = blp_measure(p);
  const Generator m = build_generator(p);
  const AugmentedState a0 = initial_augmented({0, 0, 1});
  const AugmentedState b0 = initial_augmented({0, 0, -1});
  const double h = 2e-3;
  const Generator step = expm(m * h);
  AugmentedState a = a0, b = b0;
  double prev = 1.0, brute = 0.0;
  for (double t = h; t <= r.horizon; t += h) {
    a = step * a;
    b = step * b;
    const double d = trace_distance(bloch_part(a), bloch_part(b));
    if (d > prev)
      brute += d - prev;
    prev = d;
  }
  EXPECT_NEAR(r.n_value, brute, 1e-6);
}

TEST(Blp, SwapInvariance) {
  const ModelParams p = ModelParams::with_kubo(2.0, 0.0, 1.0, 1.0, 4.0);
  const auto r1 = canonical_state(CanonicalState::rho1);
  const auto r3 = canonical_state(CanonicalState::rho3);
  EXPECT_NEAR(blp_measure(p, r1, r3).n_value, blp_measure(p, r3, r1).n_value, 1e-12);
}

TEST(Blp, GridHalvingIsStable) {
  for (double k : {2.0, 4.0}) {
    const ConvergedBlp c = blp_measure_converged(ModelParams::with_kubo(2.0, 0.05, 1.0, 1.0, k),
                                                 canonical_state(CanonicalState::rho1),
                                                 canonical_state(CanonicalState::rho3));
    EXPECT_LT(c.refinement_delta, 1e-6) << "K " << k;
  }
}

TEST(Blp, HorizonReachesDecay) {
  const BlpResult r = blp_measure(ModelParams::with_kubo(0.0, 0.1, 1.0, 1.0, 2.0));
  EXPECT_LE(r.tail_ratio, 1e-8);
  EXPECT_FALSE(r.horizon_warning);
  EXPECT_GT(r.horizon, 0.0);
}

TEST(Blp, NonDecayingDynamicsWarns) {
  // Pure coherent rotation never decays: the horizon is capped and flagged.
  BlpOptions opt;
  opt.max_horizon = 50.0;
  const BlpResult r = blp_measure(ModelParams{0.0, 0.0, 1.0, 0.0, 1.0}, opt);
  EXPECT_DOUBLE_EQ(r.horizon, 50.0);
  EXPECT_TRUE(r.horizon_warning);
}

TEST(Blp, AntipodalPairSearchIncludesDefaultPair) {
  const ModelParams p = ModelParams::with_kubo(0.0, 0.0, 0.0, 1.0, 2.0);
  const std::vector<BlochVector> axes{{0, 0, 1}, {1, 0, 0}, {0, 1, 0}, {1, 1, 1}};
  // the x pair is a fixed point of rotations about x and never decays
  BlpOptions opt;
  opt.max_horizon = 200.0;
  const PairSearchResult s = blp_max_over_antipodal_pairs(p, axes, opt);
  EXPECT_EQ(s.n_values[1], 0.0);
  ASSERT_EQ(s.n_values.size(), axes.size());
  EXPECT_NEAR(s.n_values[0], blp_closed_form(2.0), 2e-4);
  EXPECT_GE(s.best.n_value, s.n_values[0]);
  EXPECT_THROW(blp_max_over_antipodal_pairs(p, std::vector<BlochVector>{}), std::invalid_argument);
}

TEST(Blp, InputValidation) {
  const ModelParams p;
  const auto r1 = canonical_state(CanonicalState::rho1);
  EXPECT_THROW(blp_measure(p, r1, r1), std::invalid_argument);
  BlpOptions bad_dt;
  bad_dt.dt = 0.0;
  EXPECT_THROW(blp_measure(p, bad_dt), std::invalid_argument);
  BlpOptions bad_horizon;
  bad_horizon.horizon = -1.0;
  EXPECT_THROW(blp_measure(p, bad_horizon), std::invalid_argument);
  EXPECT_THROW(blp_measure(p, DensityMatrix{0.9, 0, 0, 0.9}, r1), std::invalid_argument);
  ModelParams frozen = p;
  frozen.nu = 0.0;
  EXPECT_THROW(blp_measure(frozen), std::invalid_argument);
}
