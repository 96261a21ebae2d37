#pragma once

#include "noisy_tunnel/dynamics.hpp"
#include "noisy_tunnel/expm.hpp"
#include "noisy_tunnel/model.hpp"
#include "noisy_tunnel/state_algebra.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace noisy_tunnel {

/// A maximal time interval on which the trace distance grows.
struct Revival {
  double t_start = 0.0;
  double t_end = 0.0;
  double gain = 0.0; // D(t_end) - D(t_start)
};

struct BlpResult {
  double n_value = 0.0;
  std::vector<Revival> revival_intervals;
  double horizon = 0.0;
  double grid_step = 0.0;
  /// ||dY(horizon)|| / ||dY(0)|| for the difference of the two augmented states.
  double tail_ratio = 0.0;
  /// Set when the tail ratio exceeds 1e-8, i.e. the horizon cut off live dynamics.
  bool horizon_warning = false;
};

struct BlpOptions {
  double dt = 1e-3;
  /// Fixed horizon. When unset, the horizon is taken where the slowest
  /// excited decay mode has fallen by `envelope_cutoff`.
  std::optional<double> horizon;
  double envelope_cutoff = 1e-10;
  double max_horizon = 20000.0;
};

struct DecayHorizon {
  double horizon = 0.0;
  bool decays = false; // false: capped at max_horizon
};

namespace detail {

// Orthonormal basis of the Krylov space span{v, Mv, M^2 v, ...}.
inline Eigen::MatrixXd krylov_basis(const Generator &m, const AugmentedState &v, double tol = 1e-10) {
  Eigen::MatrixXd q(6, 0);
  AugmentedState w = v;
  for (int k = 0; k < 6; ++k) {
    const double scale = w.norm();
    for (int pass = 0; pass < 2; ++pass)
      for (Eigen::Index j = 0; j < q.cols(); ++j)
        w -= q.col(j).dot(w) * q.col(j);
    if (w.norm() <= tol * std::max(scale, 1e-300) || w.norm() == 0.0)
      break;
    q.conservativeResize(6, q.cols() + 1);
    q.col(q.cols() - 1) = w / w.norm();
    w = m * q.col(q.cols() - 1);
  }
  return q;
}

} // namespace detail

/// Time after which exp(M t) dy0 has decayed by `cutoff`, using the spectrum
/// of M restricted to the Krylov space that dy0 actually excites, extended
/// geometrically to absorb polynomial (defective) prefactors.
inline DecayHorizon decay_horizon(const Generator &m, const AugmentedState &dy0, double cutoff,
                                  double max_horizon) {
  const double n0 = dy0.norm();
  if (n0 == 0.0)
    return {0.0, true};
  const Eigen::MatrixXd q = detail::krylov_basis(m, dy0);
  const Eigen::MatrixXd h = q.transpose() * m * q;
  const double abscissa = spectral_abscissa(h);
  if (abscissa >= -1e-12)
    return {max_horizon, false};

  auto ratio = [&](double t) { return (expm(m * t) * dy0).norm() / n0; };
  double t = std::log(1.0 / cutoff) / -abscissa;
  while (t < max_horizon && (ratio(t) > cutoff || ratio(1.1 * t) > cutoff))
    t *= 1.25;
  if (t >= max_horizon)
    return {max_horizon, false};
  return {t, true};
}

namespace detail {

struct PairState {
  AugmentedState a;
  AugmentedState b;
};

// Signed growth indicator of D = |Pa - Pb| / 2: dP . dP' minus a relative
// dead band, so tangential motion (exactly zero growth) never counts as revival.
inline double growth_indicator(const Generator &m, const PairState &s) {
  const AugmentedState dy = s.a - s.b;
  const Eigen::Vector3d dp = dy.head<3>();
  const Eigen::Vector3d dp_dot = (m * dy).head<3>();
  return dp.dot(dp_dot) - 1e-12 * dp.norm() * dp_dot.norm();
}

inline double distance(const PairState &s) { return trace_distance(bloch_part(s.a), bloch_part(s.b)); }

// Root of the growth indicator on [0, h] starting from `s`, by Illinois
// regula falsi on the (smooth) indicator.
inline double refine_root(const Generator &m, const PairState &s, double h, double g_lo, double g_hi) {
  auto eval = [&](double tau) {
    const Generator e = expm(m * tau);
    return growth_indicator(m, {e * s.a, e * s.b});
  };
  double lo = 0.0, hi = h;
  int side = 0;
  for (int it = 0; it < 100 && hi - lo > 1e-15 * (1.0 + h); ++it) {
    double mid = (lo * g_hi - hi * g_lo) / (g_hi - g_lo);
    if (!(mid > lo && mid < hi))
      mid = 0.5 * (lo + hi);
    const double g_mid = eval(mid);
    if (g_mid == 0.0)
      return mid;
    if ((g_mid > 0.0) == (g_lo > 0.0)) {
      lo = mid;
      g_lo = g_mid;
      if (side == -1)
        g_hi *= 0.5;
      side = -1;
    } else {
      hi = mid;
      g_hi = g_mid;
      if (side == 1)
        g_lo *= 0.5;
      side = 1;
    }
  }
  return 0.5 * (lo + hi);
}

} // namespace detail

/// Information backflow N = sum over growth intervals of the increase of the
/// trace distance between the evolutions of rho_a and rho_b under generator m.
///
/// The pair is propagated exactly on a uniform grid of step ~dt (exp(M dt)
/// applied repeatedly). Every sign change of dD/dt between grid points is
/// located by root finding on the analytic derivative, so the only grid
/// dependence left is missing a pair of extrema inside a single step.
inline BlpResult blp_measure(const Generator &m, const DensityMatrix &rho_a, const DensityMatrix &rho_b,
                             const BlpOptions &opt = {}) {
  if (!(opt.dt > 0.0))
    throw std::invalid_argument("blp_measure: dt must be > 0");
  if (opt.horizon && !(*opt.horizon > 0.0))
    throw std::invalid_argument("blp_measure: horizon must be > 0");
  if (!rho_a.is_physical() || !rho_b.is_physical())
    throw std::invalid_argument("blp_measure: initial states must be valid density matrices");
  if (trace_distance(rho_a, rho_b) <= 1e-12)
    throw std::invalid_argument("blp_measure: initial states must differ");

  detail::PairState s{initial_augmented(density_to_bloch(rho_a)), initial_augmented(density_to_bloch(rho_b))};
  const AugmentedState dy0 = s.a - s.b;

  BlpResult res;
  res.horizon = opt.horizon ? *opt.horizon : decay_horizon(m, dy0, opt.envelope_cutoff, opt.max_horizon).horizon;
  const auto steps = static_cast<long>(std::ceil(res.horizon / opt.dt - 1e-9));
  res.grid_step = res.horizon / static_cast<double>(std::max(steps, 1L));
  const Generator step = expm(m * res.grid_step);

  double g = detail::growth_indicator(m, s);
  bool open = g > 0.0;
  double start_t = 0.0;
  double start_d = detail::distance(s);

  auto close = [&](double t_end, double d_end) {
    const double gain = d_end - start_d;
    if (gain > 0.0) {
      res.revival_intervals.push_back({start_t, t_end, gain});
      res.n_value += gain;
    }
  };

  for (long k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * res.grid_step;
    detail::PairState next{step * s.a, step * s.b};
    const double g_next = detail::growth_indicator(m, next);
    if ((g_next > 0.0) != open) {
      const double tau = detail::refine_root(m, s, res.grid_step, g, g_next);
      const Generator e = expm(m * tau);
      const double d_root = detail::distance({e * s.a, e * s.b});
      if (open) {
        close(t + tau, d_root);
      } else {
        start_t = t + tau;
        start_d = d_root;
      }
      open = !open;
    }
    s = next;
    g = g_next;
  }
  if (open)
    close(res.horizon, detail::distance(s));
  res.tail_ratio = (s.a - s.b).norm() / dy0.norm();
  if (res.tail_ratio > 1e-8)
    res.horizon_warning = true;
  return res;
}

inline BlpResult blp_measure(const ModelParams &p, const DensityMatrix &rho_a, const DensityMatrix &rho_b,
                             const BlpOptions &opt = {}) {
  return blp_measure(build_generator(p), rho_a, rho_b, opt);
}

/// The default pair: rho1 = |1><1| and rho3 = |0><0|.
inline BlpResult blp_measure(const ModelParams &p, const BlpOptions &opt = {}) {
  return blp_measure(p, canonical_state(CanonicalState::rho1), canonical_state(CanonicalState::rho3), opt);
}

struct ConvergedBlp {
  BlpResult result;        // at dt / 2
  double refinement_delta; // |N(dt) - N(dt/2)|
};

/// N at dt and dt/2 on a common horizon.
inline ConvergedBlp blp_measure_converged(const ModelParams &p, const DensityMatrix &rho_a,
                                          const DensityMatrix &rho_b, const BlpOptions &opt = {}) {
  BlpResult coarse = blp_measure(p, rho_a, rho_b, opt);
  BlpOptions fine_opt = opt;
  fine_opt.dt = 0.5 * opt.dt;
  fine_opt.horizon = coarse.horizon;
  BlpResult fine = blp_measure(p, rho_a, rho_b, fine_opt);
  const double delta = std::abs(fine.n_value - coarse.n_value);
  return {std::move(fine), delta};
}

struct PairSearchResult {
  BlpResult best;
  std::size_t best_index = 0;
  std::vector<double> n_values;
};

/// Sensitivity check beyond the default pair: N for each antipodal pair
/// (n, -n) with n drawn from `axes` (normalized), keeping the largest.
/// This is a coarse search over a user list, not a maximization over all pairs.
inline PairSearchResult blp_max_over_antipodal_pairs(const ModelParams &p, std::span<const BlochVector> axes,
                                                     const BlpOptions &opt = {}) {
  if (axes.empty())
    throw std::invalid_argument("blp_max_over_antipodal_pairs: no axes given");
  PairSearchResult out;
  for (std::size_t i = 0; i < axes.size(); ++i) {
    const double r = axes[i].norm();
    if (!(r > 0.0))
      throw std::invalid_argument("blp_max_over_antipodal_pairs: zero axis");
    const BlochVector n{axes[i].px / r, axes[i].py / r, axes[i].pz / r};
    BlpResult res = blp_measure(p, bloch_to_density(n), bloch_to_density({-n.px, -n.py, -n.pz}), opt);
    out.n_values.push_back(res.n_value);
    if (i == 0 || res.n_value > out.best.n_value) {
      out.best = std::move(res);
      out.best_index = i;
    }
  }
  return out;
}

/// Closed-form N for the telegraph-only regime (epsilon = kappa = delta0 = 0)
/// as a function of the Kubo number: 0 for K <= 1, else 1/(e^{pi/sqrt(K^2-1)} - 1).
inline double blp_closed_form(double kubo) {
  if (kubo <= 1.0)
    return 0.0;
  return 1.0 / std::expm1(std::numbers::pi / std::sqrt(kubo * kubo - 1.0));
}

} // namespace noisy_tunnel
