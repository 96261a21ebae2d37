#pragma once

#include "noisy_tunnel/expm.hpp"
#include "noisy_tunnel/model.hpp"
#include "noisy_tunnel/rk45.hpp"
#include "noisy_tunnel/state_algebra.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace noisy_tunnel {

enum class Backend { expm, rk45 };

inline std::string_view to_string(Backend b) { return b == Backend::expm ? "expm" : "rk45"; }

inline Backend parse_backend(std::string_view s) {
  if (s == "expm")
    return Backend::expm;
  if (s == "rk45")
    return Backend::rk45;
  throw std::invalid_argument("unknown backend '" + std::string(s) + "' (expected expm or rk45)");
}

struct Trajectory {
  std::vector<double> times;
  std::vector<AugmentedState> states;
  ModelParams params;
  std::string initial_tag;

  [[nodiscard]] std::size_t size() const { return times.size(); }
  [[nodiscard]] BlochVector bloch(std::size_t i) const { return bloch_part(states[i]); }
  [[nodiscard]] DensityMatrix density(std::size_t i) const { return bloch_to_density(bloch(i)); }
};

/// Uniform grid 0, t_max/(count-1), ..., t_max.
inline std::vector<double> uniform_grid(double t_max, std::size_t count) {
  if (count < 2 || !(t_max > 0.0))
    throw std::invalid_argument("uniform_grid: need count >= 2 and t_max > 0");
  std::vector<double> g(count);
  for (std::size_t i = 0; i < count; ++i)
    g[i] = t_max * static_cast<double>(i) / static_cast<double>(count - 1);
  return g;
}

inline void check_time_grid(std::span<const double> times) {
  if (times.empty())
    throw std::invalid_argument("time grid is empty");
  if (times.front() != 0.0)
    throw std::invalid_argument("time grid must start at 0");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1]))
      throw std::invalid_argument("time grid must be strictly increasing");
}

/// Solve dY/dt = M Y from Y(0) = y0 on `times` (which must start at 0).
/// Throws StepSizeUnderflow if the adaptive backend cannot proceed.
inline std::vector<AugmentedState> propagate(const Generator &m, const AugmentedState &y0,
                                             std::span<const double> times, Backend backend) {
  check_time_grid(times);
  if (backend == Backend::rk45) {
    auto rhs = [&m](double, const AugmentedState &y) -> AugmentedState { return m * y; };
    return integrate_rk45(rhs, y0, times);
  }
  std::vector<AugmentedState> out;
  out.reserve(times.size());
  out.push_back(y0);
  for (std::size_t i = 1; i < times.size(); ++i)
    out.push_back(expm(m * times[i]) * y0);
  return out;
}

inline Trajectory evolve(const ModelParams &p, const DensityMatrix &rho0, std::span<const double> times,
                         Backend backend = Backend::expm, std::string tag = {}) {
  if (!rho0.is_physical())
    throw std::invalid_argument("evolve: initial state is not a valid density matrix");
  const Generator m = build_generator(p);
  Trajectory tr;
  tr.times.assign(times.begin(), times.end());
  tr.states = propagate(m, initial_augmented(density_to_bloch(rho0)), times, backend);
  tr.params = p;
  tr.initial_tag = std::move(tag);
  return tr;
}

inline Trajectory evolve(const ModelParams &p, CanonicalState s, std::span<const double> times,
                         Backend backend = Backend::expm) {
  return evolve(p, canonical_state(s), times, backend, std::string(to_string(s)));
}

/// Largest real part of the spectrum of m.
template <class Derived> double spectral_abscissa(const Eigen::MatrixBase<Derived> &m) {
  Eigen::EigenSolver<typename Derived::PlainObject> es(m, false);
  return es.eigenvalues().real().maxCoeff();
}

namespace detail {
// Coherence of the unbiased static-barrier problem whose transverse
// amplitude is damped at `damping` with natural frequency delta0.
inline double damped_static_coherence(double damping, double delta0, CanonicalState s, double t) {
  const double omega = std::sqrt(delta0 * delta0 - damping * damping);
  const double env = std::exp(-damping * t) * delta0 / omega;
  switch (s) {
  case CanonicalState::rho1:
    return std::abs(env * std::sin(omega * t));
  case CanonicalState::rho2:
    return std::abs(env * std::cos(omega * t + std::atan(damping / omega)));
  case CanonicalState::rho3:
    break;
  }
  throw std::invalid_argument("static coherence closed form defined for rho1 and rho2 only");
}
} // namespace detail

/// Closed-form l1 coherence for epsilon = delta1 = 0 in its commonly quoted
/// form: envelope exp(-kappa t), Omega = sqrt(delta0^2 - kappa^2),
/// rho1 -> |e^{-kt} sin(Omega t) delta0/Omega|,
/// rho2 -> |e^{-kt} (delta0/Omega) cos(Omega t + atan(kappa/Omega))|.
///
/// Note this envelope corresponds to a transverse dephasing rate of 2 kappa.
/// build_generator dephases at 4 kappa, whose exact solution is
/// static_coherence_exact.
inline double static_coherence_closed_form(double kappa, double delta0, CanonicalState s, double t) {
  if (!(delta0 > 0.0) || kappa < 0.0 || !(kappa < delta0))
    throw std::invalid_argument("static_coherence_closed_form: requires 0 <= kappa < delta0");
  return detail::damped_static_coherence(kappa, delta0, s, t);
}

/// Exact l1 coherence of build_generator's dynamics for epsilon = delta1 = 0:
/// the transverse decay 4 kappa gives envelope exp(-2 kappa t) and
/// Omega = sqrt(delta0^2 - 4 kappa^2). Requires 2 kappa < delta0.
inline double static_coherence_exact(double kappa, double delta0, CanonicalState s, double t) {
  if (!(delta0 > 0.0) || kappa < 0.0 || !(2.0 * kappa < delta0))
    throw std::invalid_argument("static_coherence_exact: requires 0 <= 2 kappa < delta0");
  return detail::damped_static_coherence(2.0 * kappa, delta0, s, t);
}

/// Trace distance of the rho1/rho3 pair when only the telegraph noise acts
/// (epsilon = kappa = delta0 = 0): |e^{-nu t}(cos(g t) + (nu/g) sin(g t))| with
/// g = sqrt(delta1^2 - nu^2), continued to e^{-nu t}(1 + nu t) at g = 0 and to
/// the hyperbolic form for nu > delta1.
inline double rtn_only_trace_distance(double delta1, double nu, double t) {
  if (!(nu > 0.0) || delta1 < 0.0 || t < 0.0)
    throw std::invalid_argument("rtn_only_trace_distance: requires nu > 0, delta1 >= 0, t >= 0");
  const double g2 = delta1 * delta1 - nu * nu;
  const double scale = std::max(delta1 * delta1, nu * nu);
  if (std::abs(g2) <= 1e-14 * scale)
    return std::exp(-nu * t) * (1.0 + nu * t);
  if (g2 > 0.0) {
    const double g = std::sqrt(g2);
    return std::abs(std::exp(-nu * t) * (std::cos(g * t) + nu / g * std::sin(g * t)));
  }
  const double g = std::sqrt(-g2);
  const double x = g * t;
  if (x < 1e-3) {
    // cosh x + (nu t) sinh(x)/x, series in x
    const double x2 = x * x;
    return std::exp(-nu * t) * (1.0 + x2 / 2.0 + nu * t * (1.0 + x2 / 6.0));
  }
  // cosh and sinh expanded into decaying exponentials to avoid overflow
  return 0.5 * ((1.0 + nu / g) * std::exp((g - nu) * t) + (1.0 - nu / g) * std::exp(-(g + nu) * t));
}

} // namespace noisy_tunnel
