#pragma once

#include "noisy_tunnel/state_algebra.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace noisy_tunnel {

/// Parameters of H = (eps + eps(t)) sz / 2 - (delta0 + delta1 eta(t)) sx / 2.
/// eps(t) is white Gaussian noise of intensity kappa, eta(t) a +-1 telegraph
/// signal flipping at rate nu. Times are in units of 1/delta0 when delta0 = 1.
struct ModelParams {
  double epsilon = 0.0;
  double kappa = 0.1;
  double delta0 = 1.0;
  double delta1 = 0.0;
  double nu = 1.0;

  /// Kubo number K = delta1 / nu.
  [[nodiscard]] double kubo() const { return delta1 / nu; }

  /// nu > 0, kappa >= 0, delta1 >= 0, all finite. nu = 0 (frozen telegraph
  /// signal) is not covered by the correlator closure and is rejected.
  void validate() const {
    if (!std::isfinite(epsilon) || !std::isfinite(kappa) || !std::isfinite(delta0) ||
        !std::isfinite(delta1) || !std::isfinite(nu))
      throw std::invalid_argument("ModelParams: non-finite parameter");
    if (!(nu > 0.0))
      throw std::invalid_argument("ModelParams: nu must be > 0");
    if (kappa < 0.0)
      throw std::invalid_argument("ModelParams: kappa must be >= 0");
    if (delta1 < 0.0)
      throw std::invalid_argument("ModelParams: delta1 must be >= 0");
  }

  /// Params for a given Kubo number at fixed delta1: nu = delta1 / K.
  [[nodiscard]] static ModelParams with_kubo(double epsilon, double kappa, double delta0, double delta1,
                                             double kubo) {
    if (!(kubo > 0.0) || !(delta1 > 0.0))
      throw std::invalid_argument("with_kubo: K and delta1 must be > 0");
    ModelParams p{epsilon, kappa, delta0, delta1, delta1 / kubo};
    p.validate();
    return p;
  }
};

using Generator = Eigen::Matrix<double, 6, 6>;
using BlochGenerator = Eigen::Matrix<double, 3, 3>;

/// Augmented state (<<Px>>, <<Py>>, <<Pz>>, <<eta Px>>, <<eta Py>>, <<eta Pz>>).
using AugmentedState = Eigen::Matrix<double, 6, 1>;

/// Noise-averaged generator of dY/dt = M Y.
inline Generator build_generator(const ModelParams &p) {
  p.validate();
  const double e = p.epsilon;
  const double g = 4.0 * p.kappa;
  const double d0 = p.delta0;
  const double d1 = p.delta1;
  const double r = 2.0 * p.nu;
  Generator m;
  // clang-format off
  m <<  -g,  -e,  0.0,  0.0,    0.0,    0.0,
         e,  -g,   d0,  0.0,    0.0,     d1,
       0.0, -d0,  0.0,  0.0,    -d1,    0.0,
       0.0, 0.0,  0.0, -r - g,   -e,    0.0,
       0.0, 0.0,   d1,    e,  -r - g,    d0,
       0.0, -d1,  0.0,  0.0,    -d0,     -r;
  // clang-format on
  return m;
}

/// Bloch generator for a fixed tunneling amplitude `delta`, i.e. the
/// Gaussian-averaged Lindblad dynamics with a frozen barrier.
inline BlochGenerator bloch_generator(double epsilon, double kappa, double delta) {
  BlochGenerator b;
  // clang-format off
  b << -4.0 * kappa, -epsilon,   0.0,
           epsilon, -4.0 * kappa, delta,
               0.0,     -delta,   0.0;
  // clang-format on
  return b;
}

/// Initial correlators vanish: the state is independent of the zero-mean noise.
inline AugmentedState initial_augmented(const BlochVector &p0) {
  AugmentedState y;
  y << p0.px, p0.py, p0.pz, 0.0, 0.0, 0.0;
  return y;
}

inline BlochVector bloch_part(const AugmentedState &y) { return {y[0], y[1], y[2]}; }

} // namespace noisy_tunnel
