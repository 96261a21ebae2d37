#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace noisy_tunnel {

/// Raised when an integrator cannot meet its tolerance without shrinking the
/// step below the representable resolution of t.
class StepSizeUnderflow : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct Rk45Options {
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  double initial_step = 1e-3;
  double max_step = 0.0; // 0: unbounded
  long max_steps = 50'000'000;
};

/// Adaptive Dormand-Prince 5(4) integration of dy/dt = f(t, y) from
/// times.front() through every entry of `times`. Steps are clipped so each
/// output time is hit exactly; the state at times.front() is returned
/// unchanged. `Vec` is any fixed- or dynamic-size Eigen column vector.
template <class Vec, class Rhs>
std::vector<Vec> integrate_rk45(Rhs &&f, const Vec &y0, std::span<const double> times,
                                const Rk45Options &opt = {}) {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                          b6 = 11.0 / 84;
  // b - b_hat (error weights)
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  std::vector<Vec> out;
  if (times.empty())
    return out;
  out.reserve(times.size());
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1]))
      throw std::invalid_argument("integrate_rk45: output times must be strictly increasing");

  Vec y = y0;
  double t = times.front();
  out.push_back(y);

  double h = opt.initial_step;
  Vec k1 = f(t, y);
  long steps = 0;
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double target = times[i];
    while (t < target) {
      if (opt.max_step > 0.0)
        h = std::min(h, opt.max_step);
      bool last = false;
      const double h_unclipped = h;
      if (t + 1.01 * h >= target) {
        h = target - t;
        last = true;
      }
      if (h <= 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t)))
        throw StepSizeUnderflow("integrate_rk45: step size underflow at t = " + std::to_string(t));
      if (++steps > opt.max_steps)
        throw StepSizeUnderflow("integrate_rk45: step budget exhausted at t = " + std::to_string(t));

      const Vec k2 = f(t + c2 * h, y + h * (a21 * k1));
      const Vec k3 = f(t + c3 * h, y + h * (a31 * k1 + a32 * k2));
      const Vec k4 = f(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
      const Vec k5 = f(t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
      const Vec k6 = f(t + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
      const Vec y_new = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      const Vec k7 = f(t + h, y_new);
      const Vec err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

      double err_norm = 0.0;
      for (Eigen::Index j = 0; j < y.size(); ++j) {
        const double scale = opt.abs_tol + opt.rel_tol * std::max(std::abs(y[j]), std::abs(y_new[j]));
        const double r = err[j] / scale;
        err_norm += r * r;
      }
      err_norm = std::sqrt(err_norm / static_cast<double>(y.size()));

      if (err_norm <= 1.0) {
        t = last ? target : t + h;
        y = y_new;
        k1 = k7; // FSAL
      }
      const double factor =
          err_norm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err_norm, -0.2), 0.2, 5.0);
      h *= err_norm <= 1.0 ? factor : std::min(factor, 1.0);
      if (last && err_norm <= 1.0)
        h = std::max(h, h_unclipped);
    }
    out.push_back(y);
  }
  return out;
}

} // namespace noisy_tunnel
