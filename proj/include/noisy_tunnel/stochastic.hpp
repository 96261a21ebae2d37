#pragma once

// Monte Carlo oracles for the noise-averaged dynamics: explicit telegraph
// realizations propagated with the Gaussian-averaged Lindblad generator, and
// fully sampled trajectories where both noises are realized.

#include "noisy_tunnel/dynamics.hpp"
#include "noisy_tunnel/expm.hpp"
#include "noisy_tunnel/model.hpp"
#include "noisy_tunnel/parallel.hpp"
#include "noisy_tunnel/state_algebra.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace noisy_tunnel {

using Engine = std::mt19937_64;

enum class StreamPurpose : std::uint32_t { telegraph = 1, rtn_lindblad = 2, full_sde = 3, statistics = 4 };

/// Independent generator for realization `index` of a run seeded with `seed`.
inline Engine make_stream(std::uint64_t seed, std::uint64_t index, StreamPurpose purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    static_cast<std::uint32_t>(purpose)};
  return Engine(seq);
}

/// One telegraph path on [0, horizon]: eta(0) = initial_sign, flipping at each switch time.
struct RtnRealization {
  int initial_sign = 1;
  std::vector<double> switch_times;
  double horizon = 0.0;

  [[nodiscard]] int value_at(double t) const {
    const auto flips = std::upper_bound(switch_times.begin(), switch_times.end(), t) - switch_times.begin();
    return (flips % 2 == 0) ? initial_sign : -initial_sign;
  }
};

/// Flip events form a Poisson process of rate nu, so <eta(t) eta(s)> = e^{-2 nu |t-s|}.
inline RtnRealization sample_rtn(double nu, double horizon, Engine &rng) {
  if (!(nu > 0.0) || !(horizon > 0.0))
    throw std::invalid_argument("sample_rtn: nu and horizon must be > 0");
  RtnRealization r;
  r.horizon = horizon;
  r.initial_sign = (rng() >> 63) != 0 ? 1 : -1;
  std::exponential_distribution<double> wait(nu);
  double t = wait(rng);
  while (t <= horizon) {
    r.switch_times.push_back(t);
    t += wait(rng);
  }
  return r;
}

inline RtnRealization sample_rtn(double nu, double horizon, std::uint64_t seed) {
  Engine rng = make_stream(seed, 0, StreamPurpose::telegraph);
  return sample_rtn(nu, horizon, rng);
}

struct EnsembleResult {
  std::vector<double> times;
  std::vector<BlochVector> mean_bloch;
  std::vector<std::array<double, 3>> std_error; // sample std / sqrt(n)
  std::size_t n_realizations = 0;
  std::uint64_t seed = 0;
};

namespace detail {

struct Moments {
  double count = 0.0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    count += 1.0;
    const double d = x - mean;
    mean += d / count;
    m2 += d * (x - mean);
  }
  static Moments combine(const Moments &a, const Moments &b) {
    if (a.count == 0.0)
      return b;
    if (b.count == 0.0)
      return a;
    Moments r;
    r.count = a.count + b.count;
    const double d = b.mean - a.mean;
    r.mean = a.mean + d * (b.count / r.count);
    r.m2 = a.m2 + b.m2 + d * d * (a.count * b.count / r.count);
    return r;
  }
};

using BlockMoments = std::vector<std::array<Moments, 3>>; // per output time

inline BlockMoments pairwise_reduce(std::span<const BlockMoments> blocks) {
  if (blocks.size() == 1)
    return blocks.front();
  const std::size_t half = blocks.size() / 2;
  BlockMoments left = pairwise_reduce(blocks.first(half));
  const BlockMoments right = pairwise_reduce(blocks.subspan(half));
  for (std::size_t t = 0; t < left.size(); ++t)
    for (int c = 0; c < 3; ++c)
      left[t][c] = Moments::combine(left[t][c], right[t][c]);
  return left;
}

inline constexpr std::size_t kBlockSize = 512;

// Averages `n` realizations, each filling one Bloch vector per output time.
// Realizations are grouped in fixed blocks and the block moments are reduced
// pairwise in index order, so the result does not depend on `workers`.
template <class Realize>
std::vector<EnsembleResult> ensemble_average(std::span<const double> times, std::size_t n, std::size_t n_outputs,
                                             std::uint64_t seed, unsigned workers, Realize &&realize) {
  const std::size_t n_blocks = (n + kBlockSize - 1) / kBlockSize;
  std::vector<std::vector<BlockMoments>> blocks(n_outputs, std::vector<BlockMoments>(n_blocks));
  parallel_for(n_blocks, workers, [&](std::size_t b) {
    std::vector<BlockMoments> acc(n_outputs, BlockMoments(times.size()));
    std::vector<std::vector<BlochVector>> path(n_outputs, std::vector<BlochVector>(times.size()));
    const std::size_t end = std::min(n, (b + 1) * kBlockSize);
    for (std::size_t i = b * kBlockSize; i < end; ++i) {
      realize(i, path);
      for (std::size_t o = 0; o < n_outputs; ++o)
        for (std::size_t t = 0; t < times.size(); ++t) {
          acc[o][t][0].add(path[o][t].px);
          acc[o][t][1].add(path[o][t].py);
          acc[o][t][2].add(path[o][t].pz);
        }
    }
    for (std::size_t o = 0; o < n_outputs; ++o)
      blocks[o][b] = std::move(acc[o]);
  });

  std::vector<EnsembleResult> out(n_outputs);
  const double nd = static_cast<double>(n);
  for (std::size_t o = 0; o < n_outputs; ++o) {
    const BlockMoments total = pairwise_reduce(blocks[o]);
    EnsembleResult &r = out[o];
    r.times.assign(times.begin(), times.end());
    r.n_realizations = n;
    r.seed = seed;
    for (std::size_t t = 0; t < times.size(); ++t) {
      r.mean_bloch.push_back({total[t][0].mean, total[t][1].mean, total[t][2].mean});
      std::array<double, 3> se{};
      if (n > 1)
        for (int c = 0; c < 3; ++c)
          se[c] = std::sqrt(std::max(total[t][c].m2, 0.0) / (nd - 1.0)) / std::sqrt(nd);
      r.std_error.push_back(se);
    }
  }
  return out;
}

inline void check_ensemble_inputs(const ModelParams &p, const DensityMatrix &rho0, std::span<const double> times,
                                  std::size_t n) {
  p.validate();
  check_time_grid(times);
  if (!rho0.is_physical())
    throw std::invalid_argument("initial state is not a valid density matrix");
  if (n < 1)
    throw std::invalid_argument("n_realizations must be >= 1");
}

// Rotation of the Bloch vector generated by dP/dt = w x P over time tau.
inline Eigen::Matrix3d field_rotation(const Eigen::Vector3d &w, double tau) {
  const double mag = w.norm();
  if (mag == 0.0 || tau == 0.0)
    return Eigen::Matrix3d::Identity();
  const Eigen::Vector3d u = w / mag;
  Eigen::Matrix3d k;
  k << 0.0, -u.z(), u.y(), u.z(), 0.0, -u.x(), -u.y(), u.x(), 0.0;
  const double th = mag * tau;
  return Eigen::Matrix3d::Identity() + std::sin(th) * k + (1.0 - std::cos(th)) * (k * k);
}

inline Eigen::Vector3d to_vec(const BlochVector &p) { return {p.px, p.py, p.pz}; }
inline BlochVector to_bloch(const Eigen::Vector3d &v) { return {v.x(), v.y(), v.z()}; }

} // namespace detail

/// Telegraph-sampled oracle: for each realization of eta(t) the Bloch vector
/// obeys the Gaussian-averaged Lindblad equation with delta = delta0 + delta1 eta,
/// propagated exactly (3x3 matrix exponential) on every constant-eta segment.
inline EnsembleResult mc_rtn_lindblad(const ModelParams &p, const DensityMatrix &rho0, std::span<const double> times,
                                      std::size_t n_realizations, std::uint64_t seed, unsigned workers = 1) {
  detail::check_ensemble_inputs(p, rho0, times, n_realizations);
  const Eigen::Vector3d p0 = detail::to_vec(density_to_bloch(rho0));
  const BlochGenerator gen_plus = bloch_generator(p.epsilon, p.kappa, p.delta0 + p.delta1);
  const BlochGenerator gen_minus = bloch_generator(p.epsilon, p.kappa, p.delta0 - p.delta1);
  const double horizon = std::max(times.back(), 1e-300);

  auto realize = [&](std::size_t i, std::vector<std::vector<BlochVector>> &out) {
    Engine rng = make_stream(seed, i, StreamPurpose::rtn_lindblad);
    const RtnRealization rtn = sample_rtn(p.nu, horizon, rng);
    int eta = rtn.initial_sign;
    std::size_t next = 0;
    double t_cur = 0.0;
    Eigen::Vector3d v = p0;
    auto advance = [&](double t_to) {
      if (t_to > t_cur)
        v = expm((eta > 0 ? gen_plus : gen_minus) * (t_to - t_cur)) * v;
      t_cur = t_to;
    };
    for (std::size_t k = 0; k < times.size(); ++k) {
      while (next < rtn.switch_times.size() && rtn.switch_times[next] <= times[k]) {
        advance(rtn.switch_times[next++]);
        eta = -eta;
      }
      advance(times[k]);
      out[0][k] = detail::to_bloch(v);
    }
  };
  return detail::ensemble_average(times, n_realizations, 1, seed, workers, realize).front();
}

/// Largest field magnitude |w| the trajectory sampler may see.
inline double max_field(const ModelParams &p) {
  return std::hypot(std::abs(p.delta0) + p.delta1, p.epsilon);
}

/// Fully sampled trajectories at `levels` step sizes dt, dt/2, ..., dt/2^(levels-1)
/// driven by common random numbers: the same telegraph path and, at each
/// coarse step, the sum of the finer Gaussian increments.
///
/// Per step of length h the Bloch vector is rotated exactly by the
/// deterministic field (-(delta0 + delta1 eta), 0, epsilon), splitting at
/// telegraph switches, then kicked about z by a Gaussian angle of variance
/// 8 kappa h. The kick averages to transverse decay exp(-4 kappa h), matching
/// the averaged generator; the splitting leaves a first-order bias in h.
inline std::vector<EnsembleResult> mc_full_sde_levels(const ModelParams &p, const DensityMatrix &rho0,
                                                      std::span<const double> times, std::size_t n_realizations,
                                                      double dt, int levels, std::uint64_t seed,
                                                      unsigned workers = 1) {
  detail::check_ensemble_inputs(p, rho0, times, n_realizations);
  if (!(dt > 0.0))
    throw std::invalid_argument("mc_full_sde: dt must be > 0");
  if (!(max_field(p) * dt < 0.05))
    throw std::invalid_argument("mc_full_sde: dt too large (need max field * dt < 0.05)");
  if (levels < 1 || levels > 12)
    throw std::invalid_argument("mc_full_sde: levels must be in [1, 12]");

  const Eigen::Vector3d p0 = detail::to_vec(density_to_bloch(rho0));
  const Eigen::Vector3d w_plus{-(p.delta0 + p.delta1), 0.0, p.epsilon};
  const Eigen::Vector3d w_minus{-(p.delta0 - p.delta1), 0.0, p.epsilon};
  const double horizon = std::max(times.back(), 1e-300);
  const auto n_levels = static_cast<std::size_t>(levels);
  const std::size_t fine_per_coarse = std::size_t{1} << (n_levels - 1);

  // Fine steps per output interval, uniform within each interval.
  std::vector<std::size_t> coarse_steps(times.size(), 0);
  for (std::size_t k = 1; k < times.size(); ++k)
    coarse_steps[k] = static_cast<std::size_t>(std::ceil((times[k] - times[k - 1]) / dt - 1e-9));

  auto realize = [&](std::size_t i, std::vector<std::vector<BlochVector>> &out) {
    Engine rng = make_stream(seed, i, StreamPurpose::full_sde);
    const RtnRealization rtn = sample_rtn(p.nu, horizon, rng);
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<Eigen::Vector3d> v(n_levels, p0);
    for (std::size_t l = 0; l < n_levels; ++l)
      out[l][0] = detail::to_bloch(p0);

    std::vector<double> z;
    for (std::size_t k = 1; k < times.size(); ++k) {
      const std::size_t n_fine = coarse_steps[k] * fine_per_coarse;
      const double h_fine = (times[k] - times[k - 1]) / static_cast<double>(n_fine);
      z.resize(n_fine);
      if (p.kappa > 0.0)
        for (auto &zi : z)
          zi = gauss(rng);

      for (std::size_t l = 0; l < n_levels; ++l) {
        const std::size_t group = std::size_t{1} << (n_levels - 1 - l); // fine steps per step at this level
        const std::size_t n_steps = n_fine / group;
        const double h = h_fine * static_cast<double>(group);
        const double kick_scale = std::sqrt(8.0 * p.kappa * h_fine);
        const Eigen::Matrix3d rot_plus = detail::field_rotation(w_plus, h);
        const Eigen::Matrix3d rot_minus = detail::field_rotation(w_minus, h);
        Eigen::Vector3d &x = v[l];
        auto sw = std::upper_bound(rtn.switch_times.begin(), rtn.switch_times.end(), times[k - 1]);
        for (std::size_t s = 0; s < n_steps; ++s) {
          const double t0 = times[k - 1] + static_cast<double>(s) * h;
          const double t1 = s + 1 == n_steps ? times[k] : t0 + h;
          int eta = rtn.value_at(t0);
          if (sw == rtn.switch_times.end() || *sw > t1) {
            x = (eta > 0 ? rot_plus : rot_minus) * x;
          } else {
            double t = t0;
            while (sw != rtn.switch_times.end() && *sw <= t1) {
              x = detail::field_rotation(eta > 0 ? w_plus : w_minus, *sw - t) * x;
              t = *sw++;
              eta = -eta;
            }
            x = detail::field_rotation(eta > 0 ? w_plus : w_minus, t1 - t) * x;
          }
          if (p.kappa > 0.0) {
            double sum = 0.0;
            for (std::size_t j = s * group; j < (s + 1) * group; ++j)
              sum += z[j];
            const double phi = kick_scale * sum;
            const double c = std::cos(phi), sn = std::sin(phi);
            x = Eigen::Vector3d{c * x.x() - sn * x.y(), sn * x.x() + c * x.y(), x.z()};
          }
        }
        out[l][k] = detail::to_bloch(x);
      }
    }
  };
  return detail::ensemble_average(times, n_realizations, n_levels, seed, workers, realize);
}

inline EnsembleResult mc_full_sde(const ModelParams &p, const DensityMatrix &rho0, std::span<const double> times,
                                  std::size_t n_realizations, double dt, std::uint64_t seed, unsigned workers = 1) {
  return mc_full_sde_levels(p, rho0, times, n_realizations, dt, 1, seed, workers).front();
}

} // namespace noisy_tunnel
