#pragma once

// Oracle validation suite behind `noisy_tunnel validate`: closed forms
// against both integration backends, and both Monte Carlo oracles against
// the averaged dynamics.

#include "noisy_tunnel/config.hpp"
#include "noisy_tunnel/dynamics.hpp"
#include "noisy_tunnel/model.hpp"
#include "noisy_tunnel/nonmarkov.hpp"
#include "noisy_tunnel/parallel.hpp"
#include "noisy_tunnel/state_algebra.hpp"
#include "noisy_tunnel/stochastic.hpp"
#include "noisy_tunnel/sweep.hpp"

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace noisy_tunnel {

struct GeneratorPerturbation {
  int row = 0;
  int col = 0;
  double delta = 0.0;
};

struct ValidateSettings {
  std::size_t n_realizations = 10000;
  double sde_dt = 1e-3;
  double t_max = 20.0;
  std::size_t t_count = 21;
  /// Test hook: offset added to one entry of the generator on the ODE side
  /// of the Monte Carlo comparisons.
  std::optional<GeneratorPerturbation> perturbation;

  static ValidateSettings from(const Config &c) {
    c.require_known({"version", "command", "seed", "validate.n_realizations", "validate.sde_dt", "validate.t_max",
                     "validate.t_count", "validate.perturb_generator"});
    ValidateSettings s;
    const long long n = c.get_int("validate.n_realizations", 10000);
    if (n < 1)
      throw ConfigError("validate.n_realizations must be >= 1");
    s.n_realizations = static_cast<std::size_t>(n);
    s.sde_dt = c.get_double("validate.sde_dt", 1e-3);
    s.t_max = c.get_double("validate.t_max", 20.0);
    const long long tc = c.get_int("validate.t_count", 21);
    if (tc < 2 || !(s.t_max > 0.0) || !(s.sde_dt > 0.0))
      throw ConfigError("validate: need t_count >= 2, t_max > 0, sde_dt > 0");
    s.t_count = static_cast<std::size_t>(tc);
    if (c.has("validate.perturb_generator")) {
      const auto parts = c.get_list("validate.perturb_generator", {});
      if (parts.size() != 3)
        throw ConfigError("validate.perturb_generator: expected 'row, col, delta'");
      const Config tmp = Config::parse("r = " + parts[0] + "\nc = " + parts[1] + "\nd = " + parts[2]);
      GeneratorPerturbation g{static_cast<int>(tmp.get_int("r", 0)), static_cast<int>(tmp.get_int("c", 0)),
                              tmp.get_double("d", 0.0)};
      if (g.row < 0 || g.row > 5 || g.col < 0 || g.col > 5)
        throw ConfigError("validate.perturb_generator: indices must be in [0, 5]");
      s.perturbation = g;
    }
    return s;
  }
};

struct CheckResult {
  std::string name;
  bool passed = true;
  bool skipped = false;
  double max_residual = 0.0; // absolute, relative, or in standard errors (see `unit`)
  double tolerance = 0.0;
  std::string unit;
  std::string note;
};

struct ResidualRow {
  std::string check;
  std::string series;
  double t = 0.0;
  double value = 0.0;
  double reference = 0.0;
  double residual = 0.0;
  double tolerance = 0.0;
};

struct ValidationReport {
  std::vector<CheckResult> checks;
  std::vector<ResidualRow> residuals;

  [[nodiscard]] bool all_passed() const {
    for (const auto &c : checks)
      if (!c.passed && !c.skipped)
        return false;
    return true;
  }

  [[nodiscard]] Table residual_table() const {
    Table t{{"check", "series", "t", "value", "reference", "residual", "tolerance"}, {}};
    for (const auto &r : residuals)
      t.rows.push_back({r.check, r.series, csv_number(r.t), csv_number(r.value), csv_number(r.reference),
                        csv_number(r.residual), csv_number(r.tolerance)});
    return t;
  }

  [[nodiscard]] std::string summary() const {
    std::string s;
    for (const auto &c : checks) {
      s += c.skipped ? "[SKIP] " : c.passed ? "[PASS] " : "[FAIL] ";
      s += c.name;
      if (!c.skipped)
        s += "  max " + c.unit + " = " + csv_number(c.max_residual) + " (tol " + csv_number(c.tolerance) + ")";
      if (!c.note.empty())
        s += "  -- " + c.note;
      s += '\n';
    }
    return s;
  }
};

/// Agreement of an ensemble with the averaged dynamics: every Bloch component
/// at every time within `n_se` standard errors (exact match where the
/// standard error vanishes, up to 1e-12).
struct EnsembleComparison {
  double max_z = 0.0;         // largest |diff| / se over components with se > 0
  double max_exact_gap = 0.0; // largest |diff| where se == 0
  bool passed = true;
};

inline EnsembleComparison compare_ensemble(const EnsembleResult &mc, const std::vector<AugmentedState> &ode,
                                           double n_se, const std::string &check, const std::string &series,
                                           std::vector<ResidualRow> *rows = nullptr) {
  EnsembleComparison cmp;
  for (std::size_t k = 0; k < mc.times.size(); ++k) {
    const double mean[3] = {mc.mean_bloch[k].px, mc.mean_bloch[k].py, mc.mean_bloch[k].pz};
    for (int c = 0; c < 3; ++c) {
      const double diff = std::abs(mean[c] - ode[k][c]);
      const double se = mc.std_error[k][c];
      if (se > 0.0) {
        cmp.max_z = std::max(cmp.max_z, diff / se);
        cmp.passed = cmp.passed && diff <= n_se * se;
      } else {
        cmp.max_exact_gap = std::max(cmp.max_exact_gap, diff);
        cmp.passed = cmp.passed && diff <= 1e-12;
      }
      if (rows)
        rows->push_back({check, series + ".P" + std::string(1, "xyz"[c]), mc.times[k], mean[c], ode[k][c],
                         mean[c] - ode[k][c], n_se * se});
    }
  }
  return cmp;
}

/// Least-squares slope of -log|y| against t (decay rate of a single exponential).
inline double fit_decay_rate(const std::vector<double> &t, const std::vector<double> &y) {
  double st = 0, sl = 0, stt = 0, stl = 0;
  const double n = static_cast<double>(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double l = std::log(std::abs(y[i]));
    st += t[i];
    sl += l;
    stt += t[i] * t[i];
    stl += t[i] * l;
  }
  return -(n * stl - st * sl) / (n * stt - st * st);
}

inline ValidationReport run_validation(const ValidateSettings &s, const RunOptions &opt) {
  ValidationReport rep;
  const unsigned workers = resolve_workers(opt.workers);

  // Static barrier, unbiased: exact damped solution of the generator.
  {
    CheckResult c{"static_closed_form", true, false, 0.0, 1e-8, "abs error", "exp(-2 kappa t) form, both backends"};
    const ModelParams p{0.0, 0.1, 1.0, 0.0, 1.0};
    const auto times = uniform_grid(20.0, 2001);
    for (Backend b : {Backend::expm, Backend::rk45})
      for (CanonicalState st : {CanonicalState::rho1, CanonicalState::rho2}) {
        const Trajectory tr = evolve(p, st, times, b);
        for (std::size_t k = 0; k < tr.size(); ++k) {
          const double v = l1_coherence(tr.bloch(k));
          const double ref = static_coherence_exact(p.kappa, p.delta0, st, times[k]);
          c.max_residual = std::max(c.max_residual, std::abs(v - ref));
          if (k % 100 == 0)
            rep.residuals.push_back({c.name, std::string(to_string(st)) + "/" + std::string(to_string(b)), times[k],
                                     v, ref, v - ref, c.tolerance});
        }
      }
    c.passed = c.max_residual <= c.tolerance;
    rep.checks.push_back(c);
  }

  // Telegraph-only distinguishability.
  {
    CheckResult c{"rtn_only_trace_distance", true, false, 0.0, 1e-8, "abs error", {}};
    const auto times = uniform_grid(15.0, 1501);
    for (auto [d1, nu] : {std::pair{2.0, 1.0}, {4.0, 1.0}, {1.0, 2.0}}) {
      const ModelParams p{0.0, 0.0, 0.0, d1, nu};
      const Trajectory a = evolve(p, CanonicalState::rho1, times);
      const Trajectory b = evolve(p, CanonicalState::rho3, times);
      for (std::size_t k = 0; k < times.size(); ++k) {
        const double v = trace_distance(a.bloch(k), b.bloch(k));
        const double ref = rtn_only_trace_distance(d1, nu, times[k]);
        c.max_residual = std::max(c.max_residual, std::abs(v - ref));
        if (k % 100 == 0)
          rep.residuals.push_back({c.name, "delta1=" + format_double(d1) + "/nu=" + format_double(nu), times[k], v,
                                   ref, v - ref, c.tolerance});
      }
    }
    c.passed = c.max_residual <= c.tolerance;
    rep.checks.push_back(c);
  }

  // Non-Markovianity against its closed form.
  {
    CheckResult c{"blp_closed_form", true, false, 0.0, 1e-3, "rel error", {}};
    for (double k : {1.5, 2.0, 4.0}) {
      const ModelParams p = ModelParams::with_kubo(0.0, 0.0, 0.0, 1.0, k);
      const double v = blp_measure(p).n_value;
      const double ref = blp_closed_form(k);
      const double rel = std::abs(v - ref) / ref;
      c.max_residual = std::max(c.max_residual, rel);
      rep.residuals.push_back({c.name, "K=" + format_double(k), 0.0, v, ref, v - ref, c.tolerance * ref});
    }
    c.passed = c.max_residual <= c.tolerance;
    rep.checks.push_back(c);
  }

  // Backend equivalence on random parameters.
  {
    CheckResult c{"backend_agreement", true, false, 0.0, 1e-8, "abs error", "20 random parameter sets, t in [0, 30]"};
    Engine rng = make_stream(opt.seed, 0, StreamPurpose::statistics);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto times = uniform_grid(30.0, 61);
    for (int i = 0; i < 20; ++i) {
      const ModelParams p{4.0 * u(rng) - 2.0, 0.3 * u(rng), 0.5 + u(rng), 2.0 * u(rng), 0.1 + 2.0 * u(rng)};
      const BlochVector p0{u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5};
      const Trajectory a = evolve(p, bloch_to_density(p0), times, Backend::expm);
      const Trajectory b = evolve(p, bloch_to_density(p0), times, Backend::rk45);
      for (std::size_t k = 0; k < times.size(); ++k)
        c.max_residual = std::max(c.max_residual, (a.states[k] - b.states[k]).cwiseAbs().maxCoeff());
    }
    c.passed = c.max_residual <= c.tolerance;
    rep.checks.push_back(c);
  }

  // Monte Carlo oracles.
  const auto times = uniform_grid(s.t_max, s.t_count);
  const bool statistical = s.n_realizations > 1;
  auto ode_reference = [&](const ModelParams &p, CanonicalState st) {
    Generator m = build_generator(p);
    if (s.perturbation)
      m(s.perturbation->row, s.perturbation->col) += s.perturbation->delta;
    return propagate(m, initial_augmented(canonical_bloch(st)), times, Backend::expm);
  };
  auto skipped = [](std::string name) {
    return CheckResult{std::move(name), true, true, 0.0, 3.0, "z", "n_realizations = 1: statistical check skipped"};
  };

  if (!statistical) {
    rep.checks.push_back(skipped("mc_rtn_lindblad"));
    rep.checks.push_back(skipped("mc_full_sde"));
    rep.checks.push_back(skipped("dephasing_rate"));
    return rep;
  }

  {
    CheckResult c{"mc_rtn_lindblad", true, false, 0.0, 3.0, "z", "n = " + std::to_string(s.n_realizations)};
    for (const ModelParams &p : {ModelParams{0.0, 0.1, 1.0, 1.0, 1.0}, ModelParams{2.0, 0.1, 1.0, 1.0, 0.25}}) {
      const EnsembleResult mc =
          mc_rtn_lindblad(p, canonical_state(CanonicalState::rho1), times, s.n_realizations, opt.seed, workers);
      const auto cmp = compare_ensemble(mc, ode_reference(p, CanonicalState::rho1), 3.0, c.name,
                                        "eps=" + format_double(p.epsilon) + "/nu=" + format_double(p.nu),
                                        &rep.residuals);
      c.max_residual = std::max(c.max_residual, cmp.max_z);
      c.passed = c.passed && cmp.passed;
    }
    rep.checks.push_back(c);
  }
  {
    CheckResult c{"mc_full_sde", true, false, 0.0, 3.0, "z",
                  "n = " + std::to_string(s.n_realizations) + ", dt = " + format_double(s.sde_dt)};
    const ModelParams p{0.0, 0.1, 1.0, 1.0, 1.0};
    const EnsembleResult mc = mc_full_sde(p, canonical_state(CanonicalState::rho1), times, s.n_realizations,
                                          s.sde_dt, opt.seed, workers);
    const auto cmp = compare_ensemble(mc, ode_reference(p, CanonicalState::rho1), 3.0, c.name, "eps=0/nu=1",
                                      &rep.residuals);
    c.max_residual = cmp.max_z;
    c.passed = cmp.passed;
    rep.checks.push_back(c);
  }
  {
    CheckResult c{"dephasing_rate", true, false, 0.0, 0.02, "rel error",
                  "Px from (1, 0, 0) and Py from rho2, expected 4 kappa"};
    const ModelParams p{0.0, 0.1, 0.0, 0.0, 1.0};
    const auto fit_times = uniform_grid(2.5, 26);
    const double expected = 4.0 * p.kappa;
    for (int comp : {0, 1}) {
      const BlochVector start = comp == 0 ? BlochVector{1.0, 0.0, 0.0} : BlochVector{0.0, 1.0, 0.0};
      const EnsembleResult mc =
          mc_full_sde(p, bloch_to_density(start), fit_times, s.n_realizations, s.sde_dt, opt.seed, workers);
      std::vector<double> y;
      for (const auto &b : mc.mean_bloch)
        y.push_back(comp == 0 ? b.px : b.py);
      const double rate = fit_decay_rate(fit_times, y);
      c.max_residual = std::max(c.max_residual, std::abs(rate - expected) / expected);
      rep.residuals.push_back(
          {c.name, comp == 0 ? "rate_Px" : "rate_Py", 0.0, rate, expected, rate - expected, c.tolerance * expected});
    }
    c.passed = c.max_residual <= c.tolerance;
    rep.checks.push_back(c);
  }
  return rep;
}

} // namespace noisy_tunnel
