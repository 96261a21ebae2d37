#pragma once

// Front-end commands: single evolutions, coherence sweeps over (t, parameter),
// non-Markovianity sweeps over two parameters. Each command resolves its full
// settings from a Config, computes a table, and renders CSV preceded by a
// manifest from which the run can be repeated byte for byte.

#include "noisy_tunnel/config.hpp"
#include "noisy_tunnel/dynamics.hpp"
#include "noisy_tunnel/model.hpp"
#include "noisy_tunnel/nonmarkov.hpp"
#include "noisy_tunnel/parallel.hpp"
#include "noisy_tunnel/state_algebra.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#ifndef NOISY_TUNNEL_VERSION
#define NOISY_TUNNEL_VERSION "0.0.0"
#endif

namespace noisy_tunnel {

inline constexpr std::string_view kToolVersion = NOISY_TUNNEL_VERSION;

/// Raised for non-recoverable numerical conditions (exit code 3 in the CLI).
class NumericalFailure : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// CSV cell: 17 significant digits, '.' decimal separator.
inline std::string csv_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  [[nodiscard]] std::string to_csv() const {
    std::string out;
    auto emit = [&out](const std::vector<std::string> &cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i)
          out += ',';
        out += cells[i];
      }
      out += '\n';
    };
    emit(columns);
    for (const auto &r : rows)
      emit(r);
    return out;
  }
};

/// Ordered `key = value` manifest lines grouped by section.
class Manifest {
public:
  Manifest(std::string command, std::uint64_t seed) {
    root_.emplace_back("version", std::string(kToolVersion));
    root_.emplace_back("command", std::move(command));
    root_.emplace_back("seed", std::to_string(seed));
  }

  void add(const std::string &section, const std::string &key, std::string value) {
    for (auto &[name, entries] : sections_)
      if (name == section) {
        entries.emplace_back(key, std::move(value));
        return;
      }
    sections_.push_back({section, {{key, std::move(value)}}});
  }
  void add(const std::string &section, const std::string &key, double value) {
    add(section, key, format_double(value));
  }

  [[nodiscard]] std::string render() const {
    std::string out(kManifestMagic);
    out += '\n';
    for (const auto &[k, v] : root_)
      out += "# " + k + " = " + v + "\n";
    for (const auto &[name, entries] : sections_) {
      out += "# [" + name + "]\n";
      for (const auto &[k, v] : entries)
        out += "# " + k + " = " + v + "\n";
    }
    return out;
  }

private:
  std::vector<std::pair<std::string, std::string>> root_;
  std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::string>>>> sections_;
};

// ---------------------------------------------------------------------------
// Sweep axes

enum class AxisName { t, K, kappa, epsilon, nu, delta1 };

inline AxisName parse_axis_name(std::string_view s) {
  if (s == "t")
    return AxisName::t;
  if (s == "K")
    return AxisName::K;
  if (s == "kappa")
    return AxisName::kappa;
  if (s == "epsilon")
    return AxisName::epsilon;
  if (s == "nu")
    return AxisName::nu;
  if (s == "delta1")
    return AxisName::delta1;
  throw ConfigError("unknown sweep axis '" + std::string(s) + "' (allowed: t, K, kappa, epsilon, nu, delta1)");
}

struct Axis {
  std::string name;
  double min = 0.0;
  double max = 1.0;
  std::size_t count = 2;
  bool log = false;

  /// "min, max, count[, linear|log]"
  static Axis parse(const std::string &name, const std::vector<std::string> &parts) {
    parse_axis_name(name);
    if (parts.size() != 3 && parts.size() != 4)
      throw ConfigError("axis." + name + ": expected 'min, max, count[, linear|log]'");
    Axis a;
    a.name = name;
    const Config tmp = Config::parse("min = " + parts[0] + "\nmax = " + parts[1] + "\ncount = " + parts[2]);
    a.min = tmp.get_double("min", 0.0);
    a.max = tmp.get_double("max", 0.0);
    const long long count = tmp.get_int("count", 0);
    if (parts.size() == 4) {
      if (parts[3] == "log")
        a.log = true;
      else if (parts[3] != "linear")
        throw ConfigError("axis." + name + ": scale must be 'linear' or 'log'");
    }
    if (count < 2)
      throw ConfigError("axis." + name + ": count must be >= 2");
    a.count = static_cast<std::size_t>(count);
    if (!(a.min < a.max))
      throw ConfigError("axis." + name + ": min must be < max");
    if (a.log && !(a.min > 0.0))
      throw ConfigError("axis." + name + ": log axis needs min > 0");
    return a;
  }

  [[nodiscard]] std::vector<double> values() const {
    std::vector<double> v(count);
    const double lo = log ? std::log10(min) : min;
    const double hi = log ? std::log10(max) : max;
    for (std::size_t i = 0; i < count; ++i) {
      const double f = static_cast<double>(i) / static_cast<double>(count - 1);
      const double x = lo + f * (hi - lo);
      v[i] = log ? std::pow(10.0, x) : x;
    }
    v.front() = min;
    v.back() = max;
    return v;
  }

  [[nodiscard]] std::string describe() const {
    return format_double(min) + ", " + format_double(max) + ", " + std::to_string(count) + ", " +
           (log ? "log" : "linear");
  }
};

/// Sets one swept quantity. K is applied as nu = delta1 / K.
inline void apply_axis(ModelParams &p, AxisName name, double value) {
  switch (name) {
  case AxisName::K:
    if (!(value > 0.0) || !(p.delta1 > 0.0))
      throw ConfigError("sweeping K requires K > 0 and delta1 > 0");
    p.nu = p.delta1 / value;
    break;
  case AxisName::kappa:
    p.kappa = value;
    break;
  case AxisName::epsilon:
    p.epsilon = value;
    break;
  case AxisName::nu:
    p.nu = value;
    break;
  case AxisName::delta1:
    p.delta1 = value;
    break;
  case AxisName::t:
    break;
  }
}

/// Applies non-K axes first so K sees the final delta1.
inline ModelParams apply_axes(ModelParams p, const std::vector<std::pair<AxisName, double>> &assignments) {
  for (const auto &[n, v] : assignments)
    if (n != AxisName::K)
      apply_axis(p, n, v);
  for (const auto &[n, v] : assignments)
    if (n == AxisName::K)
      apply_axis(p, n, v);
  p.validate();
  return p;
}

// ---------------------------------------------------------------------------
// Shared settings

struct RunOptions {
  std::uint64_t seed = 42;
  unsigned workers = 0;
  bool strict = false;
};

inline ModelParams model_from_config(const Config &c, ModelParams defaults) {
  ModelParams p;
  p.epsilon = c.get_double("model.epsilon", defaults.epsilon);
  p.kappa = c.get_double("model.kappa", defaults.kappa);
  p.delta0 = c.get_double("model.delta0", defaults.delta0);
  p.delta1 = c.get_double("model.delta1", defaults.delta1);
  p.nu = c.get_double("model.nu", defaults.nu);
  try {
    p.validate();
  } catch (const std::invalid_argument &e) {
    throw ConfigError(e.what());
  }
  return p;
}

inline void add_model(Manifest &m, const ModelParams &p) {
  m.add("model", "epsilon", p.epsilon);
  m.add("model", "kappa", p.kappa);
  m.add("model", "delta0", p.delta0);
  m.add("model", "delta1", p.delta1);
  m.add("model", "nu", p.nu);
}

inline std::vector<CanonicalState> states_from_config(const Config &c, const std::string &key,
                                                      std::vector<std::string> fallback) {
  std::vector<CanonicalState> out;
  try {
    for (const auto &s : c.get_list(key, fallback))
      out.push_back(parse_canonical_state(s));
  } catch (const std::invalid_argument &e) {
    throw ConfigError(std::string(key) + ": " + e.what());
  }
  if (out.empty())
    throw ConfigError(key + ": at least one initial state required");
  return out;
}

inline std::string join_states(const std::vector<CanonicalState> &states) {
  std::string s;
  for (std::size_t i = 0; i < states.size(); ++i)
    s += (i ? ", " : "") + std::string(to_string(states[i]));
  return s;
}

inline std::string join_numbers(const std::vector<double> &v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i)
    s += (i ? ", " : "") + format_double(v[i]);
  return s;
}

inline void require_physical(const BlochVector &p, double t) {
  if (!(p.norm() <= 1.0 + kDriftTolerance))
    throw NumericalFailure("Bloch norm " + csv_number(p.norm()) + " exceeds 1 at t = " + csv_number(t));
}

struct CommandOutput {
  std::string text; // manifest + CSV
  bool warning = false;
  std::string message;
};

// ---------------------------------------------------------------------------
// evolve

struct EvolveSettings {
  ModelParams model;
  std::vector<CanonicalState> states;
  std::vector<double> epsilons;
  double t_max = 20.0;
  std::size_t t_count = 2001;
  Backend backend = Backend::expm;

  static EvolveSettings from(const Config &c) {
    c.require_known({"version", "command", "seed", "model.epsilon", "model.kappa", "model.delta0", "model.delta1", "model.nu",
                     "evolve.states", "evolve.epsilons", "evolve.t_max", "evolve.t_count", "evolve.backend"});
    EvolveSettings s;
    s.model = model_from_config(c, ModelParams{0.0, 0.1, 1.0, 0.0, 1.0});
    s.states = states_from_config(c, "evolve.states", {"rho1", "rho2"});
    s.epsilons = c.get_double_list("evolve.epsilons", {0.0, 2.0});
    if (s.epsilons.empty())
      throw ConfigError("evolve.epsilons: at least one value required");
    s.t_max = c.get_double("evolve.t_max", 20.0);
    const long long n = c.get_int("evolve.t_count", 2001);
    if (n < 2 || !(s.t_max > 0.0))
      throw ConfigError("evolve: need t_count >= 2 and t_max > 0");
    s.t_count = static_cast<std::size_t>(n);
    try {
      s.backend = parse_backend(c.get_string("evolve.backend", "expm"));
    } catch (const std::invalid_argument &e) {
      throw ConfigError(e.what());
    }
    return s;
  }
};

inline CommandOutput cmd_evolve(const EvolveSettings &s, const RunOptions &opt) {
  Manifest m("evolve", opt.seed);
  add_model(m, s.model);
  m.add("evolve", "states", join_states(s.states));
  m.add("evolve", "epsilons", join_numbers(s.epsilons));
  m.add("evolve", "t_max", s.t_max);
  m.add("evolve", "t_count", std::to_string(s.t_count));
  m.add("evolve", "backend", std::string(to_string(s.backend)));

  const std::vector<double> times = uniform_grid(s.t_max, s.t_count);
  struct Job {
    CanonicalState state;
    double epsilon;
  };
  std::vector<Job> jobs;
  for (double e : s.epsilons)
    for (CanonicalState st : s.states)
      jobs.push_back({st, e});

  std::vector<Trajectory> results(jobs.size());
  parallel_for(jobs.size(), resolve_workers(opt.workers), [&](std::size_t i) {
    ModelParams p = s.model;
    p.epsilon = jobs[i].epsilon;
    results[i] = evolve(p, jobs[i].state, times, s.backend);
  });

  Table t{{"state", "epsilon", "t", "Px", "Py", "Pz", "C_l1", "C_relent"}, {}};
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const Trajectory &tr = results[j];
    for (std::size_t k = 0; k < tr.size(); ++k) {
      const BlochVector b = tr.bloch(k);
      require_physical(b, tr.times[k]);
      t.rows.push_back({tr.initial_tag, csv_number(jobs[j].epsilon), csv_number(tr.times[k]), csv_number(b.px),
                        csv_number(b.py), csv_number(b.pz), csv_number(l1_coherence(b)),
                        csv_number(relative_entropy_coherence(b))});
    }
  }
  return {m.render() + t.to_csv(), false, {}};
}

// ---------------------------------------------------------------------------
// sweep-coherence

struct CoherenceSweepSettings {
  ModelParams model;
  std::vector<CanonicalState> states;
  std::vector<double> epsilons;
  Axis time_axis;
  Axis param_axis;

  static CoherenceSweepSettings from(const Config &c) {
    c.require_known({"version", "command", "seed", "model.epsilon", "model.kappa", "model.delta0", "model.delta1", "model.nu",
                     "sweep-coherence.states", "sweep-coherence.epsilons", "sweep-coherence.axis."});
    CoherenceSweepSettings s;
    s.model = model_from_config(c, ModelParams{0.0, 0.1, 1.0, 1.0, 1.0});
    s.states = states_from_config(c, "sweep-coherence.states", {"rho1", "rho2"});
    s.epsilons = c.get_double_list("sweep-coherence.epsilons", {0.0, 2.0});
    if (s.epsilons.empty())
      throw ConfigError("sweep-coherence.epsilons: at least one value required");

    std::vector<Axis> axes;
    for (const auto &[key, value] : c.values()) {
      const std::string prefix = "sweep-coherence.axis.";
      if (key.rfind(prefix, 0) == 0)
        axes.push_back(Axis::parse(key.substr(prefix.size()), c.get_list(key, {})));
    }
    if (axes.empty())
      axes = {Axis{"t", 0.0, 20.0, 201, false}, Axis{"K", 0.1, 10.0, 21, true}};
    if (axes.size() != 2)
      throw ConfigError("sweep-coherence: exactly two axes required (t and one parameter)");
    const bool t_first = axes[0].name == "t";
    if (!t_first && axes[1].name != "t")
      throw ConfigError("sweep-coherence: one axis must be t");
    s.time_axis = t_first ? axes[0] : axes[1];
    s.param_axis = t_first ? axes[1] : axes[0];
    if (s.param_axis.name == "t")
      throw ConfigError("sweep-coherence: second axis must be a model parameter");
    if (s.time_axis.min != 0.0 || s.time_axis.log)
      throw ConfigError("sweep-coherence: t axis must be linear and start at 0");
    return s;
  }
};

inline CommandOutput cmd_sweep_coherence(const CoherenceSweepSettings &s, const RunOptions &opt) {
  Manifest m("sweep-coherence", opt.seed);
  add_model(m, s.model);
  m.add("sweep-coherence", "states", join_states(s.states));
  m.add("sweep-coherence", "epsilons", join_numbers(s.epsilons));
  m.add("sweep-coherence", "axis.t", s.time_axis.describe());
  m.add("sweep-coherence", "axis." + s.param_axis.name, s.param_axis.describe());

  const std::vector<double> times = s.time_axis.values();
  const std::vector<double> pvals = s.param_axis.values();
  const AxisName pname = parse_axis_name(s.param_axis.name);
  struct Job {
    CanonicalState state;
    ModelParams params;
  };
  std::vector<Job> jobs;
  for (CanonicalState st : s.states)
    for (double e : s.epsilons)
      for (double v : pvals) {
        ModelParams base = s.model;
        base.epsilon = e;
        try {
          jobs.push_back({st, apply_axes(base, {{pname, v}})});
        } catch (const std::invalid_argument &err) {
          throw ConfigError(err.what());
        }
      }

  std::vector<Trajectory> results(jobs.size());
  parallel_for(jobs.size(), resolve_workers(opt.workers),
               [&](std::size_t i) { results[i] = evolve(jobs[i].params, jobs[i].state, times); });

  Table t{{"state", "epsilon", "kappa", "delta0", "delta1", "nu", "K", "t", "C_l1"}, {}};
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const ModelParams &p = jobs[j].params;
    for (std::size_t k = 0; k < times.size(); ++k) {
      const BlochVector b = results[j].bloch(k);
      require_physical(b, times[k]);
      t.rows.push_back({std::string(to_string(jobs[j].state)), csv_number(p.epsilon), csv_number(p.kappa),
                        csv_number(p.delta0), csv_number(p.delta1), csv_number(p.nu), csv_number(p.kubo()),
                        csv_number(times[k]), csv_number(l1_coherence(b))});
    }
  }
  return {m.render() + t.to_csv(), false, {}};
}

// ---------------------------------------------------------------------------
// sweep-nonmarkov

struct NonMarkovSweepSettings {
  ModelParams model;
  std::vector<double> epsilons;
  Axis axis_a;
  Axis axis_b;
  CanonicalState state_a = CanonicalState::rho1;
  CanonicalState state_b = CanonicalState::rho3;
  BlpOptions blp;

  static NonMarkovSweepSettings from(const Config &c) {
    c.require_known({"version", "command", "seed", "model.epsilon", "model.kappa", "model.delta0", "model.delta1", "model.nu",
                     "sweep-nonmarkov.epsilons", "sweep-nonmarkov.pair", "sweep-nonmarkov.axis.", "sweep-nonmarkov.dt",
                     "sweep-nonmarkov.envelope_cutoff", "sweep-nonmarkov.max_horizon"});
    NonMarkovSweepSettings s;
    s.model = model_from_config(c, ModelParams{0.0, 0.1, 1.0, 1.0, 1.0});
    s.epsilons = c.get_double_list("sweep-nonmarkov.epsilons", {0.0, 2.0});
    if (s.epsilons.empty())
      throw ConfigError("sweep-nonmarkov.epsilons: at least one value required");
    const auto pair = states_from_config(c, "sweep-nonmarkov.pair", {"rho1", "rho3"});
    if (pair.size() != 2 || pair[0] == pair[1])
      throw ConfigError("sweep-nonmarkov.pair: two distinct states required");
    s.state_a = pair[0];
    s.state_b = pair[1];

    std::vector<Axis> axes;
    for (const auto &[key, value] : c.values()) {
      const std::string prefix = "sweep-nonmarkov.axis.";
      if (key.rfind(prefix, 0) == 0)
        axes.push_back(Axis::parse(key.substr(prefix.size()), c.get_list(key, {})));
    }
    if (axes.empty())
      axes = {Axis{"K", 0.25, 8.0, 11, true}, Axis{"kappa", 0.0, 0.3, 7, false}};
    if (axes.size() != 2)
      throw ConfigError("sweep-nonmarkov: exactly two parameter axes required");
    for (const auto &a : axes)
      if (a.name == "t")
        throw ConfigError("sweep-nonmarkov: t cannot be swept");
    // K first when present, for a stable row order
    if (axes[1].name == "K")
      std::swap(axes[0], axes[1]);
    s.axis_a = axes[0];
    s.axis_b = axes[1];

    s.blp.dt = c.get_double("sweep-nonmarkov.dt", 1e-3);
    s.blp.envelope_cutoff = c.get_double("sweep-nonmarkov.envelope_cutoff", 1e-10);
    s.blp.max_horizon = c.get_double("sweep-nonmarkov.max_horizon", 20000.0);
    if (!(s.blp.dt > 0.0) || !(s.blp.envelope_cutoff > 0.0) || !(s.blp.max_horizon > 0.0))
      throw ConfigError("sweep-nonmarkov: dt, envelope_cutoff and max_horizon must be > 0");
    return s;
  }
};

inline CommandOutput cmd_sweep_nonmarkov(const NonMarkovSweepSettings &s, const RunOptions &opt) {
  Manifest m("sweep-nonmarkov", opt.seed);
  add_model(m, s.model);
  m.add("sweep-nonmarkov", "epsilons", join_numbers(s.epsilons));
  m.add("sweep-nonmarkov", "pair", join_states({s.state_a, s.state_b}));
  m.add("sweep-nonmarkov", "axis." + s.axis_a.name, s.axis_a.describe());
  m.add("sweep-nonmarkov", "axis." + s.axis_b.name, s.axis_b.describe());
  m.add("sweep-nonmarkov", "dt", s.blp.dt);
  m.add("sweep-nonmarkov", "envelope_cutoff", s.blp.envelope_cutoff);
  m.add("sweep-nonmarkov", "max_horizon", s.blp.max_horizon);

  const AxisName na = parse_axis_name(s.axis_a.name);
  const AxisName nb = parse_axis_name(s.axis_b.name);
  std::vector<ModelParams> jobs;
  for (double e : s.epsilons)
    for (double a : s.axis_a.values())
      for (double b : s.axis_b.values()) {
        ModelParams base = s.model;
        base.epsilon = e;
        try {
          jobs.push_back(apply_axes(base, {{na, a}, {nb, b}}));
        } catch (const std::invalid_argument &err) {
          throw ConfigError(err.what());
        }
      }

  const DensityMatrix rho_a = canonical_state(s.state_a);
  const DensityMatrix rho_b = canonical_state(s.state_b);
  std::vector<ConvergedBlp> results(jobs.size());
  parallel_for(jobs.size(), resolve_workers(opt.workers),
               [&](std::size_t i) { results[i] = blp_measure_converged(jobs[i], rho_a, rho_b, s.blp); });

  Table t{{"epsilon", "kappa", "delta0", "delta1", "nu", "K", "N", "horizon", "dt", "refinement_delta",
           "horizon_warning", "n_revivals"},
          {}};
  CommandOutput out;
  std::size_t warnings = 0;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const ModelParams &p = jobs[j];
    const BlpResult &r = results[j].result;
    warnings += r.horizon_warning ? 1 : 0;
    t.rows.push_back({csv_number(p.epsilon), csv_number(p.kappa), csv_number(p.delta0), csv_number(p.delta1),
                      csv_number(p.nu), csv_number(p.kubo()), csv_number(r.n_value), csv_number(r.horizon),
                      csv_number(r.grid_step), csv_number(results[j].refinement_delta),
                      r.horizon_warning ? "1" : "0", std::to_string(r.revival_intervals.size())});
  }
  out.text = m.render() + t.to_csv();
  if (warnings > 0) {
    out.warning = true;
    out.message = std::to_string(warnings) + " sweep point(s) had not decayed by the horizon (tail ratio > 1e-8)";
  }
  return out;
}

} // namespace noisy_tunnel
