// Command-line front end: evolve, sweep-coherence, sweep-nonmarkov, validate.
//
// Exit codes: 0 success, 2 invalid arguments or configuration, 3 numerical
// failure (or a horizon warning under --strict), 4 validation failure.

#include "noisy_tunnel/config.hpp"
#include "noisy_tunnel/sweep.hpp"
#include "noisy_tunnel/validation.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace nt = noisy_tunnel;

namespace {

enum ExitCode { kOk = 0, kInvalid = 2, kNumerical = 3, kValidation = 4 };

struct Flags {
  std::string config_path;
  std::string out_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  unsigned workers = 0;
  bool strict = false;
};

// Writes next to the target and renames, so a failed run leaves no partial file.
void write_atomically(const std::string &path, const std::string &text) {
  if (path.empty() || path == "-") {
    std::cout << text << std::flush;
    return;
  }
  const std::string tmp = path + ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw nt::ConfigError("cannot open output file '" + path + "'");
    out << text;
    out.flush();
    if (!out) {
      out.close();
      std::filesystem::remove(tmp);
      throw std::runtime_error("failed writing '" + path + "'");
    }
  }
  std::filesystem::rename(tmp, path);
}

nt::Config load(const Flags &f, const std::string &command) {
  nt::Config c = f.config_path.empty() ? nt::Config{} : nt::load_config_file(f.config_path);
  for (const auto &o : f.overrides)
    c.set_assignment(o);
  if (c.has("command") && c.get_string("command", "") != command)
    throw nt::ConfigError("configuration was written by '" + c.get_string("command", "") + "', not '" + command + "'");
  return c;
}

nt::RunOptions run_options(const Flags &f, const nt::Config &c) {
  nt::RunOptions o;
  const long long seed = c.get_int("seed", 42);
  if (seed < 0)
    throw nt::ConfigError("seed must be non-negative");
  o.seed = f.seed ? *f.seed : static_cast<std::uint64_t>(seed);
  o.workers = f.workers;
  o.strict = f.strict;
  return o;
}

int finish(const nt::CommandOutput &out, const Flags &f) {
  if (out.warning) {
    std::cerr << "warning: " << out.message << '\n';
    if (f.strict) {
      std::cerr << "error: warning escalated by --strict; no output written\n";
      return kNumerical;
    }
  }
  write_atomically(f.out_path, out.text);
  return kOk;
}

void add_common(CLI::App *cmd, Flags &f) {
  cmd->add_option("--config", f.config_path, "Config file (key = value, [section]) or a previous output to replay");
  cmd->add_option("--out", f.out_path, "Output CSV path (default: stdout)");
  cmd->add_option("--set", f.overrides, "Override a config key, e.g. --set model.kappa=0.2");
  cmd->add_option("--seed", f.seed, "Random seed");
  cmd->add_option("--workers", f.workers, "Worker threads (default: NOISY_TUNNEL_WORKERS or hardware)");
  cmd->add_flag("--strict", f.strict, "Treat horizon warnings as numerical failures");
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Noise-averaged dynamics, coherence and non-Markovianity of a tunneling two-level system"};
  app.set_version_flag("--version", std::string(nt::kToolVersion));
  app.require_subcommand(1);

  Flags f;
  CLI::App *evolve = app.add_subcommand("evolve", "Bloch components and coherences over time");
  CLI::App *coherence = app.add_subcommand("sweep-coherence", "l1 coherence over time and one model parameter");
  CLI::App *nonmarkov = app.add_subcommand("sweep-nonmarkov", "Non-Markovianity over two model parameters");
  CLI::App *validate = app.add_subcommand("validate", "Run closed-form and Monte Carlo oracle checks");
  for (CLI::App *cmd : {evolve, coherence, nonmarkov, validate})
    add_common(cmd, f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return kInvalid;
  }

  try {
    if (evolve->parsed()) {
      const nt::Config c = load(f, "evolve");
      return finish(nt::cmd_evolve(nt::EvolveSettings::from(c), run_options(f, c)), f);
    }
    if (coherence->parsed()) {
      const nt::Config c = load(f, "sweep-coherence");
      return finish(nt::cmd_sweep_coherence(nt::CoherenceSweepSettings::from(c), run_options(f, c)), f);
    }
    if (nonmarkov->parsed()) {
      const nt::Config c = load(f, "sweep-nonmarkov");
      return finish(nt::cmd_sweep_nonmarkov(nt::NonMarkovSweepSettings::from(c), run_options(f, c)), f);
    }
    const nt::Config c = load(f, "validate");
    const nt::ValidateSettings settings = nt::ValidateSettings::from(c);
    const nt::RunOptions opt = run_options(f, c);
    const nt::ValidationReport report = nt::run_validation(settings, opt);
    std::cout << report.summary();
    if (settings.n_realizations == 1)
      std::cerr << "warning: n_realizations = 1, statistical checks skipped\n";
    nt::Manifest m("validate", opt.seed);
    m.add("validate", "n_realizations", std::to_string(settings.n_realizations));
    m.add("validate", "sde_dt", settings.sde_dt);
    m.add("validate", "t_max", settings.t_max);
    m.add("validate", "t_count", std::to_string(settings.t_count));
    if (settings.perturbation)
      m.add("validate", "perturb_generator",
            std::to_string(settings.perturbation->row) + ", " + std::to_string(settings.perturbation->col) + ", " +
                nt::format_double(settings.perturbation->delta));
    if (!f.out_path.empty())
      write_atomically(f.out_path, m.render() + report.residual_table().to_csv());
    const bool ok = report.all_passed();
    std::cout << (ok ? "validation passed\n" : "validation FAILED\n");
    return ok ? kOk : kValidation;
  } catch (const nt::ConfigError &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::invalid_argument &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalid;
  } catch (const nt::StepSizeUnderflow &e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const nt::NumericalFailure &e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumerical;
  }
}
