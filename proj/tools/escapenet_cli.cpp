// escapenet command-line driver.
//
// Subcommands map one-to-one onto the experiment commands: `ensemble`,
// `phase-portrait`, `saddle-connection`, `violin-data`, `equilibria`.
// Exit codes: 0 success, 2 configuration/usage errors, 3 runtime errors.

#include "escapenet/commands.hpp"

#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int workers = 0;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path,
                  "Experiment config file (INI); defaults apply if omitted");
  cmd->add_option("--out", opts.out_dir, "Output directory (overrides config)");
  cmd->add_option("--seed", opts.seed, "Master seed (overrides config)")
      ->each([&opts](const std::string&) { opts.seed_set = true; });
  cmd->add_option("--workers", opts.workers,
                  "Worker threads; 0 means all hardware threads")
      ->check(CLI::NonNegativeNumber);
}

escapenet::ExperimentConfig make_config(const CommonOpts& opts) {
  escapenet::ExperimentConfig cfg = opts.config_path.empty()
                                        ? escapenet::ExperimentConfig{}
                                        : escapenet::load_config(opts.config_path);
  if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
  if (opts.seed_set) cfg.sim.master_seed = opts.seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Escape-time experiments on small bistable networks"};
  app.set_version_flag("--version", std::string(escapenet::version));
  app.require_subcommand(1);

  CommonOpts ens_opts, phase_opts, saddle_opts, violin_opts, eq_opts;

  CLI::App* ens = app.add_subcommand(
      "ensemble", "Simulate escape-time ensembles and write statistics");
  add_common(ens, ens_opts);

  CLI::App* phase = app.add_subcommand(
      "phase-portrait",
      "Equilibria, unstable manifolds, and the potential grid for n = 2");
  add_common(phase, phase_opts);

  CLI::App* saddle = app.add_subcommand(
      "saddle-connection",
      "Bisect for the coupling strength where a manifold changes landing");
  add_common(saddle, saddle_opts);
  escapenet::SaddleSearch search;
  saddle->add_option("--bracket-lo", search.bracket_lo,
                     "Lower end of the coupling bracket");
  saddle->add_option("--bracket-hi", search.bracket_hi,
                     "Upper end of the coupling bracket");
  saddle->add_option("--tol", search.tol, "Bisection tolerance on beta")
      ->check(CLI::PositiveNumber);
  saddle->add_option("--saddle", search.saddle,
                     "Saddle label to shoot from, e.g. QS");
  saddle->add_option("--direction", search.direction,
                     "Branch direction along the unstable eigenvector, +1 or -1");

  CLI::App* violin = app.add_subcommand(
      "violin-data", "Per-group sorted escape-time samples with spread markers");
  add_common(violin, violin_opts);

  CLI::App* eq = app.add_subcommand(
      "equilibria", "Equilibrium census: locations, labels, eigenvalues");
  add_common(eq, eq_opts);

  try {
    app.parse(argc, argv);

    std::filesystem::path dir;
    if (*ens) {
      dir = escapenet::cmd_ensemble(make_config(ens_opts), ens_opts.workers);
    } else if (*phase) {
      dir = escapenet::cmd_phase_portrait(make_config(phase_opts));
    } else if (*saddle) {
      dir = escapenet::cmd_saddle_connection(make_config(saddle_opts), search);
    } else if (*violin) {
      dir = escapenet::cmd_violin_data(make_config(violin_opts),
                                       violin_opts.workers);
    } else {
      dir = escapenet::cmd_equilibria(make_config(eq_opts));
    }
    std::cout << "results written to " << dir.string() << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    app.exit(e);
    return 2;
  } catch (const escapenet::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
