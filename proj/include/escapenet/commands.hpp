#pragma once

// The five experiment commands behind the CLI. Each one creates the output
// directory, writes provenance.json, runs its computation, and persists
// results per the configured formats. Orchestration is single-threaded;
// only the ensemble engine parallelizes, and all file writes happen here.

#include "escapenet/analysis.hpp"
#include "escapenet/config.hpp"
#include "escapenet/deterministic.hpp"
#include "escapenet/output.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace escapenet {

namespace detail {

inline int resolve_workers(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

inline std::filesystem::path prepare_out_dir(const ExperimentConfig& cfg) {
  const std::filesystem::path dir = cfg.out_dir;
  std::filesystem::create_directories(dir);
  write_provenance_file(dir, Provenance::of(cfg));
  return dir;
}

// Node sequence as a 1-based dash-joined string, e.g. "2-1-3".
inline std::string sequence_string(const std::vector<int>& seq) {
  std::string out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i) out += '-';
    out += std::to_string(seq[i] + 1);
  }
  return out;
}

inline std::string beta_file_tag(double beta) { return format_double(beta); }

inline nlohmann::json stats_json(const EscapeStats& st) {
  return nlohmann::json{{"k", st.k},           {"l", st.l},
                        {"n_samples", st.n_samples}, {"mean", st.mean},
                        {"sd", st.sd},         {"cv", st.cv},
                        {"n_censored", st.n_censored}};
}

}  // namespace detail

// Simulates the configured ensembles (one per beta value) and writes
// per-realization, summary, histogram, sequence, and mixture tables.
inline std::filesystem::path cmd_ensemble(const ExperimentConfig& cfg,
                                          int workers = 0) {
  const auto dir = detail::prepare_out_dir(cfg);
  const Provenance prov = Provenance::of(cfg);
  const int n_workers = detail::resolve_workers(workers);

  std::optional<CsvWriter> summary, histograms, sequences, mixtures;
  if (cfg.write_csv) {
    summary.emplace(dir / "summary.csv", prov);
    summary->header(
        {"beta", "k", "l", "n_samples", "mean", "sd", "cv", "n_censored"});
    histograms.emplace(dir / "histograms.csv", prov);
    histograms->header({"beta", "k", "l", "bin_lo", "bin_hi", "count"});
    sequences.emplace(dir / "sequences.csv", prov);
    sequences->header({"beta", "sequence", "count", "probability",
                       "wilson_lo", "wilson_hi"});
    if (cfg.classify) {
      mixtures.emplace(dir / "mixture.csv", prov);
      mixtures->header({"beta", "p_trapped", "n_direct", "mean_direct",
                        "sd_direct", "n_trapped", "mean_trapped",
                        "sd_trapped", "n_pooled", "mean_pooled", "sd_pooled",
                        "cv_pooled", "second_moment_rms", "population_sd",
                        "n_unclassified", "n_censored"});
    }
  }
  nlohmann::json jresults = nlohmann::json::array();

  for (double beta : cfg.betas) {
    const NetworkSpec net = cfg.network(beta);
    auto records = run_ensemble(net, cfg.sim, n_workers);
    if (cfg.classify) classify_ensemble(records, net);

    if (cfg.write_csv) {
      CsvWriter reals(
          dir / ("realizations_beta_" + detail::beta_file_tag(beta) + ".csv"),
          prov);
      reals.header({"realization", "node", "tau", "sequence_position",
                    "classification", "censored"});
      for (std::size_t r = 0; r < records.size(); ++r) {
        const auto& rec = records[r];
        for (int i = 0; i < net.n_units; ++i) {
          const auto pos =
              std::find(rec.sequence.begin(), rec.sequence.end(), i);
          const std::string position =
              pos == rec.sequence.end()
                  ? ""
                  : std::to_string(pos - rec.sequence.begin() + 1);
          reals.row(static_cast<long>(r), i + 1, rec.tau_node[i], position,
                    std::string(to_string(rec.classification)),
                    static_cast<int>(rec.censored));
        }
      }
    }

    nlohmann::json jbeta{{"beta", beta}};
    nlohmann::json jstats = nlohmann::json::array();
    for (const auto& [k, l] : cfg.stats_pairs) {
      const auto samples = inter_escape_times(records, k, l);
      if (samples.size() < 2)
        throw std::runtime_error(
            "ensemble: fewer than 2 uncensored realizations for tau^{" +
            std::to_string(k) + "|" + std::to_string(l) +
            "} at beta = " + format_double(beta));
      EscapeStats st = escape_stats(records, k, l);
      if (summary)
        summary->row(beta, k, l, st.n_samples, st.mean, st.sd, st.cv,
                     st.n_censored);
      jstats.push_back(detail::stats_json(st));

      if (histograms) {
        const double max_sample = *std::max_element(samples.begin(), samples.end());
        const double hi =
            cfg.bin_width *
            std::max(1.0, std::ceil(max_sample / cfg.bin_width));
        const Histogram hist = histogram(samples, cfg.bin_width, 0.0, hi);
        for (std::size_t b = 0; b < hist.counts.size(); ++b)
          histograms->row(beta, k, l, hist.lo + b * hist.bin_width,
                          hist.lo + (b + 1) * hist.bin_width, hist.counts[b]);
      }
    }
    jbeta["stats"] = jstats;

    const SequenceTable table = sequence_distribution(records);
    nlohmann::json jseq = nlohmann::json::array();
    for (const auto& [seq, entry] : table.entries) {
      const std::string label = detail::sequence_string(seq);
      if (sequences)
        sequences->row(beta, label, entry.count, entry.probability,
                       entry.wilson.lo, entry.wilson.hi);
      jseq.push_back(nlohmann::json{{"sequence", label},
                                    {"count", entry.count},
                                    {"probability", entry.probability},
                                    {"wilson_lo", entry.wilson.lo},
                                    {"wilson_hi", entry.wilson.hi}});
    }
    jbeta["sequences"] = jseq;

    if (cfg.classify) {
      const MixtureDecomposition mix = mixture_decomposition(records);
      if (mixtures)
        mixtures->row(beta, mix.p_trapped, mix.stats_direct.n_samples,
                      mix.stats_direct.mean, mix.stats_direct.sd,
                      mix.stats_trapped.n_samples, mix.stats_trapped.mean,
                      mix.stats_trapped.sd, mix.combined.n_samples,
                      mix.combined.mean, mix.combined.sd, mix.combined.cv,
                      mix.second_moment_rms, mix.population_sd,
                      mix.n_unclassified, mix.n_censored);
      jbeta["mixture"] =
          nlohmann::json{{"p_trapped", mix.p_trapped},
                         {"direct", detail::stats_json(mix.stats_direct)},
                         {"trapped", detail::stats_json(mix.stats_trapped)},
                         {"pooled", detail::stats_json(mix.combined)},
                         {"second_moment_rms", mix.second_moment_rms},
                         {"population_sd", mix.population_sd},
                         {"n_unclassified", mix.n_unclassified}};
    }
    jresults.push_back(jbeta);
  }

  if (cfg.write_json)
    write_json_file(dir / "summary.json",
                    nlohmann::json{{"provenance", provenance_json(prov)},
                                   {"results", jresults}});
  return dir;
}

namespace detail {

inline void write_equilibria_csv(const ExperimentConfig& cfg,
                                 const std::filesystem::path& dir,
                                 const Provenance& prov) {
  CsvWriter eq(dir / "equilibria.csv", prov);
  std::vector<std::string> cols = {"beta", "label", "stability",
                                   "unstable_dim", "residual"};
  for (int i = 1; i <= cfg.n_units; ++i) cols.push_back("x" + std::to_string(i));
  for (int i = 1; i <= cfg.n_units; ++i) {
    cols.push_back("eig" + std::to_string(i) + "_re");
    cols.push_back("eig" + std::to_string(i) + "_im");
  }
  eq.header_fields(cols);
  for (double beta : cfg.betas) {
    for (const auto& e : find_equilibria(cfg.network(beta))) {
      std::vector<std::string> row = {format_double(beta), e.label,
                                      to_string(e.stability),
                                      std::to_string(e.unstable_dim),
                                      format_double(e.residual)};
      for (double x : e.location) row.push_back(format_double(x));
      for (const auto& ev : e.eigenvalues) {
        row.push_back(format_double(ev.real()));
        row.push_back(format_double(ev.imag()));
      }
      eq.raw_row(row);
    }
  }
}

}  // namespace detail

// Equilibrium census per beta value: location, label, stability class,
// eigenvalues, and Newton residual.
inline std::filesystem::path cmd_equilibria(const ExperimentConfig& cfg) {
  const auto dir = detail::prepare_out_dir(cfg);
  detail::write_equilibria_csv(cfg, dir, Provenance::of(cfg));
  return dir;
}

// Equilibria, unstable-manifold polylines, the uncoupled potential-sum
// grid, and optional sample noisy trajectories — the plane-portrait data.
inline std::filesystem::path cmd_phase_portrait(const ExperimentConfig& cfg) {
  if (cfg.n_units != 2)
    throw ConfigError("phase-portrait requires a two-node network, got n = " +
                      std::to_string(cfg.n_units));
  const auto dir = detail::prepare_out_dir(cfg);
  const Provenance prov = Provenance::of(cfg);

  detail::write_equilibria_csv(cfg, dir, prov);

  CsvWriter manifolds(dir / "manifolds.csv", prov);
  manifolds.header({"beta", "saddle", "direction", "point", "t", "x1", "x2",
                    "landing"});
  ShootOptions shoot;
  shoot.record_stride = 100;  // 0.1 time units per polyline vertex
  for (double beta : cfg.betas) {
    const NetworkSpec net = cfg.network(beta);
    for (const auto& e : find_equilibria(net)) {
      if (e.unstable_dim != 1) continue;
      for (int direction : {+1, -1}) {
        const ManifoldBranch branch =
            shoot_unstable_manifold(e, direction, net, shoot);
        const auto& tr = branch.trajectory;
        for (std::size_t p = 0; p < tr.times.size(); ++p)
          manifolds.row(beta, e.label, direction, static_cast<long>(p),
                        tr.times[p], tr.states[p][0], tr.states[p][1],
                        branch.landing);
      }
    }
  }

  // Uncoupled potential sum V(x1) + V(x2), the contour background of the
  // beta = 0 portrait.
  CsvWriter grid(dir / "potential_grid.csv", prov);
  grid.header({"x1", "x2", "v"});
  const UnitParams unit{cfg.nu};
  constexpr double lo = -0.4, hi = 1.4, step = 0.025;
  const int n_grid = static_cast<int>(std::lround((hi - lo) / step)) + 1;
  for (int i = 0; i < n_grid; ++i) {
    const double x1 = lo + i * step;
    for (int j = 0; j < n_grid; ++j) {
      const double x2 = lo + j * step;
      grid.row(x1, x2, potential(x1, unit) + potential(x2, unit));
    }
  }

  if (cfg.sample_trajectories > 0) {
    CsvWriter traj(dir / "trajectories.csv", prov);
    traj.header({"beta", "sample", "t", "x1", "x2"});
    const int record_stride = 100;
    for (double beta : cfg.betas) {
      const NetworkSpec net = cfg.network(beta);
      for (int sample = 0; sample < cfg.sample_trajectories; ++sample) {
        // Reuses the ensemble noise streams, so sample r retraces ensemble
        // realization r of the same seed.
        std::vector<std::mt19937_64> engines;
        for (int i = 0; i < net.n_units; ++i)
          engines.emplace_back(detail::stream_seed(
              cfg.sim.master_seed, static_cast<std::uint64_t>(sample),
              static_cast<std::uint64_t>(i)));
        std::vector<std::normal_distribution<double>> normals(
            net.n_units,
            std::normal_distribution<double>(0.0, std::sqrt(cfg.sim.dt)));
        StateVec s(net.n_units, net.unit.x_quiescent());
        StateVec f0(net.n_units), f1(net.n_units), pred(net.n_units);
        std::vector<double> dW(net.n_units);
        const auto n_steps = static_cast<long long>(
            std::ceil(cfg.trajectory_t_max / cfg.sim.dt - 1e-9));
        traj.row(beta, sample, 0.0, s[0], s[1]);
        for (long long step = 1; step <= n_steps; ++step) {
          for (int i = 0; i < net.n_units; ++i) dW[i] = normals[i](engines[i]);
          heun_step(s, net, cfg.sim.alpha, cfg.sim.dt, dW, f0, f1, pred);
          if (step % record_stride == 0 || step == n_steps)
            traj.row(beta, sample, step * cfg.sim.dt, s[0], s[1]);
        }
      }
    }
  }
  return dir;
}

struct SaddleSearch {
  double bracket_lo = 0.02;
  double bracket_hi = 0.03;
  double tol = 1e-4;
  std::string saddle = "QS";
  int direction = +1;
};

// Bisection for the coupling strength where the chosen manifold branch
// switches landing attractors, reported against the narrow-pulse estimate.
inline std::filesystem::path cmd_saddle_connection(
    const ExperimentConfig& cfg, const SaddleSearch& search = {}) {
  if (static_cast<int>(search.saddle.size()) != cfg.n_units)
    throw ConfigError("saddle label '" + search.saddle + "' does not match n = " +
                      std::to_string(cfg.n_units));
  if (search.direction != 1 && search.direction != -1)
    throw ConfigError("direction must be +1 or -1");
  const auto dir = detail::prepare_out_dir(cfg);
  const Provenance prov = Provenance::of(cfg);

  const NetworkSpec net = cfg.network(0.0);
  const SaddleConnectionResult result =
      find_saddle_connection(net, search.saddle, search.direction,
                             search.bracket_lo, search.bracket_hi, search.tol);

  double mu = std::numeric_limits<double>::quiet_NaN();
  double asymptotic = std::numeric_limits<double>::quiet_NaN();
  double relative_gap = std::numeric_limits<double>::quiet_NaN();
  if (cfg.coupling_kind == CouplingKind::gaussian_pulse) {
    mu = drift_unit(cfg.x_c, net.unit);
    try {
      asymptotic = asymptotic_beta_sc(net.unit, cfg.coupling());
      relative_gap = (result.beta - asymptotic) / asymptotic;
    } catch (const std::invalid_argument&) {
      // No narrow-pulse estimate when the drift at the pulse center is not
      // positive; the bisection result stands on its own.
    }
  }

  if (cfg.write_csv) {
    CsvWriter csv(dir / "saddle_connection.csv", prov);
    csv.header({"saddle", "direction", "bracket_lo", "bracket_hi", "tol",
                "beta_sc", "final_lo", "final_hi", "landing_lo", "landing_hi",
                "mu", "asymptotic", "relative_gap"});
    csv.row(search.saddle, search.direction, search.bracket_lo,
            search.bracket_hi, search.tol, result.beta, result.bracket_lo,
            result.bracket_hi, result.landing_lo, result.landing_hi, mu,
            asymptotic, relative_gap);
  }
  if (cfg.write_json)
    write_json_file(
        dir / "saddle_connection.json",
        nlohmann::json{{"provenance", provenance_json(prov)},
                       {"saddle", search.saddle},
                       {"direction", search.direction},
                       {"bracket", {search.bracket_lo, search.bracket_hi}},
                       {"tol", search.tol},
                       {"beta_sc", result.beta},
                       {"final_bracket", {result.bracket_lo, result.bracket_hi}},
                       {"landing_lo", result.landing_lo},
                       {"landing_hi", result.landing_hi},
                       {"mu", mu},
                       {"asymptotic", asymptotic},
                       {"relative_gap", relative_gap}});
  return dir;
}

// Kernel-density-ready samples per (beta, order pair), each group carrying
// its mean and mean +/- SD markers; samples are sorted ascending.
inline std::filesystem::path cmd_violin_data(const ExperimentConfig& cfg,
                                             int workers = 0) {
  const auto dir = detail::prepare_out_dir(cfg);
  const Provenance prov = Provenance::of(cfg);
  const int n_workers = detail::resolve_workers(workers);

  std::optional<CsvWriter> csv;
  if (cfg.write_csv) {
    csv.emplace(dir / "violin.csv", prov);
    csv->header({"beta", "k", "l", "kind", "value"});
  }
  nlohmann::json jgroups = nlohmann::json::array();

  for (double beta : cfg.betas) {
    const auto records = run_ensemble(cfg.network(beta), cfg.sim, n_workers);
    for (const auto& [k, l] : cfg.stats_pairs) {
      auto samples = inter_escape_times(records, k, l);
      if (samples.size() < 2)
        throw std::runtime_error(
            "violin-data: group beta = " + format_double(beta) + ", tau^{" +
            std::to_string(k) + "|" + std::to_string(l) +
            "} has fewer than 2 samples, cannot report a spread");
      std::sort(samples.begin(), samples.end());
      const EscapeStats st = compute_stats(samples);
      if (csv) {
        for (double v : samples) csv->row(beta, k, l, "sample", v);
        csv->row(beta, k, l, "mean", st.mean);
        csv->row(beta, k, l, "mean_minus_sd", st.mean - st.sd);
        csv->row(beta, k, l, "mean_plus_sd", st.mean + st.sd);
      }
      if (cfg.write_json)
        jgroups.push_back(nlohmann::json{{"beta", beta},
                                         {"k", k},
                                         {"l", l},
                                         {"mean", st.mean},
                                         {"sd", st.sd},
                                         {"samples", samples}});
    }
  }
  if (cfg.write_json)
    write_json_file(dir / "violin.json",
                    nlohmann::json{{"provenance", provenance_json(prov)},
                                   {"groups", jgroups}});
  return dir;
}

}  // namespace escapenet
