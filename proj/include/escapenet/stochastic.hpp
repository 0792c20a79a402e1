#pragma once

// Stochastic simulation of the coupled network under additive white noise:
// Heun (predictor-corrector) stepping, online first-crossing detection with
// sub-step interpolation, and a reproducible ensemble runner whose output
// is byte-identical for any worker count.

#include "escapenet/model.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace escapenet {

struct SimConfig {
  double alpha = 0.02;       // noise amplitude
  double dt = 1e-3;
  double h_threshold = 0.8;  // escape level, must satisfy x_S < h < x_A
  double t_max = 1e6;
  int n_realizations = 1000;
  std::uint64_t master_seed = 12345;
  bool record_snapshots = true;

  void validate(const UnitParams& unit) const {
    if (alpha < 0.0)
      throw std::invalid_argument("SimConfig: alpha must be non-negative");
    if (dt <= 0.0) throw std::invalid_argument("SimConfig: dt must be positive");
    if (t_max <= 0.0)
      throw std::invalid_argument("SimConfig: t_max must be positive");
    if (n_realizations < 1)
      throw std::invalid_argument("SimConfig: n_realizations must be >= 1");
    if (!(unit.x_saddle() < h_threshold && h_threshold < unit.x_active()))
      throw std::invalid_argument(
          "SimConfig: h_threshold must lie strictly between the saddle and "
          "the active state");
  }
};

enum class EscapeClass { direct, trapped, unclassified };

inline const char* to_string(EscapeClass c) {
  switch (c) {
    case EscapeClass::direct: return "direct";
    case EscapeClass::trapped: return "trapped";
    case EscapeClass::unclassified: return "unclassified";
  }
  return "?";
}

// One realization's escape data. Censored nodes carry NaN in tau_node and
// are absent from sequence/tau_ordered; `censored` flags their presence.
struct EscapeRecord {
  std::vector<double> tau_node;   // per-node first-crossing time, NaN if never
  std::vector<int> sequence;      // node indices ordered by escape time
  std::vector<double> tau_ordered;
  bool censored = false;
  StateVec snapshot_at_first_escape;  // empty unless recorded and an escape occurred
  EscapeClass classification = EscapeClass::unclassified;

  bool operator==(const EscapeRecord&) const = default;
};

namespace detail {

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Stream seed for (master, realization, node): two chained splitmix64
// finalizer rounds. Streams depend only on the triple, never on scheduling,
// coupling strength, or horizon, so ensembles share random numbers across
// parameter sweeps and reproduce exactly under any worker count.
inline std::uint64_t stream_seed(std::uint64_t master,
                                 std::uint64_t realization,
                                 std::uint64_t node) {
  const std::uint64_t golden = 0x9E3779B97F4A7C15ull;
  return mix64(mix64(master + golden * (realization + 1)) +
               golden * (node + 1));
}

}  // namespace detail

// One Heun step with additive noise, in place: predictor
// p = s + F(s) dt + alpha dW, corrector s' = s + (F(s) + F(p)) dt / 2
// + alpha dW, with the same increments dW in both stages. dW must be drawn
// as Normal(0, dt) per node.
inline void heun_step(StateVec& s, const NetworkSpec& net, double alpha,
                      double dt, const std::vector<double>& dW, StateVec& f0,
                      StateVec& f1, StateVec& pred) {
  const int n = net.n_units;
  network_drift(s, net, f0);
  for (int i = 0; i < n; ++i) pred[i] = s[i] + f0[i] * dt + alpha * dW[i];
  network_drift(pred, net, f1);
  for (int i = 0; i < n; ++i) {
    s[i] += 0.5 * (f0[i] + f1[i]) * dt + alpha * dW[i];
    if (!std::isfinite(s[i]))
      throw std::runtime_error("heun_step: state diverged");
  }
}

inline StateVec heun_step(const StateVec& s, const NetworkSpec& net,
                          double alpha, double dt,
                          const std::vector<double>& dW) {
  if (static_cast<int>(s.size()) != net.n_units ||
      dW.size() != s.size())
    throw std::invalid_argument("heun_step: dimension mismatch");
  StateVec out = s, f0(s.size()), f1(s.size()), pred(s.size());
  heun_step(out, net, alpha, dt, dW, f0, f1, pred);
  return out;
}

// Simulates one realization from the all-quiescent state until every node
// has crossed h_threshold or t_max elapses. A node's escape time is frozen
// at its first up-crossing (linearly interpolated within the step) but its
// state keeps evolving and driving neighbors afterwards.
inline EscapeRecord simulate_realization(const NetworkSpec& net,
                                         const SimConfig& cfg,
                                         int realization_index) {
  cfg.validate(net.unit);
  if (realization_index < 0)
    throw std::invalid_argument(
        "simulate_realization: realization_index must be >= 0");
  const int n = net.n_units;
  const double h = cfg.h_threshold;

  std::vector<std::mt19937_64> engines;
  engines.reserve(n);
  for (int i = 0; i < n; ++i)
    engines.emplace_back(detail::stream_seed(
        cfg.master_seed, static_cast<std::uint64_t>(realization_index),
        static_cast<std::uint64_t>(i)));
  // One distribution per node: normal_distribution carries generation state.
  std::vector<std::normal_distribution<double>> normals(
      n, std::normal_distribution<double>(0.0, std::sqrt(cfg.dt)));

  EscapeRecord rec;
  rec.tau_node.assign(n, std::numeric_limits<double>::quiet_NaN());

  StateVec s(n, net.unit.x_quiescent());
  StateVec prev(n), f0(n), f1(n), pred(n);
  std::vector<double> dW(n);
  int n_crossed = 0;

  const auto n_steps = static_cast<long long>(std::ceil(cfg.t_max / cfg.dt - 1e-9));
  for (long long step = 1; step <= n_steps && n_crossed < n; ++step) {
    prev = s;
    for (int i = 0; i < n; ++i) dW[i] = normals[i](engines[i]);
    heun_step(s, net, cfg.alpha, cfg.dt, dW, f0, f1, pred);

    double theta_first = 2.0;  // earliest in-step crossing fraction
    for (int i = 0; i < n; ++i) {
      if (!std::isnan(rec.tau_node[i]) || s[i] < h) continue;
      const double theta =
          s[i] > prev[i] ? (h - prev[i]) / (s[i] - prev[i]) : 1.0;
      rec.tau_node[i] = (static_cast<double>(step - 1) + theta) * cfg.dt;
      ++n_crossed;
      theta_first = std::min(theta_first, theta);
    }
    if (cfg.record_snapshots && theta_first <= 1.0 &&
        rec.snapshot_at_first_escape.empty()) {
      rec.snapshot_at_first_escape.resize(n);
      for (int i = 0; i < n; ++i)
        rec.snapshot_at_first_escape[i] =
            prev[i] + theta_first * (s[i] - prev[i]);
    }
  }

  rec.censored = n_crossed < n;
  rec.sequence.reserve(n_crossed);
  for (int i = 0; i < n; ++i)
    if (!std::isnan(rec.tau_node[i])) rec.sequence.push_back(i);
  // Order by interpolated time; simultaneous crossings (exactly equal
  // interpolated times) fall back to ascending node index.
  std::stable_sort(rec.sequence.begin(), rec.sequence.end(),
                   [&](int a, int b) { return rec.tau_node[a] < rec.tau_node[b]; });
  rec.tau_ordered.reserve(n_crossed);
  for (int i : rec.sequence) rec.tau_ordered.push_back(rec.tau_node[i]);
  return rec;
}

// Runs cfg.n_realizations independent realizations, optionally across
// worker threads. Realization k draws from streams derived from
// (master_seed, k), so the output is identical for any n_workers.
inline std::vector<EscapeRecord> run_ensemble(const NetworkSpec& net,
                                              const SimConfig& cfg,
                                              int n_workers = 1) {
  cfg.validate(net.unit);
  if (n_workers < 1)
    throw std::invalid_argument("run_ensemble: n_workers must be >= 1");

  std::vector<EscapeRecord> records(cfg.n_realizations);
  std::atomic<int> next{0};
  std::mutex err_mutex;
  std::vector<std::pair<int, std::string>> errors;

  const auto worker = [&] {
    for (;;) {
      const int k = next.fetch_add(1);
      if (k >= cfg.n_realizations) return;
      try {
        records[k] = simulate_realization(net, cfg, k);
      } catch (const std::exception& e) {
        const std::scoped_lock lock(err_mutex);
        errors.emplace_back(k, e.what());
      }
    }
  };

  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  if (!errors.empty()) {
    std::sort(errors.begin(), errors.end());
    std::string msg = "run_ensemble: " + std::to_string(errors.size()) +
                      " realization(s) failed:";
    const std::size_t shown = std::min<std::size_t>(errors.size(), 5);
    for (std::size_t i = 0; i < shown; ++i)
      msg += " [" + std::to_string(errors[i].first) + "] " + errors[i].second + ";";
    if (errors.size() > shown) msg += " ...";
    throw std::runtime_error(msg);
  }
  return records;
}

}  // namespace escapenet
