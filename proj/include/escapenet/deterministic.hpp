#pragma once

// Noise-free analysis of coupled bistable networks: fixed-step RK4
// integration, Newton-based equilibrium census with eigenvalue
// classification, unstable-manifold shooting, basin queries, bisection
// for the coupling strength at which a saddle's unstable branch switches
// its landing attractor, and the narrow-pulse asymptotics for that
// threshold and for the transit-induced kick.

#include "escapenet/model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace escapenet {

struct IntegrationOptions {
  double dt = 1e-3;
  double t_max = 1e4;
  int record_stride = 1;  // keep every k-th step in the returned trajectory
};

enum class StopReason { horizon, predicate };

struct Trajectory {
  std::vector<double> times;     // recorded sample times; endpoints always kept
  std::vector<StateVec> states;  // states matching `times`
  StopReason reason = StopReason::horizon;

  const StateVec& final_state() const { return states.back(); }
  double final_time() const { return times.back(); }
};

using StopPredicate = std::function<bool(double t, const StateVec& s)>;

namespace detail {

inline bool all_finite(const StateVec& s) {
  return std::all_of(s.begin(), s.end(),
                     [](double x) { return std::isfinite(x); });
}

// One classical RK4 step, in place. Scratch vectors are caller-owned so the
// hot loop performs no allocations.
inline void rk4_step(StateVec& s, double dt, const NetworkSpec& net,
                     StateVec& k1, StateVec& k2, StateVec& k3, StateVec& k4,
                     StateVec& tmp) {
  const int n = net.n_units;
  network_drift(s, net, k1);
  for (int i = 0; i < n; ++i) tmp[i] = s[i] + 0.5 * dt * k1[i];
  network_drift(tmp, net, k2);
  for (int i = 0; i < n; ++i) tmp[i] = s[i] + 0.5 * dt * k2[i];
  network_drift(tmp, net, k3);
  for (int i = 0; i < n; ++i) tmp[i] = s[i] + dt * k3[i];
  network_drift(tmp, net, k4);
  for (int i = 0; i < n; ++i)
    s[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

}  // namespace detail

// Integrates the noise-free drift with classical fixed-step RK4 until t_max
// or until `stop` returns true (checked after every step). Throws
// std::runtime_error if the state leaves the representable range.
inline Trajectory integrate_ode(const StateVec& s0, const NetworkSpec& net,
                                const IntegrationOptions& opts = {},
                                const StopPredicate& stop = {}) {
  if (opts.dt <= 0.0 || opts.t_max <= 0.0)
    throw std::invalid_argument("integrate_ode: dt and t_max must be positive");
  if (opts.record_stride < 1)
    throw std::invalid_argument("integrate_ode: record_stride must be >= 1");
  if (static_cast<int>(s0.size()) != net.n_units)
    throw std::invalid_argument(
        "integrate_ode: state dimension does not match the network");

  const auto n_steps =
      static_cast<long long>(std::ceil(opts.t_max / opts.dt - 1e-9));
  StateVec s = s0;
  StateVec k1(s0.size()), k2(s0.size()), k3(s0.size()), k4(s0.size()),
      tmp(s0.size());

  Trajectory out;
  out.times.push_back(0.0);
  out.states.push_back(s);
  for (long long step = 1; step <= n_steps; ++step) {
    detail::rk4_step(s, opts.dt, net, k1, k2, k3, k4, tmp);
    if (!detail::all_finite(s))
      throw std::runtime_error("integrate_ode: state diverged at t = " +
                               std::to_string(static_cast<double>(step) *
                                              opts.dt));
    const double t = static_cast<double>(step) * opts.dt;
    const bool stopping = stop && stop(t, s);
    if (stopping || step == n_steps || step % opts.record_stride == 0) {
      out.times.push_back(t);
      out.states.push_back(s);
    }
    if (stopping) {
      out.reason = StopReason::predicate;
      return out;
    }
  }
  out.reason = StopReason::horizon;
  return out;
}

// Analytic Jacobian of the network drift. Diagonal: unit drift derivative
// plus the target-side coupling derivative summed over in-neighbors.
// Off-diagonal (i, j) for j feeding i: beta times the source-side coupling
// derivative at x_j.
inline Eigen::MatrixXd jacobian(const StateVec& s, const NetworkSpec& net) {
  const int n = net.n_units;
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    j(i, i) = drift_unit_derivative(s[i], net.unit);
    for (int nb : net.in_neighbors[i]) {
      j(i, nb) += net.beta * net.coupling.response_dsource(s[nb]);
      j(i, i) += net.beta * net.coupling.response_dtarget();
    }
  }
  return j;
}

enum class StabilityClass { stable, saddle, source };

inline const char* to_string(StabilityClass c) {
  switch (c) {
    case StabilityClass::stable: return "stable";
    case StabilityClass::saddle: return "saddle";
    case StabilityClass::source: return "source";
  }
  return "?";
}

struct EquilibriumInfo {
  StateVec location;
  std::vector<std::complex<double>> eigenvalues;
  int unstable_dim = 0;  // eigenvalues with positive real part
  StabilityClass stability = StabilityClass::stable;
  std::string label;     // per-coordinate nearest product letter, e.g. "QS"
  double residual = 0.0; // max-norm of the drift at `location`
};

namespace detail {

inline char nearest_product_letter(double x, const UnitParams& p) {
  const double dq = std::abs(x - p.x_quiescent());
  const double ds = std::abs(x - p.x_saddle());
  const double da = std::abs(x - p.x_active());
  if (dq <= ds && dq <= da) return 'Q';
  return ds <= da ? 'S' : 'A';
}

inline double residual_inf(const StateVec& s, const NetworkSpec& net) {
  StateVec d(s.size());
  network_drift(s, net, d);
  double r = 0.0;
  for (double v : d) r = std::max(r, std::abs(v));
  return r;
}

inline std::optional<StateVec> newton_refine(StateVec x, const NetworkSpec& net,
                                             double tol, int max_iter = 100) {
  const int n = net.n_units;
  Eigen::VectorXd f(n);
  StateVec drift(n);
  for (int it = 0; it < max_iter; ++it) {
    network_drift(x, net, drift);
    double r = 0.0;
    for (int i = 0; i < n; ++i) {
      f(i) = drift[i];
      r = std::max(r, std::abs(drift[i]));
    }
    if (r < tol) return x;
    const Eigen::VectorXd dx = jacobian(x, net).partialPivLu().solve(f);
    if (!dx.allFinite()) return std::nullopt;
    for (int i = 0; i < n; ++i) x[i] -= dx(i);
    if (!all_finite(x)) return std::nullopt;
  }
  return std::nullopt;
}

// Unit eigenvector for the single positive-real-part eigenvalue. Sign
// convention: the first component exceeding 1e-12 in magnitude is positive.
inline Eigen::VectorXd unit_unstable_eigenvector(const Eigen::MatrixXd& j) {
  const Eigen::EigenSolver<Eigen::MatrixXd> es(j);
  int idx = -1;
  double best = 0.0;
  for (int i = 0; i < j.rows(); ++i) {
    const double re = es.eigenvalues()(i).real();
    if (re > 1e-9 && (idx < 0 || re > best)) {
      idx = i;
      best = re;
    }
  }
  if (idx < 0)
    throw std::runtime_error(
        "unit_unstable_eigenvector: no unstable eigenvalue");
  Eigen::VectorXcd col = es.eigenvectors().col(idx);
  // A simple real eigenvalue: remove the arbitrary complex phase.
  int pivot = 0;
  for (int i = 1; i < col.size(); ++i)
    if (std::abs(col(i)) > std::abs(col(pivot))) pivot = i;
  Eigen::VectorXd v = (col * (std::abs(col(pivot)) / col(pivot))).real();
  v.normalize();
  for (int i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > 1e-12) {
      if (v(i) < 0) v = -v;
      break;
    }
  }
  return v;
}

}  // namespace detail

// Per-coordinate nearest product letter (Q = quiescent, S = saddle,
// A = active), concatenated into a symbolic label such as "QS" or "AA".
inline std::string product_label(const StateVec& s, const UnitParams& p) {
  std::string out;
  out.reserve(s.size());
  for (double x : s) out.push_back(detail::nearest_product_letter(x, p));
  return out;
}

// Finds equilibria by seeding Newton's method from all 3^N products of the
// uncoupled rest states, deduplicating (max-norm distance < 1e-8), then
// classifying each root via the eigenvalues of the analytic Jacobian.
// Seeds that fail to converge are skipped (counted in *failed_seeds when
// provided). Results are sorted lexicographically by location.
inline std::vector<EquilibriumInfo> find_equilibria(
    const NetworkSpec& net, double tol = 1e-12, int* failed_seeds = nullptr) {
  if (tol <= 0.0) throw std::invalid_argument("find_equilibria: tol must be positive");
  const int n = net.n_units;
  const double levels[3] = {net.unit.x_quiescent(), net.unit.x_saddle(),
                            net.unit.x_active()};
  long long n_seeds = 1;
  for (int i = 0; i < n; ++i) n_seeds *= 3;

  std::vector<StateVec> roots;
  int failures = 0;
  for (long long seed_idx = 0; seed_idx < n_seeds; ++seed_idx) {
    StateVec seed(n);
    long long rem = seed_idx;
    for (int i = 0; i < n; ++i) {
      seed[i] = levels[rem % 3];
      rem /= 3;
    }
    const auto refined = detail::newton_refine(std::move(seed), net, tol);
    if (!refined) {
      ++failures;
      continue;
    }
    const bool duplicate =
        std::any_of(roots.begin(), roots.end(), [&](const StateVec& r) {
          double d = 0.0;
          for (int i = 0; i < n; ++i)
            d = std::max(d, std::abs(r[i] - (*refined)[i]));
          return d < 1e-8;
        });
    if (!duplicate) roots.push_back(*refined);
  }
  if (failed_seeds) *failed_seeds = failures;
  std::sort(roots.begin(), roots.end());

  std::vector<EquilibriumInfo> out;
  out.reserve(roots.size());
  for (auto& loc : roots) {
    EquilibriumInfo info;
    const Eigen::EigenSolver<Eigen::MatrixXd> es(jacobian(loc, net));
    info.eigenvalues.reserve(n);
    for (int i = 0; i < n; ++i) {
      info.eigenvalues.push_back(es.eigenvalues()(i));
      if (es.eigenvalues()(i).real() > 1e-9) ++info.unstable_dim;
    }
    info.stability = info.unstable_dim == 0   ? StabilityClass::stable
                     : info.unstable_dim == n ? StabilityClass::source
                                              : StabilityClass::saddle;
    info.label = product_label(loc, net.unit);
    info.residual = detail::residual_inf(loc, net);
    info.location = std::move(loc);
    out.push_back(std::move(info));
  }
  return out;
}

namespace detail {

// Declares an attractor reached once the state has stayed within `tol`
// (max-norm) of the same stable equilibrium for `consecutive` successive
// integration steps; a plain one-shot test can fire spuriously during slow
// passage near a saddle.
class LandingWatch {
 public:
  LandingWatch(std::vector<EquilibriumInfo> stables, double tol,
               int consecutive)
      : stables_(std::move(stables)), tol_(tol), need_(consecutive) {}

  bool operator()(double /*t*/, const StateVec& s) {
    int near = -1;
    for (std::size_t k = 0; k < stables_.size(); ++k) {
      double d = 0.0;
      for (std::size_t i = 0; i < s.size(); ++i)
        d = std::max(d, std::abs(s[i] - stables_[k].location[i]));
      if (d < tol_) {
        near = static_cast<int>(k);
        break;
      }
    }
    if (near >= 0 && near == hit_) {
      ++run_;
    } else {
      hit_ = near;
      run_ = near >= 0 ? 1 : 0;
    }
    return near >= 0 && run_ >= need_;
  }

  // Valid only after operator() returned true.
  const EquilibriumInfo& landed() const { return stables_[hit_]; }

 private:
  std::vector<EquilibriumInfo> stables_;
  double tol_;
  int need_;
  int hit_ = -1;
  int run_ = 0;
};

inline std::vector<EquilibriumInfo> stable_equilibria(const NetworkSpec& net) {
  std::vector<EquilibriumInfo> stables;
  for (auto& e : find_equilibria(net))
    if (e.stability == StabilityClass::stable) stables.push_back(std::move(e));
  return stables;
}

}  // namespace detail

struct ShootOptions {
  double delta = 1e-6;  // offset from the saddle along the unit eigenvector
  double dt = 1e-3;
  double t_max = 1e4;
  int record_stride = 10;
  double landing_tol = 1e-6;    // max-norm distance declaring an attractor hit
  int landing_consecutive = 10; // steps the hit must persist
};

struct ManifoldBranch {
  EquilibriumInfo saddle;
  int direction = +1;     // sense along the unit unstable eigenvector
  Trajectory trajectory;  // polyline from the offset start to the landing
  std::string landing;    // label of the attractor reached, or "none"
};

// Follows one branch of a saddle's one-dimensional unstable manifold:
// starts at saddle + direction * delta * v (v the unit unstable
// eigenvector, first-nonzero-component-positive convention) and integrates
// until an attractor is reached or t_max elapses.
inline ManifoldBranch shoot_unstable_manifold(const EquilibriumInfo& saddle,
                                              int direction,
                                              const NetworkSpec& net,
                                              const ShootOptions& opts = {}) {
  if (saddle.unstable_dim != 1)
    throw std::invalid_argument(
        "shoot_unstable_manifold: saddle must have a one-dimensional "
        "unstable manifold");
  if (direction != 1 && direction != -1)
    throw std::invalid_argument(
        "shoot_unstable_manifold: direction must be +1 or -1");

  const int n = net.n_units;
  const Eigen::VectorXd v =
      detail::unit_unstable_eigenvector(jacobian(saddle.location, net));
  StateVec s0(n);
  for (int i = 0; i < n; ++i)
    s0[i] = saddle.location[i] + direction * opts.delta * v(i);

  detail::LandingWatch watch(detail::stable_equilibria(net), opts.landing_tol,
                             opts.landing_consecutive);
  const IntegrationOptions io{opts.dt, opts.t_max, opts.record_stride};

  ManifoldBranch branch;
  branch.saddle = saddle;
  branch.direction = direction;
  branch.trajectory = integrate_ode(
      s0, net, io, [&watch](double t, const StateVec& s) { return watch(t, s); });
  branch.landing = branch.trajectory.reason == StopReason::predicate
                       ? watch.landed().label
                       : "none";
  return branch;
}

// Labels the attractor whose basin contains s, by direct integration.
// Returns "undetermined" if no attractor is reached before t_max.
inline std::string basin_of(const StateVec& s, const NetworkSpec& net,
                            double dt = 1e-3, double t_max = 1e4) {
  detail::LandingWatch watch(detail::stable_equilibria(net), 1e-6, 10);
  const IntegrationOptions io{dt, t_max, 1 << 20};
  const Trajectory tr = integrate_ode(
      s, net, io, [&watch](double t, const StateVec& st) { return watch(t, st); });
  return tr.reason == StopReason::predicate ? watch.landed().label
                                            : "undetermined";
}

struct SaddleConnectionResult {
  double beta = 0.0;        // midpoint of the final bracket
  double bracket_lo = 0.0;  // final bracket, width < tol_beta
  double bracket_hi = 0.0;
  std::string landing_lo;   // landing label on the low-beta side
  std::string landing_hi;   // landing label on the high-beta side
};

// Bisection in the coupling strength over the switch of the landing label
// of one unstable-manifold branch. The bracket is valid only if the two
// endpoint landings are distinct attractors.
inline SaddleConnectionResult find_saddle_connection(
    const NetworkSpec& net, const std::string& saddle_label, int direction,
    double beta_lo, double beta_hi, double tol_beta = 1e-4,
    const ShootOptions& shoot_opts = {}) {
  if (!(beta_lo < beta_hi))
    throw std::invalid_argument("find_saddle_connection: need beta_lo < beta_hi");
  if (tol_beta <= 0.0)
    throw std::invalid_argument("find_saddle_connection: tol_beta must be positive");

  const auto landing_at = [&](double beta) -> std::string {
    const NetworkSpec nb = net.with_beta(beta);
    const auto eqs = find_equilibria(nb);
    const auto it = std::find_if(eqs.begin(), eqs.end(), [&](const auto& e) {
      return e.label == saddle_label && e.unstable_dim == 1;
    });
    if (it == eqs.end())
      throw std::runtime_error(
          "find_saddle_connection: no one-dimensional saddle labeled '" +
          saddle_label + "' at beta = " + std::to_string(beta));
    return shoot_unstable_manifold(*it, direction, nb, shoot_opts).landing;
  };

  const std::string land_lo = landing_at(beta_lo);
  const std::string land_hi = landing_at(beta_hi);
  if (land_lo == "none" || land_hi == "none" || land_lo == land_hi)
    throw std::invalid_argument(
        "find_saddle_connection: invalid bracket: landing at beta_lo is '" +
        land_lo + "', at beta_hi is '" + land_hi + "'");

  double lo = beta_lo, hi = beta_hi;
  while (hi - lo >= tol_beta) {
    const double mid = 0.5 * (lo + hi);
    if (landing_at(mid) == land_lo)
      lo = mid;
    else
      hi = mid;
  }
  return {0.5 * (lo + hi), lo, hi, land_lo, land_hi};
}

// Narrow-pulse estimate of the landing-switch coupling strength:
// 2 * f(x_c) * sqrt(nu), valid when the pulse center lies in the transit
// region where the unit drift is positive.
inline double asymptotic_beta_sc(const UnitParams& p, const CouplingSpec& c) {
  if (c.kind != CouplingKind::gaussian_pulse)
    throw std::invalid_argument(
        "asymptotic_beta_sc: defined for gaussian-pulse coupling only");
  const double mu = drift_unit(c.x_c, p);
  if (mu <= 0.0)
    throw std::invalid_argument(
        "asymptotic_beta_sc: unit drift at the pulse center must be positive");
  return 2.0 * mu * std::sqrt(p.nu);
}

struct KickProtocol {
  double epsilon = 1e-6;     // start offset above the saddle for the source
  double entry_sigmas = 5.0; // source starts at x_c - entry_sigmas * sigma
                             // when that lies above the saddle
  double exit_sigmas = 4.0;  // measurement ends when the source passes
                             // x_c + exit_sigmas * sigma
  double dt = 1e-3;
  double t_max = 1e4;
};

// Measures the displacement a single transit imparts on a resting listener
// in the two-node network: node 1 (index 1) is released just above its
// saddle, rolls through the pulse window, and the peak displacement of
// node 0 from its quiescent start is returned. The peak is the natural
// observable: after the pulse has passed, a subcritical listener relaxes
// back toward rest, which would otherwise contaminate the measurement.
inline double kick_size(const NetworkSpec& net, const KickProtocol& proto = {}) {
  if (net.coupling.kind != CouplingKind::gaussian_pulse)
    throw std::invalid_argument(
        "kick_size: defined for gaussian-pulse coupling only");
  if (net.n_units != 2)
    throw std::invalid_argument(
        "kick_size: protocol is defined for the two-node network");
  const UnitParams& p = net.unit;
  const double x_exit =
      net.coupling.x_c + proto.exit_sigmas * net.coupling.sigma;
  if (x_exit >= p.x_active())
    throw std::invalid_argument(
        "kick_size: exit point lies at or beyond the active state; "
        "reduce exit_sigmas");

  const double start_source =
      std::max(p.x_saddle() + proto.epsilon,
               net.coupling.x_c - proto.entry_sigmas * net.coupling.sigma);
  const StateVec s0{p.x_quiescent(), start_source};

  double peak = 0.0;
  const auto stop = [&](double, const StateVec& s) {
    peak = std::max(peak, s[0] - s0[0]);
    return s[1] >= x_exit;
  };
  const IntegrationOptions io{proto.dt, proto.t_max, 1 << 30};
  const Trajectory tr = integrate_ode(s0, net, io, stop);
  if (tr.reason != StopReason::predicate)
    throw std::runtime_error(
        "kick_size: source node failed to cross the pulse window before "
        "t_max");
  return peak;
}

}  // namespace escapenet
