#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

// Bistable-unit dynamics, coupling laws and network drift field.
//
// Each unit follows dx/dt = f(x) = -(x-1)(x^2 - nu), a gradient flow in the
// tilted double-well potential V(x) = x^4/4 - x^3/3 + nu(x - x^2/2) with a
// shallow "quiescent" minimum at -sqrt(nu), a barrier at +sqrt(nu) and a deep
// "active" minimum at 1. Units interact either diffusively or through a
// localized Gaussian pulse fired when the source unit transits x_c.

namespace escapenet {

using StateVec = std::vector<double>;

/// Parameters of a single bistable unit.
struct UnitParams {
  double nu;

  explicit UnitParams(double nu_) : nu(nu_) {
    if (!(nu > 0.0 && nu < 1.0))
      throw std::invalid_argument("UnitParams: nu must lie in (0, 1), got " +
                                  std::to_string(nu_));
  }

  double x_quiescent() const { return -std::sqrt(nu); }
  double x_saddle() const { return std::sqrt(nu); }
  double x_active() const { return 1.0; }
};

/// Drift of an isolated unit: -(x-1)(x^2 - nu).
inline double drift_unit(double x, const UnitParams& p) {
  return -(x - 1.0) * (x * x - p.nu);
}

/// d/dx of drift_unit: -3x^2 + 2x + nu.
inline double drift_unit_derivative(double x, const UnitParams& p) {
  return -3.0 * x * x + 2.0 * x + p.nu;
}

/// Unit potential V with V' = -drift_unit.
inline double potential(double x, const UnitParams& p) {
  return x * x * x * x / 4.0 - x * x * x / 3.0 + p.nu * (x - x * x / 2.0);
}

enum class CouplingKind { diffusive, gaussian_pulse };

/// Pairwise coupling law h(x_target, x_source).
///
/// diffusive:      h = x_source - x_target
/// gaussian_pulse: h = H(x_source) = exp(-((x_source-x_c)/sigma)^2) / (sigma sqrt(pi)),
///                 independent of the target state. H integrates to 1.
struct CouplingSpec {
  CouplingKind kind;
  double x_c;
  double sigma;

  static CouplingSpec diffusive() {
    return CouplingSpec{CouplingKind::diffusive, 0.0, 0.0};
  }

  static CouplingSpec gaussian_pulse(double x_c, double sigma) {
    if (!(sigma > 0.0))
      throw std::invalid_argument("CouplingSpec: sigma must be > 0, got " +
                                  std::to_string(sigma));
    return CouplingSpec{CouplingKind::gaussian_pulse, x_c, sigma};
  }

  /// Maximum of the pulse response, attained at x_source = x_c.
  double pulse_peak() const {
    return 1.0 / (sigma * std::sqrt(M_PI));
  }

  double response(double x_source, double x_target) const {
    if (kind == CouplingKind::diffusive) return x_source - x_target;
    const double u = (x_source - x_c) / sigma;
    return std::exp(-u * u) / (sigma * std::sqrt(M_PI));
  }

  /// Partial derivative of the response w.r.t. the source state.
  double response_dsource(double x_source) const {
    if (kind == CouplingKind::diffusive) return 1.0;
    const double u = (x_source - x_c) / sigma;
    return std::exp(-u * u) / (sigma * std::sqrt(M_PI)) * (-2.0 * u / sigma);
  }

  /// Partial derivative of the response w.r.t. the target state.
  double response_dtarget() const {
    return kind == CouplingKind::diffusive ? -1.0 : 0.0;
  }
};

/// Directed network of identical bistable units.
///
/// in_neighbors[i] lists the nodes whose state drives node i; beta scales all
/// coupling terms. Indices are 0-based.
struct NetworkSpec {
  int n_units;
  std::vector<std::vector<int>> in_neighbors;
  double beta;
  UnitParams unit;
  CouplingSpec coupling;

  NetworkSpec(int n, std::vector<std::vector<int>> nbrs, double beta_,
              UnitParams unit_, CouplingSpec coupling_)
      : n_units(n),
        in_neighbors(std::move(nbrs)),
        beta(beta_),
        unit(unit_),
        coupling(coupling_) {
    if (n_units < 1)
      throw std::invalid_argument("NetworkSpec: need at least one unit");
    if (static_cast<int>(in_neighbors.size()) != n_units)
      throw std::invalid_argument(
          "NetworkSpec: in_neighbors size does not match n_units");
    if (!(beta >= 0.0))
      throw std::invalid_argument("NetworkSpec: beta must be >= 0, got " +
                                  std::to_string(beta_));
    for (int i = 0; i < n_units; ++i) {
      for (int j : in_neighbors[i]) {
        if (j < 0 || j >= n_units)
          throw std::invalid_argument("NetworkSpec: neighbor index " +
                                      std::to_string(j) + " of node " +
                                      std::to_string(i) + " out of range");
        if (j == i)
          throw std::invalid_argument("NetworkSpec: self-loop at node " +
                                      std::to_string(i));
      }
    }
  }

  NetworkSpec with_beta(double b) const {
    return NetworkSpec(n_units, in_neighbors, b, unit, coupling);
  }
};

/// Full deterministic drift, component i: f(x_i) + beta * sum_{j in N_i} h(x_i, x_j).
inline void network_drift(const StateVec& s, const NetworkSpec& net,
                          StateVec& out) {
  const int n = net.n_units;
  out.resize(n);
  const bool coupled = net.beta != 0.0;  // skip response() in the hot path
  for (int i = 0; i < n; ++i) {
    double d = drift_unit(s[i], net.unit);
    if (coupled)
      for (int j : net.in_neighbors[i])
        d += net.beta * net.coupling.response(s[j], s[i]);
    out[i] = d;
  }
}

inline StateVec network_drift(const StateVec& s, const NetworkSpec& net) {
  StateVec out;
  network_drift(s, net, out);
  return out;
}

enum class TopologyKind { two_node_bidirectional, chain_unidirectional };

/// In-neighbor lists for the standard topologies.
///
/// two_node_bidirectional: each node drives the other (n must be 2).
/// chain_unidirectional:   node i is driven by node i+1; the last node is
///                         autonomous and forcing propagates down the chain.
inline std::vector<std::vector<int>> standard_topology(TopologyKind kind,
                                                       int n) {
  switch (kind) {
    case TopologyKind::two_node_bidirectional:
      if (n != 2)
        throw std::invalid_argument(
            "standard_topology: two_node_bidirectional requires n = 2");
      return {{1}, {0}};
    case TopologyKind::chain_unidirectional: {
      if (n < 2)
        throw std::invalid_argument(
            "standard_topology: chain_unidirectional requires n >= 2");
      std::vector<std::vector<int>> nbrs(n);
      for (int i = 0; i + 1 < n; ++i) nbrs[i] = {i + 1};
      return nbrs;
    }
  }
  throw std::invalid_argument("standard_topology: unknown kind");
}

}  // namespace escapenet
