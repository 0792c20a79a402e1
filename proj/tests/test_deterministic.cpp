#include "escapenet/deterministic.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <string>

using namespace escapenet;

namespace {

const UnitParams kUnit{0.01};
const CouplingSpec kPulse = CouplingSpec::gaussian_pulse(0.5, 0.1);

NetworkSpec two_node(double beta, CouplingSpec coupling = kPulse) {
  return NetworkSpec(2, standard_topology(TopologyKind::two_node_bidirectional, 2),
                     beta, kUnit, coupling);
}

NetworkSpec single_node(double beta = 0.0) {
  return NetworkSpec(1, {{}}, beta, kUnit, kPulse);
}

double max_norm_dist(const StateVec& a, const StateVec& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

const EquilibriumInfo& by_label(const std::vector<EquilibriumInfo>& eqs,
                                const std::string& label) {
  for (const auto& e : eqs)
    if (e.label == label) return e;
  throw std::runtime_error("no equilibrium labeled " + label);
}

}  // namespace

TEST_CASE("rest states are invariant under integration") {
  const StateVec qq{kUnit.x_quiescent(), kUnit.x_quiescent()};
  for (double beta : {0.0, 0.03}) {
    const Trajectory tr =
        integrate_ode(qq, two_node(beta), {1e-3, 100.0, 100});
    CHECK(tr.reason == StopReason::horizon);
    for (const auto& s : tr.states) CHECK(max_norm_dist(s, qq) < 1e-9);
  }
}

TEST_CASE("a node released past the barrier rolls to the active state") {
  CHECK(basin_of({0.5, kUnit.x_quiescent()}, two_node(0.0)) == "AQ");
}

TEST_CASE("integrator is fourth order by self-convergence") {
  const NetworkSpec net = two_node(0.02);
  const StateVec s0{0.3, 0.15};
  const auto endpoint = [&](double dt) {
    return integrate_ode(s0, net, {dt, 1.0, 1 << 20}).final_state();
  };
  // Coarse steps keep the truncation error well above the rounding floor
  // (at dt = 4e-3 the endpoint error is already down at 1e-14).
  const StateVec ref = endpoint(7.8125e-4);
  const double err_coarse = max_norm_dist(endpoint(5e-2), ref);
  const double err_fine = max_norm_dist(endpoint(2.5e-2), ref);
  REQUIRE(err_fine > 0.0);
  const double ratio = err_coarse / err_fine;
  CHECK(ratio > 11.0);
  CHECK(ratio < 23.0);
}

TEST_CASE("integration rejects bad arguments and diverging states") {
  const NetworkSpec net = two_node(0.0);
  CHECK_THROWS_AS(integrate_ode({0.1, 0.1}, net, {-1e-3, 1.0, 1}),
                  std::invalid_argument);
  CHECK_THROWS_AS(integrate_ode({0.1, 0.1}, net, {1e-3, 1.0, 0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(integrate_ode({0.1, 0.1, 0.1}, net, {}),
                  std::invalid_argument);
  // The cubic drift blows up in finite time from far outside the wells.
  CHECK_THROWS_AS(integrate_ode({50.0, 50.0}, net, {1e-3, 10.0, 1000}),
                  std::runtime_error);
}

TEST_CASE("uncoupled two-node census: nine product equilibria") {
  const auto eqs = find_equilibria(two_node(0.0));
  REQUIRE(eqs.size() == 9);

  std::map<StabilityClass, std::set<std::string>> census;
  for (const auto& e : eqs) {
    census[e.stability].insert(e.label);
    CHECK(e.residual < 1e-10);
  }
  CHECK(census[StabilityClass::stable] ==
        std::set<std::string>{"QQ", "QA", "AQ", "AA"});
  CHECK(census[StabilityClass::saddle] ==
        std::set<std::string>{"SQ", "QS", "SA", "AS"});
  CHECK(census[StabilityClass::source] == std::set<std::string>{"SS"});

  // With beta = 0 the roots are exactly the product states.
  const std::map<char, double> coord{{'Q', kUnit.x_quiescent()},
                                     {'S', kUnit.x_saddle()},
                                     {'A', kUnit.x_active()}};
  for (const auto& e : eqs) {
    for (int i = 0; i < 2; ++i)
      CHECK(std::abs(e.location[i] - coord.at(e.label[i])) < 1e-12);
    CHECK(e.unstable_dim ==
          static_cast<int>(std::count(e.label.begin(), e.label.end(), 'S')));
  }
}

TEST_CASE("coupled census keeps the same labels with tiny shifts") {
  const std::map<char, double> coord{{'Q', kUnit.x_quiescent()},
                                     {'S', kUnit.x_saddle()},
                                     {'A', kUnit.x_active()}};
  for (double beta : {0.02, 0.03}) {
    const auto eqs = find_equilibria(two_node(beta));
    REQUIRE(eqs.size() == 9);
    int stable = 0, saddle = 0, source = 0;
    for (const auto& e : eqs) {
      CHECK(e.residual < 1e-10);
      stable += e.stability == StabilityClass::stable;
      saddle += e.stability == StabilityClass::saddle;
      source += e.stability == StabilityClass::source;
      for (int i = 0; i < 2; ++i)
        CHECK(std::abs(e.location[i] - coord.at(e.label[i])) < 1e-4);
    }
    CHECK(stable == 4);
    CHECK(saddle == 4);
    CHECK(source == 1);
  }
}

TEST_CASE("single-node census recovers the three rest states") {
  const auto eqs = find_equilibria(single_node());
  REQUIRE(eqs.size() == 3);
  CHECK(std::abs(eqs[0].location[0] - kUnit.x_quiescent()) < 1e-12);
  CHECK(std::abs(eqs[1].location[0] - kUnit.x_saddle()) < 1e-12);
  CHECK(std::abs(eqs[2].location[0] - kUnit.x_active()) < 1e-12);
  CHECK(eqs[0].stability == StabilityClass::stable);
  // In one dimension the barrier state is fully unstable.
  CHECK(eqs[1].stability == StabilityClass::source);
  CHECK(eqs[2].stability == StabilityClass::stable);
}

TEST_CASE("census is swap-symmetric for the two-node network") {
  const auto eqs = find_equilibria(two_node(0.025));
  REQUIRE(eqs.size() == 9);
  std::map<std::string, StabilityClass> table;
  for (const auto& e : eqs) table[e.label] = e.stability;
  for (const auto& [label, cls] : table) {
    std::string mirrored(label.rbegin(), label.rend());
    REQUIRE(table.count(mirrored) == 1);
    CHECK(table.at(mirrored) == cls);
  }
}

TEST_CASE("analytic jacobian matches values and finite differences") {
  CHECK(jacobian({kUnit.x_quiescent()}, single_node())(0, 0) ==
        Catch::Approx(-0.22).margin(1e-12));

  // beta = 0 leaves no cross terms at all.
  const Eigen::MatrixXd diag = jacobian({0.3, -0.4}, two_node(0.0));
  CHECK(diag(0, 1) == 0.0);
  CHECK(diag(1, 0) == 0.0);

  std::mt19937_64 gen(21);
  std::uniform_real_distribution<double> pick(-0.5, 1.2);
  const NetworkSpec nets[] = {two_node(0.025),
                              two_node(0.1, CouplingSpec::diffusive())};
  for (const auto& net : nets) {
    for (int r = 0; r < 20; ++r) {
      const StateVec s{pick(gen), pick(gen)};
      const Eigen::MatrixXd j = jacobian(s, net);
      const double h = 1e-6;
      for (int col = 0; col < 2; ++col) {
        StateVec up = s, dn = s;
        up[col] += h;
        dn[col] -= h;
        const StateVec fu = network_drift(up, net);
        const StateVec fd = network_drift(dn, net);
        for (int row = 0; row < 2; ++row)
          CHECK((fu[row] - fd[row]) / (2.0 * h) ==
                Catch::Approx(j(row, col)).margin(1e-6));
      }
    }
  }

  // Diffusive coupling contributes -beta * degree on the diagonal and
  // +beta on the cross terms.
  const Eigen::MatrixXd jd = jacobian({0.2, 0.6}, two_node(0.1, CouplingSpec::diffusive()));
  CHECK(jd(0, 1) == Catch::Approx(0.1).margin(1e-15));
  CHECK(jd(1, 0) == Catch::Approx(0.1).margin(1e-15));
  CHECK(jd(0, 0) == Catch::Approx(drift_unit_derivative(0.2, kUnit) - 0.1).margin(1e-15));
}

TEST_CASE("one-dimensional barrier state shoots to either well") {
  const auto eqs = find_equilibria(single_node());
  const auto& barrier = eqs[1];
  REQUIRE(barrier.unstable_dim == 1);
  CHECK(shoot_unstable_manifold(barrier, +1, single_node()).landing == "A");
  CHECK(shoot_unstable_manifold(barrier, -1, single_node()).landing == "Q");
}

TEST_CASE("manifold branch of QS switches landing across the threshold") {
  for (const auto& [beta, expected] :
       std::vector<std::pair<double, std::string>>{{0.02, "QA"}, {0.03, "AA"}}) {
    const NetworkSpec net = two_node(beta);
    const auto eqs = find_equilibria(net);
    const auto& saddle = by_label(eqs, "QS");
    REQUIRE(saddle.unstable_dim == 1);
    const ManifoldBranch branch = shoot_unstable_manifold(saddle, +1, net);
    CHECK(branch.landing == expected);
    // The polyline starts within delta of the saddle.
    REQUIRE(!branch.trajectory.states.empty());
    CHECK(max_norm_dist(branch.trajectory.states.front(), saddle.location) <=
          1e-6 + 1e-15);
  }
}

TEST_CASE("landing labels are robust to the shooting offset") {
  for (double beta : {0.02, 0.03}) {
    const NetworkSpec net = two_node(beta);
    const auto eqs = find_equilibria(net);
    const auto& saddle = by_label(eqs, "QS");
    std::set<std::string> landings;
    for (double delta : {1e-7, 1e-6, 1e-5}) {
      ShootOptions opts;
      opts.delta = delta;
      landings.insert(shoot_unstable_manifold(saddle, +1, net, opts).landing);
    }
    CHECK(landings.size() == 1);
  }
}

TEST_CASE("shooting requires a one-dimensional unstable manifold") {
  const NetworkSpec net = two_node(0.02);
  const auto eqs = find_equilibria(net);
  const auto& sink = by_label(eqs, "QQ");
  CHECK_THROWS_AS(shoot_unstable_manifold(sink, +1, net), std::invalid_argument);
  const auto& saddle = by_label(eqs, "QS");
  CHECK_THROWS_AS(shoot_unstable_manifold(saddle, 0, net), std::invalid_argument);
}

TEST_CASE("falling branch of QS returns to the all-quiescent state") {
  const NetworkSpec net = two_node(0.02);
  const auto eqs = find_equilibria(net);
  CHECK(shoot_unstable_manifold(by_label(eqs, "QS"), -1, net).landing == "QQ");
}

TEST_CASE("landing-switch bisection brackets the connection") {
  const SaddleConnectionResult r =
      find_saddle_connection(two_node(0.0), "QS", +1, 0.02, 0.03, 1e-4);
  CHECK(r.landing_lo == "QA");
  CHECK(r.landing_hi == "AA");
  CHECK(r.bracket_hi - r.bracket_lo < 1e-4);
  CHECK(r.beta > 0.024);
  CHECK(r.beta < 0.025);
  CHECK(std::abs(r.beta - 0.024) / 0.024 <= 0.10);
}

TEST_CASE("bisection is swap-symmetric and step-size-insensitive") {
  const double from_qs =
      find_saddle_connection(two_node(0.0), "QS", +1, 0.02, 0.03, 1e-4).beta;
  const double from_sq =
      find_saddle_connection(two_node(0.0), "SQ", +1, 0.02, 0.03, 1e-4).beta;
  CHECK(std::abs(from_qs - from_sq) < 1e-6);

  ShootOptions fine;
  fine.dt = 5e-4;
  const double halved_dt =
      find_saddle_connection(two_node(0.0), "QS", +1, 0.02, 0.03, 1e-4, fine)
          .beta;
  CHECK(std::abs(from_qs - halved_dt) < 1e-4);
}

TEST_CASE("narrower pulses move the threshold toward the asymptote") {
  const double asymptote = asymptotic_beta_sc(kUnit, kPulse);
  // The widths 0.1 and 0.05 give thresholds 3e-5 apart, so this comparison
  // needs a bisection finer than the usual 1e-4.
  const auto numeric = [&](double sigma) {
    const NetworkSpec net = two_node(0.0, CouplingSpec::gaussian_pulse(0.5, sigma));
    return find_saddle_connection(net, "QS", +1, 0.02, 0.03, 1e-6).beta;
  };
  const double wide = numeric(0.1);
  const double mid = numeric(0.05);
  const double narrow = numeric(0.02);
  CHECK(std::abs(mid - asymptote) < std::abs(wide - asymptote));
  CHECK(std::abs(wide - asymptote) / asymptote <= 0.10);
  CHECK(std::abs(narrow - asymptote) / asymptote <= 0.03);
}

TEST_CASE("bisection rejects a bracket without a landing switch") {
  CHECK_THROWS_AS(
      find_saddle_connection(two_node(0.0), "QS", +1, 0.001, 0.002, 1e-4),
      std::invalid_argument);
}

TEST_CASE("narrow-pulse threshold formula") {
  CHECK(std::abs(asymptotic_beta_sc(kUnit, kPulse) - 0.024) < 1e-12);
  CHECK(std::abs(asymptotic_beta_sc(UnitParams{0.04}, kPulse) - 0.042) < 1e-12);
  CHECK(asymptotic_beta_sc(UnitParams{1e-10}, kPulse) < 1e-4);
  CHECK_THROWS_AS(asymptotic_beta_sc(kUnit, CouplingSpec::diffusive()),
                  std::invalid_argument);
  // Pulse centered where the unit drift is negative: transit assumption fails.
  CHECK_THROWS_AS(asymptotic_beta_sc(kUnit, CouplingSpec::gaussian_pulse(2.0, 0.1)),
                  std::invalid_argument);
}

TEST_CASE("basin queries by direct integration") {
  CHECK(basin_of({kUnit.x_quiescent() + 1e-3, kUnit.x_quiescent()},
                 two_node(0.02)) == "QQ");
  // A node already past the pulse center delivers no further kick.
  CHECK(basin_of({0.8, kUnit.x_quiescent()}, two_node(0.02)) == "AQ");
  CHECK(basin_of({0.8, kUnit.x_quiescent()}, two_node(0.03)) == "AQ");
}

TEST_CASE("transit kick approaches beta over transit speed") {
  const double mu = drift_unit(0.5, kUnit);
  const double beta = 0.01;
  const double predicted = beta / mu;

  const double measured = kick_size(two_node(beta));
  CHECK(std::abs(measured - predicted) / predicted <= 0.25);

  // The discrepancy shrinks with the pulse width, roughly linearly.
  const auto discrepancy = [&](double sigma) {
    const NetworkSpec net = two_node(beta, CouplingSpec::gaussian_pulse(0.5, sigma));
    return std::abs(kick_size(net) - predicted) / predicted;
  };
  const double d1 = discrepancy(0.1);
  const double d2 = discrepancy(0.05);
  const double d4 = discrepancy(0.025);
  CHECK(d2 < 0.75 * d1);
  CHECK(d2 > 0.10 * d1);
  CHECK(d4 < 0.75 * d2);
  CHECK(d4 > 0.10 * d2);
}

TEST_CASE("kick measurement degenerates and fails loudly as specified") {
  CHECK(kick_size(two_node(0.0)) < 1e-12);

  KickProtocol slow;
  slow.t_max = 1.0;  // transit needs tens of time units
  CHECK_THROWS_AS(kick_size(two_node(0.01), slow), std::runtime_error);

  CHECK_THROWS_AS(kick_size(two_node(0.01, CouplingSpec::diffusive())),
                  std::invalid_argument);
  const NetworkSpec chain(3, standard_topology(TopologyKind::chain_unidirectional, 3),
                          0.01, kUnit, kPulse);
  CHECK_THROWS_AS(kick_size(chain), std::invalid_argument);

  KickProtocol wide;
  wide.exit_sigmas = 6.0;  // exit beyond the active state is unreachable
  CHECK_THROWS_AS(kick_size(two_node(0.01), wide), std::invalid_argument);
}
