#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "phi4rg/flow.hpp"

using namespace phi4rg;

namespace {
FlowTables tables_m2(double m2, int J) {
  SliceSchedule sc;
  return make_flow_tables(sc, m2, J);
}
}  // namespace

TEST_CASE("scale cutoff marks the mass scale", "[flow]") {
  SliceSchedule sc;
  int j = scale_cutoff(sc, 1e-8);
  CHECK(sc.t(j) * 1e-8 >= 60.0);
  CHECK(sc.t(j - 1) * 1e-8 < 60.0);
  CHECK(scale_overflow_cap(sc) > 1000);
}

TEST_CASE("constant-coefficient quadratic map reference", "[flow]") {
  // With b_j frozen at beta/(n+8) the g-step is g' = g - beta g^2; values
  // after 10/100/1000 steps from g = 0.1, beta = 0.04 were computed at 60
  // digits (tests/oracles/gen_constants.py).
  FlowTables tab;
  tab.sched = SliceSchedule{};
  tab.m2 = 0.0;
  int n = 1;
  double beta = 0.04 / (n + 8.0);
  tab.b.assign(1000, beta);
  tab.c.assign(1000, 0.0);
  FlowSeries s = run_series(n, 0.1, tab);
  CHECK_THAT(s.g[10], Catch::Matchers::WithinRel(0.09613925885021780528, 1e-14));
  CHECK_THAT(s.g[100], Catch::Matchers::WithinRel(0.07135965574702619176, 1e-13));
  CHECK_THAT(s.g[1000], Catch::Matchers::WithinRel(0.01997423591052545575, 1e-12));
}

TEST_CASE("coupling flow identities", "[flow]") {
  // 1/g_J = 1/g_0 + (n+8) sum b_j g_j / g_{j+1} and
  // 1/P_J = 1 + (n+2) sum b_j g_j / P_{j+1}, both exact.
  FlowTables tab = tables_m2(0.01, 30);
  for (int n : {1, 2, 4}) {
    FlowSeries s = run_series(n, 0.1, tab);
    double sum_g = 0.0, sum_P = 0.0;
    for (int j = 0; j < tab.J(); ++j) {
      sum_g += tab.b[j] * s.g[j] / s.g[j + 1];
      sum_P += tab.b[j] * s.g[j] / s.P[j + 1];
    }
    CHECK_THAT(1.0 / s.g.back(), Catch::Matchers::WithinRel(1.0 / 0.1 + (n + 8.0) * sum_g, 1e-13));
    CHECK_THAT(1.0 / s.P.back(), Catch::Matchers::WithinRel(1.0 + (n + 2.0) * sum_P, 1e-13));
  }
}

TEST_CASE("coupling decreases and stays positive", "[flow]") {
  FlowTables tab = tables_m2(0.0, 60);
  FlowSeries s = run_series(2, 0.1, tab);
  for (std::size_t j = 1; j < s.g.size(); ++j) {
    CHECK(s.g[j] > 0.0);
    CHECK(s.g[j] < s.g[j - 1]);
    CHECK(s.P[j] > 0.0);
    CHECK(s.P[j] < s.P[j - 1] + 1e-18);
  }
  // 1/g_60 = 1/g_0 + (n+8) sum b_j ~ 10 + 10 * 0.27.
  CHECK(s.g.back() > 0.07);
  CHECK(s.g.back() < 0.08);
}

TEST_CASE("mu iteration matches the closed form", "[flow]") {
  // mu_J = L^{2J} P_J (nu_0 - nu_0^c(J)) while no escape has happened.
  FlowTables tab = tables_m2(0.01, 40);
  FlowParams p;
  p.n = 2;
  p.g0 = 0.05;
  p.nu0 = -0.011;
  p.mu_escape = 1e280;  // disable escape for the identity check
  FlowResult r = run_flow(p, tab);
  REQUIRE(r.status == FlowStatus::Completed);
  FlowSeries s = run_series(p.n, p.g0, tab);
  double L2J = 1.0;
  double partial = 0.0;
  for (int j = 0; j <= tab.J(); ++j) {
    double closed = L2J * s.P[j] * (p.nu0 + partial);
    // partial = -nu_0^c(j) accumulated below.
    CHECK_THAT(r.mu[j], Catch::Matchers::WithinAbs(closed, 1e-12 * std::abs(closed) + 1e-280 * L2J));
    if (j < tab.J()) {
      partial += (p.n + 2.0) * tab.c[j] * s.g[j] / s.P[j + 1];
      L2J *= tab.sched.L * tab.sched.L;
    }
  }
}

TEST_CASE("flow escapes on both sides of the separatrix", "[flow]") {
  FlowTables tab = tables_m2(0.01, 40);
  FlowParams p;
  p.n = 1;
  p.g0 = 0.1;
  double nu_c = critical_nu0_bisect(p, tab);
  p.nu0 = nu_c + 1e-6;
  CHECK(run_flow(p, tab).status == FlowStatus::EscapedPositive);
  p.nu0 = nu_c - 1e-6;
  CHECK(run_flow(p, tab).status == FlowStatus::EscapedNegative);
  // Far off criticality the escape is immediate.
  p.nu0 = 2.0;
  FlowResult far = run_flow(p, tab);
  CHECK(far.status == FlowStatus::EscapedPositive);
  CHECK(far.j_stop == 0);
}

TEST_CASE("bisection reproduces the series separatrix", "[flow]") {
  // With the escape window opened wide the iteration runs all scales and
  // classifies by the terminal sign, whose flip sits at the series value
  // exactly.  At the default threshold the driving received after the
  // would-be escape scale shifts the bisection point by a few percent of
  // nu_0^c; that finite-scale definition must still land close.
  FlowTables tab = tables_m2(0.0, 60);
  for (int n : {1, 3}) {
    FlowParams p;
    p.n = n;
    p.g0 = 0.1;
    FlowSeries s = run_series(n, p.g0, tab);
    p.mu_escape = 1e280;
    double exact = critical_nu0_bisect(p, tab);
    CHECK_THAT(exact, Catch::Matchers::WithinAbs(s.nu0_critical, 2e-13));
    p.mu_escape = 1.0;
    double finite = critical_nu0_bisect(p, tab);
    CHECK(finite < 0.0);
    CHECK_THAT(finite, Catch::Matchers::WithinRel(s.nu0_critical, 0.10));
  }
}

TEST_CASE("bisection approaches the series value as the window opens", "[flow]") {
  // Once the window clears the whole excursion of the critical trajectory
  // (the driving is mass-suppressed, so the excursion is bounded) the
  // bisection point collapses onto the series value.
  FlowTables tab = tables_m2(0.01, 40);
  FlowParams p;
  p.n = 2;
  p.g0 = 0.08;
  FlowSeries s = run_series(p.n, p.g0, tab);
  std::vector<double> dev;
  for (double esc : {0.5, 2.0, 1e2}) {
    p.mu_escape = esc;
    dev.push_back(std::abs(critical_nu0_bisect(p, tab) - s.nu0_critical));
  }
  CHECK(dev[1] <= dev[0]);
  CHECK(dev[2] <= dev[1]);
  CHECK(dev[0] > 1e-4);  // the narrow window really is a different definition
  CHECK(dev[2] < 1e-10);
}

TEST_CASE("driving toggle moves the separatrix to zero", "[flow]") {
  FlowTables tab = tables_m2(0.0, 60);
  FlowParams p;
  p.n = 1;
  p.g0 = 0.1;
  p.driving = false;
  double nu_c = critical_nu0_bisect(p, tab);
  CHECK_THAT(nu_c, Catch::Matchers::WithinAbs(0.0, 1e-12));
}

TEST_CASE("separatrix scales with the tadpole strength", "[flow]") {
  // nu_0^c = -(n+2) sum c_j g_j / P_{j+1}: to leading order in g0 it is
  // -(n+2) g0 sum_j c_j, within ~(n+8) sum b g corrections.
  FlowTables tab = tables_m2(0.01, 40);
  int n = 1;
  double g0 = 0.02;
  FlowSeries s = run_series(n, g0, tab);
  double csum = 0.0;
  for (int j = 0; j < tab.J(); ++j) csum += tab.c[j];
  double leading = -(n + 2.0) * g0 * csum;
  CHECK_THAT(s.nu0_critical, Catch::Matchers::WithinRel(leading, 0.05));
  CHECK(std::abs(s.nu0_critical) < std::abs(leading));
}

TEST_CASE("pathological coupling terminates cleanly", "[flow]") {
  FlowTables tab = tables_m2(1.0, 10);
  FlowParams p;
  p.n = 40;
  p.g0 = 40.0;
  p.g_ceiling = 100.0;
  p.nu0 = 0.0;
  p.driving = false;  // keep mu = 0 so the coupling collapse is what stops us
  FlowResult r = run_flow(p, tab);
  CHECK(r.status == FlowStatus::CouplingNonPositive);
}

TEST_CASE("parameter validation", "[flow]") {
  FlowTables tab = tables_m2(1.0, 5);
  FlowParams p;
  p.g0 = 0.2;  // above default ceiling
  CHECK_THROWS(run_flow(p, tab));
  p.g0 = -1.0;
  CHECK_THROWS(run_flow(p, tab));
  p = FlowParams{};
  p.n = -1;
  CHECK_THROWS(run_flow(p, tab));
  // n = 0 is the self-avoiding-walk member of the family and is admitted.
  p = FlowParams{};
  p.n = 0;
  p.nu0 = 2.0;
  CHECK(run_flow(p, tab).status == FlowStatus::EscapedPositive);
}

TEST_CASE("difference flow matches direct subtraction where that works", "[flow]") {
  SliceSchedule sc;
  double m2 = 1e-4;
  int n = 2;
  double g0 = 0.05;
  DeltaSeries d = run_delta_series(n, g0, sc, m2);
  // Direct massive run over the same number of scales.
  FlowTables t0 = make_flow_tables(sc, 0.0, d.J);
  FlowTables tm = make_flow_tables(sc, m2, d.J);
  FlowSeries s0 = run_series(n, g0, t0);
  FlowSeries sm = run_series(n, g0, tm);
  CHECK_THAT(d.nu0c_gap, Catch::Matchers::WithinRel(sm.nu0_critical - s0.nu0_critical, 1e-8));
  CHECK(d.nu0c_gap > 0.0);
  CHECK_THAT(d.g_massive, Catch::Matchers::WithinRel(sm.g.back(), 1e-12));
  CHECK_THAT(d.P_massive, Catch::Matchers::WithinRel(sm.P.back(), 1e-12));
  CHECK_THAT(d.dg.back(), Catch::Matchers::WithinRel(s0.g.back() - sm.g.back(), 1e-6));
  CHECK_THAT(d.dP.back(), Catch::Matchers::WithinRel(s0.P.back() - sm.P.back(), 1e-6));
}

TEST_CASE("difference flow is linear in m2 at depth", "[flow]") {
  // All leading differences scale linearly in m2 once t_J m2 stays tiny
  // through the observable scales; halving m2 must halve the gap to high
  // relative accuracy, far beyond what subtraction could resolve.
  SliceSchedule sc;
  int n = 1;
  double g0 = 0.05;
  DeltaSeries a = run_delta_series(n, g0, sc, 2e-14);
  DeltaSeries b = run_delta_series(n, g0, sc, 1e-14);
  CHECK(a.nu0c_gap > 0.0);
  CHECK(b.nu0c_gap > 0.0);
  double ratio = a.nu0c_gap / b.nu0c_gap;
  // Not exactly 2: the gap carries a log(1/m2) factor; bound the window.
  CHECK(ratio > 1.8);
  CHECK(ratio < 2.1);
}

TEST_CASE("log-corrected asymptotics of the massless coupling", "[flow]") {
  // 1/g_J - 1/g_0 = (n+8) sum b_j (1 + O(g)): with b_j -> log L / (16 pi^2)
  // the inverse coupling grows linearly in the scale.  Differencing two deep
  // scales removes the 1/g_0 offset and the early transient.
  FlowTables tab = tables_m2(0.0, 400);
  int n = 1;
  FlowSeries s = run_series(n, 0.1, tab);
  double slope = 1.0 / s.g[400] - 1.0 / s.g[200];
  double predicted = (n + 8.0) * 200.0 * std::log(2.0) / k16Pi2;
  CHECK_THAT(slope, Catch::Matchers::WithinRel(predicted, 3e-3));
}
TEST_CASE("tangent flow tracks the contraction product", "[flow]") {
  FlowTables tab = tables_m2(1e-8, scale_cutoff(SliceSchedule{}, 1e-8) + 8);
  FlowParams p;
  p.n = 1;
  p.g0 = 0.05;
  p.mu_escape = 1e280;  // run every scale
  p.nu0 = 0.0;
  FlowResult r = run_flow(p, tab);
  REQUIRE(r.status == FlowStatus::Completed);

  SECTION("recomputation matches the propagated values exactly") {
    std::vector<double> nup = tangent_flow(r, tab, p.n);
    REQUIRE(nup.size() == r.nuprime.size());
    for (std::size_t j = 0; j < nup.size(); ++j) CHECK(nup[j] == r.nuprime[j]);
  }

  SECTION("values stay in (0, 1] and decrease until the mass scale freezes b_j") {
    CHECK(r.nuprime.front() == 1.0);
    for (std::size_t j = 1; j < r.nuprime.size(); ++j) {
      CHECK(r.nuprime[j] > 0.0);
      CHECK(r.nuprime[j] <= r.nuprime[j - 1]);
    }
    CHECK(r.nuprime.back() < 0.99);
  }

  SECTION("mass-scale exponent approaches (n+2)/(n+8)") {
    for (int n : {0, 1, 2, 4, 8}) {
      FlowSeries s = run_series(n, 0.05, tab);
      int jm = scale_cutoff(tab.sched, 1e-8);
      double est = std::log(s.P[static_cast<std::size_t>(jm)]) /
                   std::log(s.g[static_cast<std::size_t>(jm)] / s.g[0]);
      CHECK_THAT(est, Catch::Matchers::WithinRel((n + 2.0) / (n + 8.0), 0.02));
    }
  }

  SECTION("toggle flip leaves the tangent sequence unchanged") {
    p.driving = true;
    std::vector<double> on = run_flow(p, tab).nuprime;
    p.driving = false;
    std::vector<double> off = run_flow(p, tab).nuprime;
    REQUIRE(on.size() == off.size());
    for (std::size_t j = 0; j < on.size(); ++j) CHECK(on[j] == off[j]);
  }
}

TEST_CASE("automatic bracketing finds the critical point", "[flow]") {
  FlowTables tab = tables_m2(1e-4, 60);
  FlowParams p;
  p.n = 1;
  p.g0 = 0.05;

  SECTION("record satisfies its contracts") {
    CriticalPoint cp = find_critical_nu0(p, tab, 1e-14);
    CHECK(cp.m2 == 1e-4);
    CHECK(cp.g0 == 0.05);
    CHECK(cp.bracket <= 1e-14);
    CHECK(cp.iterations > 30);
    CHECK(cp.nu0c < 0.0);
    CHECK(cp.escape_scale_monotone);
    CHECK(cp.escape_scale.back() >= cp.escape_scale.front());
    // The endpoints of the final bracket classify to opposite sides.
    p.nu0 = cp.nu0c + 2e-14;
    CHECK(run_flow(p, tab).upper_side());
    p.nu0 = cp.nu0c - 2e-14;
    CHECK_FALSE(run_flow(p, tab).upper_side());
  }

  SECTION("agrees with the fixed-bracket solver") {
    CriticalPoint cp = find_critical_nu0(p, tab, 1e-13);
    double fixed = critical_nu0_bisect(p, tab, -1.0, 1.0, 1e-13);
    CHECK_THAT(cp.nu0c, Catch::Matchers::WithinAbs(fixed, 5e-13));
  }

  SECTION("toggle off pins the critical point at zero") {
    p.driving = false;
    CriticalPoint cp = find_critical_nu0(p, tab, 1e-14);
    CHECK_THAT(cp.nu0c, Catch::Matchers::WithinAbs(0.0, 1e-12));
  }

  SECTION("wide-window run collapses onto the series value") {
    p.mu_escape = 1e280;
    FlowSeries s = run_series(p.n, p.g0, tab);
    CriticalPoint cp = find_critical_nu0(p, tab, 1e-14);
    CHECK_THAT(cp.nu0c, Catch::Matchers::WithinAbs(s.nu0_critical, 2e-13));
  }

  SECTION("rejects bad tolerance") {
    CHECK_THROWS_AS(find_critical_nu0(p, tab, 0.0), std::invalid_argument);
  }
}

TEST_CASE("single absorption step", "[flow]") {
  FlowParams p;
  p.n = 0;

  SECTION("free step rescales mu and leaves g alone") {
    Couplings s{0.02, 1e-3, 0.7};
    p.driving = false;
    Couplings out = flow_step(s, 0.0, 0.5, p, 4.0, 16.0);
    CHECK(out.g == 0.02);
    CHECK(out.mu == 4.0 * 1e-3);
    CHECK(out.nuprime == 0.7);
  }

  SECTION("driving feeds mu even from zero") {
    Couplings s{0.02, 0.0, 1.0};
    p.driving = false;
    CHECK(flow_step(s, 0.0, 0.5, p, 4.0, 16.0).mu == 0.0);
    p.driving = true;
    CHECK_THAT(flow_step(s, 0.0, 0.5, p, 4.0, 16.0).mu,
               Catch::Matchers::WithinRel(2.0 * 16.0 * 0.5 * 0.02, 1e-15));
  }

  SECTION("n = 0 contraction multiplier") {
    Couplings s{0.1, 2e-4, 1.0};
    p.driving = false;
    double bj = 0.004;
    Couplings out = flow_step(s, bj, 0.0, p, 4.0, 16.0);
    double pij = 1.0 - 2.0 * bj * 0.1;
    CHECK_THAT(out.mu, Catch::Matchers::WithinRel(4.0 * 2e-4 * pij, 1e-15));
    CHECK_THAT(out.nuprime, Catch::Matchers::WithinRel(pij, 1e-15));
    CHECK_THAT(out.g, Catch::Matchers::WithinRel(0.1 - 8.0 * bj * 0.01, 1e-15));
  }

  SECTION("stepping by hand reproduces the trajectory") {
    FlowTables tab = tables_m2(1e-4, 40);
    FlowParams q;
    q.n = 2;
    q.g0 = 0.04;
    q.nu0 = -1e-3;
    FlowResult r = run_flow(q, tab);
    REQUIRE(r.g.size() >= 2);
    double L2 = tab.sched.L * tab.sched.L;
    double Lp2 = L2;
    Couplings s{q.g0, q.nu0, 1.0};
    for (std::size_t j = 1; j < r.g.size(); ++j) {
      s = flow_step(s, tab.b[j - 1], tab.c[j - 1], q, L2, Lp2);
      Lp2 *= L2;
      CHECK(s.g == r.g[j]);
      CHECK(s.mu == r.mu[j]);
      CHECK(s.nuprime == r.nuprime[j]);
    }
  }
}

TEST_CASE("terminal coupling", "[flow]") {
  SliceSchedule sc;

  SECTION("matches the difference-flow route") {
    FlowTables tab = make_flow_tables(sc, 1e-6, scale_cutoff(sc, 1e-6) + 32);
    double gi = g_infinity(1, 0.05, tab);
    DeltaSeries ds = run_delta_series(1, 0.05, sc, 1e-6, 32);
    CHECK_THAT(gi, Catch::Matchers::WithinRel(ds.g_massive, 1e-12));
  }

  SECTION("inverse-coupling sum rule") {
    FlowTables tab = make_flow_tables(sc, 1e-4, scale_cutoff(sc, 1e-4) + 32);
    double sum_b = 0.0;
    for (double b : tab.b) sum_b += b;
    for (double g0 : {0.01, 0.03, 0.05}) {
      double gi = g_infinity(1, g0, tab);
      double lhs = 1.0 / gi - 1.0 / g0;
      CHECK(std::fabs(lhs - 9.0 * sum_b) / (9.0 * sum_b) <= 3.0 * g0);
    }
    // First-order regime: the shift off g0 is the second-order sum itself.
    double g0 = 1e-9;
    double gi = g_infinity(1, g0, tab);
    CHECK(std::fabs(gi - g0) <= 2.0 * 9.0 * sum_b * g0 * g0);
    CHECK(gi < g0);
  }

  SECTION("bubble law in the subtracted form") {
    // 1/g_inf - 1/g0 tracks (n+8) B(m2) up to the first-window deficit
    // ||w_1||^2/B and an O(g0) remainder; the raw product g_inf (n+8) B
    // climbs toward 1 only like 1/log m^-2, so it is checked as a monotone
    // trend rather than against a fixed tolerance.
    double prev_gap = 2.0;
    for (double m2 : {1e-4, 1e-6, 1e-8}) {
      FlowTables tab = make_flow_tables(sc, m2, scale_cutoff(sc, m2) + 32);
      double gi = g_infinity(1, 0.03, tab);
      double nB = 9.0 * bubble(m2);
      if (m2 == 1e-6)
        CHECK_THAT((1.0 / gi - 1.0 / 0.03) / nB, Catch::Matchers::WithinAbs(1.0, 0.25));
      double gap = std::fabs(gi * nB - 1.0);
      CHECK(gap < prev_gap);
      prev_gap = gap;
    }
  }

  SECTION("rejects bad input and non-convergence") {
    FlowTables massless = tables_m2(0.0, 20);
    CHECK_THROWS_AS(g_infinity(1, 0.05, massless), std::invalid_argument);
    FlowTables tab = tables_m2(1e-4, 30);
    CHECK_THROWS_AS(g_infinity(-1, 0.05, tab), std::invalid_argument);
    CHECK_THROWS_AS(g_infinity(1, 0.0, tab), std::invalid_argument);
    FlowTables shallow = tables_m2(1e-4, 5);
    CHECK_THROWS_AS(g_infinity(1, 0.03, shallow), std::runtime_error);
    // A huge coupling overshoots through zero on the first step.
    FlowTables one;
    one.sched = sc;
    one.m2 = 1e-4;
    one.b = {0.1};
    one.c = {0.0};
    CHECK_THROWS_AS(g_infinity(1, 5.0, one), std::runtime_error);
  }
}
