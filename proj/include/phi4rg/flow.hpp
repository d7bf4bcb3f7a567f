// Second-order renormalisation-group flow of the quartic coupling and mass
// counterterm over the covariance slices.
//
// One step absorbs slice j+1 (proper-time band (t_j, t_{j+1}]) and maps
//   g_{j+1}  = g_j - (n+8) b_j g_j^2
//   mu_{j+1} = L^2 mu_j (1 - (n+2) b_j g_j) + (n+2) L^{2(j+1)} c_j g_j
// with b_j the window-norm increment and c_j = C_{j+1}(0).  mu_j = L^{2j} nu_j
// is the rescaled mass; the driving term (toggle `driving`) feeds the tadpole
// of the slice into it.  The g-flow never feels mu, so mu is affine in its
// initial value and a unique nu_0 separates trajectories escaping to +inf
// from those escaping to -inf.
//
// In unrescaled variables nu_j = mu_j L^{-2j} the same step reads
// nu_{j+1} = nu_j pi_j + (n+2) c_j g_j with pi_j = 1 - (n+2) b_j g_j, so with
// P_J = prod_{j<J} pi_j,
//   nu_J = P_J (nu_0 - nu_0^c(J)),   nu_0^c(J) = -sum_{j<J} (n+2) c_j g_j / P_{j+1},
// which gives the separatrix in closed form once the g-trajectory is known;
// run_series evaluates it without touching mu, and the bisection on run_flow
// must reproduce it.
#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "covariance.hpp"

namespace phi4rg {

// First scale j whose cut satisfies t_j m2 >= thresh; slice integrals above
// it are exp(-thresh)-suppressed.
inline int scale_cutoff(const SliceSchedule& sc, double m2, double thresh = 60.0) {
  if (!(m2 > 0.0)) throw std::invalid_argument("scale_cutoff: m2 <= 0");
  double j = 1.0 + std::log(thresh / (m2 * sc.t1)) / std::log(sc.L);
  int cand = std::max(1, static_cast<int>(std::ceil(j)));
  while (sc.t(cand) * m2 < thresh) ++cand;
  return cand;
}

// Largest scale whose beta integral stays inside double range: the b_j band
// extends to 2 t_{j+1} = 2 L t_j.
inline int scale_overflow_cap(const SliceSchedule& sc) {
  double hi = std::numeric_limits<double>::max() / (16.0 * sc.L);
  return static_cast<int>(std::floor(std::log(hi / sc.t1) / std::log(sc.L)));
}

struct FlowTables {
  SliceSchedule sched;
  double m2 = 0.0;
  std::vector<double> b;  // b[j], j = 0..J-1
  std::vector<double> c;  // c[j] = C_{j+1}(0)
  int J() const { return static_cast<int>(b.size()); }
};

inline FlowTables make_flow_tables(const SliceSchedule& sc, double m2, int J) {
  if (J < 1) throw std::invalid_argument("make_flow_tables: J < 1");
  J = std::min(J, scale_overflow_cap(sc));
  FlowTables t;
  t.sched = sc;
  t.m2 = m2;
  t.b.resize(static_cast<std::size_t>(J));
  t.c.resize(static_cast<std::size_t>(J));
  for (int j = 0; j < J; ++j) {
    t.b[static_cast<std::size_t>(j)] = beta_coeff(sc, j, m2);
    t.c[static_cast<std::size_t>(j)] = slice_diag(sc, j + 1, m2);
  }
  return t;
}

struct FlowParams {
  int n = 1;              // field components
  double g0 = 0.1;
  double nu0 = 0.0;
  bool driving = true;    // include the tadpole feed into mu
  double mu_escape = 1.0;
  double g_ceiling = 0.1; // largest admissible g0
};

inline void validate(const FlowParams& p) {
  if (p.n < 0) throw std::invalid_argument("flow: n < 0");
  if (!(p.g0 > 0.0)) throw std::invalid_argument("flow: g0 <= 0");
  if (p.g0 > p.g_ceiling) throw std::invalid_argument("flow: g0 above ceiling");
  if (!(p.mu_escape > 0.0)) throw std::invalid_argument("flow: mu_escape <= 0");
}

enum class FlowStatus {
  Completed,            // all J steps taken, |mu| never left the window
  EscapedPositive,
  EscapedNegative,
  CouplingNonPositive,  // g left (0, inf); second-order step overshot
};

// State at one scale.  mu = L^{2j} nu is the rescaled mass; nuprime is the
// tangent d nu_j / d nu_0 propagated alongside.
struct Couplings {
  double g = 0.0;
  double mu = 0.0;
  double nuprime = 1.0;
};

// One absorption step, scale j to j+1.  Lp2 must be L^{2(j+1)} for the scale
// being absorbed; cj is the slice diagonal C_{j+1}(0) feeding the driving
// term when the toggle is on.
inline Couplings flow_step(const Couplings& s, double bj, double cj, const FlowParams& p,
                           double L2, double Lp2) {
  double pij = 1.0 - (p.n + 2.0) * bj * s.g;
  Couplings next;
  next.mu = L2 * s.mu * pij + (p.driving ? (p.n + 2.0) * Lp2 * cj * s.g : 0.0);
  // The g-flow is nu-independent at this order, so the tangent closes on
  // the same contraction factor with the L^2 rescaling divided back out.
  next.nuprime = s.nuprime * pij;
  next.g = s.g - (p.n + 8.0) * bj * s.g * s.g;
  return next;
}

struct FlowResult {
  FlowStatus status = FlowStatus::Completed;
  int j_stop = 0;               // scale at which iteration ended
  std::vector<double> g;        // g_0..g_{j_stop}
  std::vector<double> mu;       // mu_0..mu_{j_stop}
  std::vector<double> nuprime;  // tangent d nu_j / d nu_0, always in (0, 1]
  bool upper_side() const {
    // Bisection classification: escaped up, or ran out of scales with
    // mu >= 0 (the tie mu = 0 counts as up).
    if (status == FlowStatus::EscapedPositive) return true;
    if (status == FlowStatus::EscapedNegative) return false;
    return mu.back() >= 0.0;
  }
};

inline FlowResult run_flow(const FlowParams& p, const FlowTables& tab) {
  validate(p);
  const double L2 = tab.sched.L * tab.sched.L;
  FlowResult r;
  Couplings s{p.g0, p.nu0, 1.0};
  double Lp2 = L2;  // L^{2(j+1)} for the driving term
  r.g.push_back(s.g);
  r.mu.push_back(s.mu);
  r.nuprime.push_back(s.nuprime);
  for (int j = 0;; ++j) {
    if (!std::isfinite(s.mu)) {
      r.status = s.mu > 0 ? FlowStatus::EscapedPositive : FlowStatus::EscapedNegative;
      r.j_stop = j;
      break;
    }
    if (std::abs(s.mu) > p.mu_escape) {
      r.status = s.mu > 0 ? FlowStatus::EscapedPositive : FlowStatus::EscapedNegative;
      r.j_stop = j;
      break;
    }
    if (s.g <= 0.0) {
      r.status = FlowStatus::CouplingNonPositive;
      r.j_stop = j;
      break;
    }
    if (j == tab.J()) {
      r.status = FlowStatus::Completed;
      r.j_stop = j;
      break;
    }
    s = flow_step(s, tab.b[static_cast<std::size_t>(j)], tab.c[static_cast<std::size_t>(j)],
                  p, L2, Lp2);
    Lp2 *= L2;
    r.g.push_back(s.g);
    r.mu.push_back(s.mu);
    r.nuprime.push_back(s.nuprime);
  }
  return r;
}

// Tangent flow recomputed from a trajectory's coupling sequence alone:
// nu'_0 = 1, nu'_{j+1} = nu'_j (1 - (n+2) b_j g_j).
inline std::vector<double> tangent_flow(const FlowResult& r, const FlowTables& tab, int n) {
  if (n < 0) throw std::invalid_argument("tangent_flow: n < 0");
  if (r.g.size() > tab.b.size() + 1) throw std::invalid_argument("tangent_flow: trajectory longer than tables");
  std::vector<double> nup;
  nup.reserve(r.g.size());
  double v = 1.0;
  nup.push_back(v);
  for (std::size_t j = 0; j + 1 < r.g.size(); ++j) {
    v *= 1.0 - (n + 2.0) * tab.b[j] * r.g[j];
    nup.push_back(v);
  }
  return nup;
}

struct FlowSeries {
  std::vector<double> g;  // g_0..g_J
  std::vector<double> P;  // P_0 = 1, ..., P_J
  double nu0_critical = 0.0;
  double sum_bg = 0.0;     // sum_j b_j g_j
  double sum_bg_sq = 0.0;  // sum_j (b_j g_j)^2
};

inline FlowSeries run_series(int n, double g0, const FlowTables& tab) {
  if (n < 0 || !(g0 > 0.0)) throw std::invalid_argument("run_series: bad n or g0");
  FlowSeries s;
  const int J = tab.J();
  s.g.reserve(static_cast<std::size_t>(J) + 1);
  s.P.reserve(static_cast<std::size_t>(J) + 1);
  double g = g0, P = 1.0;
  s.g.push_back(g);
  s.P.push_back(P);
  Neumaier series, bg, bg2;
  for (int j = 0; j < J; ++j) {
    double bj = tab.b[static_cast<std::size_t>(j)];
    double cj = tab.c[static_cast<std::size_t>(j)];
    double pij = 1.0 - (n + 2.0) * bj * g;
    if (!(pij > 0.0)) throw std::runtime_error("run_series: contraction factor left (0, 1]");
    bg.add(bj * g);
    bg2.add(bj * g * bj * g);
    P *= pij;
    series.add((n + 2.0) * cj * g / P);
    g = g - (n + 8.0) * bj * g * g;
    if (g <= 0.0) throw std::runtime_error("run_series: coupling left (0, inf)");
    s.g.push_back(g);
    s.P.push_back(P);
  }
  s.nu0_critical = -series.value();
  s.sum_bg = bg.value();
  s.sum_bg_sq = bg2.value();
  return s;
}

// Separatrix by bisection on the mu-iteration.  Requires the two bracket
// endpoints to classify to opposite sides.
inline double critical_nu0_bisect(FlowParams p, const FlowTables& tab,
                                  double lo = -1.0, double hi = 1.0,
                                  double tol = 1e-14) {
  auto side = [&](double nu0) {
    p.nu0 = nu0;
    FlowResult r = run_flow(p, tab);
    if (r.status == FlowStatus::CouplingNonPositive)
      throw std::runtime_error("critical_nu0_bisect: coupling collapsed");
    return r.upper_side();
  };
  bool slo = side(lo), shi = side(hi);
  if (slo == shi) throw std::invalid_argument("critical_nu0_bisect: bracket does not straddle");
  while (hi - lo > tol) {
    double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (side(mid) == shi)
      hi = mid;
    else
      lo = mid;
  }
  return 0.5 * (lo + hi);
}

struct CriticalPoint {
  double m2 = 0.0;
  double g0 = 0.0;
  double nu0c = 0.0;
  double bracket = 0.0;            // achieved bracket width, <= requested tol
  int iterations = 0;              // bisection steps after bracketing
  std::vector<int> escape_scale;   // min endpoint escape scale per iteration
  bool escape_scale_monotone = true;
};

// Separatrix with automatic bracketing: the bracket starts at [-g0, +g0] and
// doubles until the endpoints classify to opposite sides.  The escape-scale
// history tracks how long the slower endpoint trajectory survives; it is
// non-decreasing as the bracket shrinks onto the critical point.
inline CriticalPoint find_critical_nu0(FlowParams p, const FlowTables& tab,
                                       double tol = 1e-14, int max_doublings = 60) {
  validate(p);
  if (!(tol > 0.0)) throw std::invalid_argument("find_critical_nu0: tol <= 0");

  struct Probe {
    bool upper;
    int escape;
  };
  auto probe = [&](double nu0) {
    p.nu0 = nu0;
    FlowResult r = run_flow(p, tab);
    if (r.status == FlowStatus::CouplingNonPositive)
      throw std::runtime_error("find_critical_nu0: coupling left (0, inf); g0 too large");
    return Probe{r.upper_side(), r.j_stop};
  };

  double lo = -p.g0, hi = p.g0;
  Probe plo = probe(lo), phi = probe(hi);
  int doublings = 0;
  while (plo.upper == phi.upper) {
    if (++doublings > max_doublings)
      throw std::runtime_error("find_critical_nu0: no straddling bracket found");
    lo *= 2.0;
    hi *= 2.0;
    plo = probe(lo);
    phi = probe(hi);
  }

  CriticalPoint cp;
  cp.m2 = tab.m2;
  cp.g0 = p.g0;
  while (hi - lo > tol) {
    double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    Probe pm = probe(mid);
    if (pm.upper == phi.upper) {
      hi = mid;
      phi = pm;
    } else {
      lo = mid;
      plo = pm;
    }
    ++cp.iterations;
    int esc = std::min(plo.escape, phi.escape);
    if (!cp.escape_scale.empty() && esc < cp.escape_scale.back())
      cp.escape_scale_monotone = false;
    cp.escape_scale.push_back(esc);
  }
  cp.nu0c = 0.5 * (lo + hi);
  cp.bracket = hi - lo;
  return cp;
}

// Massless flow together with exact massless-minus-massive differences.
//
// All differences are propagated by their own recurrences built from the
// complement integrals, so every Delta retains full relative precision even
// at m2 = 1e-16 where forming them by subtraction would lose everything.
// Sign conventions: dg = g^0 - g^m <= 0, dP = P^0 - P^m, db, dc >= 0.
struct DeltaSeries {
  std::vector<double> g0;  // massless trajectory
  std::vector<double> P0;
  std::vector<double> dg;
  std::vector<double> dP;
  double nu0c_gap = 0.0;     // nu_0^c(m2) - nu_0^c(0) > 0
  double g_massive = 0.0;    // terminal massive coupling
  double P_massive = 0.0;    // terminal massive contraction product
  int J = 0;
};

inline DeltaSeries run_delta_series(int n, double g0, const SliceSchedule& sc, double m2,
                                    int extra_scales = 64) {
  if (n < 0 || !(g0 > 0.0) || !(m2 > 0.0))
    throw std::invalid_argument("run_delta_series: bad arguments");
  int J = std::min(scale_cutoff(sc, m2) + extra_scales, scale_overflow_cap(sc));
  DeltaSeries s;
  s.J = J;
  s.g0.reserve(static_cast<std::size_t>(J) + 1);
  s.P0.reserve(static_cast<std::size_t>(J) + 1);
  double g = g0, P = 1.0, dg = 0.0, dP = 0.0;
  s.g0.push_back(g);
  s.P0.push_back(P);
  s.dg.push_back(dg);
  s.dP.push_back(dP);
  Neumaier gap;
  for (int j = 0; j < J; ++j) {
    double b0 = beta_coeff(sc, j, 0.0);
    double c0 = slice_diag(sc, j + 1, 0.0);
    double db = beta_coeff_zero_minus(sc, j, m2);
    double dc = slice_diag_zero_minus(sc, j + 1, m2);
    double gm = g - dg;
    double Pnext = P * (1.0 - (n + 2.0) * b0 * g);
    // dP' = dP pi^m + P^0 (pi^0 - pi^m); pi^0 - pi^m = -(n+2)(b0 dg + db gm).
    double dPnext = dP * (1.0 - (n + 2.0) * (b0 - db) * gm) -
                    P * (n + 2.0) * (b0 * dg + db * gm);
    double Pmnext = Pnext - dPnext;
    // Series gap term: (n+2) [c0 g / P0' - cm gm / Pm'] with the numerator
    // expanded in differences.
    double num = Pnext * (dc * g + c0 * dg - dc * dg) - c0 * g * dPnext;
    gap.add((n + 2.0) * num / (Pnext * Pmnext));
    // dg' = dg - (n+8) [b0 dg (g + gm) + db gm^2].
    double dgnext = dg - (n + 8.0) * (b0 * dg * (g + gm) + db * gm * gm);
    g = g - (n + 8.0) * b0 * g * g;
    if (g <= 0.0) throw std::runtime_error("run_delta_series: coupling left (0, inf)");
    P = Pnext;
    dg = dgnext;
    dP = dPnext;
    s.g0.push_back(g);
    s.P0.push_back(P);
    s.dg.push_back(dg);
    s.dP.push_back(dP);
  }
  s.nu0c_gap = gap.value();
  s.g_massive = g - dg;
  s.P_massive = P - dP;
  return s;
}

// Terminal coupling lim_j g_j on massive tables, detected by the Cauchy
// criterion |g_{j+1} - g_j| < 1e-16 g_j.  The g-flow never feels nu, so the
// limit is the same on and off the critical trajectory.  Satisfies
// 1/g_inf - 1/g0 = (n+8) sum_j b_j up to a relative defect of order g0.
inline double g_infinity(int n, double g0, const FlowTables& tab) {
  if (n < 0 || !(g0 > 0.0)) throw std::invalid_argument("g_infinity: bad n or g0");
  if (!(tab.m2 > 0.0))
    throw std::invalid_argument("g_infinity: massless tables never converge");
  double g = g0;
  for (int j = 0; j < tab.J(); ++j) {
    double gn = g - (n + 8.0) * tab.b[static_cast<std::size_t>(j)] * g * g;
    if (gn <= 0.0) throw std::runtime_error("g_infinity: coupling left (0, inf)");
    double dg = g - gn;
    if (dg < 1e-16 * g) return gn;
    g = gn;
  }
  throw std::runtime_error("g_infinity: no convergence before j_max; last iterate " +
                           std::to_string(g));
}

}  // namespace phi4rg
