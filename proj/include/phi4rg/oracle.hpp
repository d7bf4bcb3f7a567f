// Independent cross-checks for the analytic machinery: a dense linear-algebra
// Green function, a generic-dimension position-space Green evaluator, the
// position-space bubble sum, the potential evaluator, and a small-torus
// Metropolis sampler for the |phi|^4 measure.
//
// Each check pairs two routes that share no code: the torus Green function is
// solved densely by Cholesky and compared with the momentum sum; the bubble
// is summed over position space and compared with the proper-time integral;
// the sampler is anchored by the exact free-field zero mode chi = 1/nu and by
// two-site transfer-matrix quadrature.  The sampler is a sanity layer only:
// desk-scale MCMC cannot resolve 4-dimensional log corrections, and nothing
// here asserts exponents from it.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "covariance.hpp"
#include "lattice.hpp"

namespace phi4rg {

struct FieldConfig {
  TorusSpec torus;
  int n = 1;                  // field components
  std::vector<double> values; // site-major: values[site * n + c]
};

inline void validate(const FieldConfig& f) {
  validate(f.torus);
  if (f.n < 1) throw std::invalid_argument("FieldConfig: n < 1");
  if (static_cast<long long>(f.values.size()) != f.torus.sites() * f.n)
    throw std::invalid_argument("FieldConfig: values size mismatch");
}

// Flat neighbour table: 2d entries per site, row-major sites, axis order
// (+0,-0,+1,-1,...).  On a side-2 torus both axis neighbours coincide.
inline std::vector<int> torus_neighbors(const TorusSpec& t) {
  validate(t);
  long long sites = t.sites();
  if (sites > (1 << 20)) throw std::length_error("torus_neighbors: torus too large");
  int side = t.side();
  std::vector<int> nbr(static_cast<std::size_t>(sites) * 2 * t.d);
  std::vector<long long> stride(static_cast<std::size_t>(t.d));
  stride[static_cast<std::size_t>(t.d - 1)] = 1;
  for (int a = t.d - 2; a >= 0; --a)
    stride[static_cast<std::size_t>(a)] = stride[static_cast<std::size_t>(a + 1)] * side;
  for (long long s = 0; s < sites; ++s) {
    for (int a = 0; a < t.d; ++a) {
      long long st = stride[static_cast<std::size_t>(a)];
      int c = static_cast<int>((s / st) % side);
      long long up = s + (c + 1 == side ? -(side - 1) * st : st);
      long long dn = s + (c == 0 ? (side - 1) * st : -st);
      nbr[static_cast<std::size_t>(s * 2 * t.d + 2 * a)] = static_cast<int>(up);
      nbr[static_cast<std::size_t>(s * 2 * t.d + 2 * a + 1)] = static_cast<int>(dn);
    }
  }
  return nbr;
}

// V(phi, X) = sum over X of z/2 phi.(-Delta phi) + nu/2 |phi|^2 + g/4 |phi|^4.
inline double potential(const FieldConfig& f, double g, double nu, double z,
                        const std::vector<int>& sites) {
  validate(f);
  if (!std::isfinite(g) || !std::isfinite(nu) || !std::isfinite(z))
    throw std::invalid_argument("potential: parameters not finite");
  std::vector<int> nbr = torus_neighbors(f.torus);
  int deg = 2 * f.torus.d;
  Neumaier acc;
  for (int s : sites) {
    if (s < 0 || s >= f.torus.sites()) throw std::invalid_argument("potential: site outside torus");
    double sq = 0.0, lap = 0.0;
    for (int c = 0; c < f.n; ++c) {
      double v = f.values[static_cast<std::size_t>(s) * f.n + c];
      sq += v * v;
      double neigh = 0.0;
      for (int k = 0; k < deg; ++k)
        neigh += f.values[static_cast<std::size_t>(nbr[static_cast<std::size_t>(s) * deg + k]) * f.n + c];
      lap += v * (deg * v - neigh);
    }
    acc.add(0.5 * z * lap + 0.5 * nu * sq + 0.25 * g * sq * sq);
  }
  return acc.value();
}

// Assemble -Delta + m^2 densely, Cholesky-solve against the delta vector and
// compare with the momentum-sum torus Green function; returns the largest
// absolute deviation across sites.
inline double dense_green_check(const TorusSpec& t, double m2) {
  validate(t);
  if (!(m2 > 0.0)) throw std::domain_error("dense_green_check: m2 <= 0");
  long long sites = t.sites();
  if (sites > 8192) throw std::length_error("dense_green_check: more than 8192 sites");
  std::size_t N = static_cast<std::size_t>(sites);
  std::vector<int> nbr = torus_neighbors(t);
  int deg = 2 * t.d;

  std::vector<double> A(N * N, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    A[i * N + i] = deg + m2;
    for (int k = 0; k < deg; ++k)
      A[i * N + static_cast<std::size_t>(nbr[i * static_cast<std::size_t>(deg) + static_cast<std::size_t>(k)])] -= 1.0;
  }

  // In-place lower Cholesky; the matrix is strictly diagonally dominant.
  for (std::size_t j = 0; j < N; ++j) {
    double diag = A[j * N + j];
    for (std::size_t k = 0; k < j; ++k) diag -= A[j * N + k] * A[j * N + k];
    if (!(diag > 0.0)) throw std::runtime_error("dense_green_check: matrix not positive");
    diag = std::sqrt(diag);
    A[j * N + j] = diag;
    for (std::size_t i = j + 1; i < N; ++i) {
      double v = A[i * N + j];
      for (std::size_t k = 0; k < j; ++k) v -= A[i * N + k] * A[j * N + k];
      A[i * N + j] = v / diag;
    }
  }
  std::vector<double> y(N, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    double v = (i == 0) ? 1.0 : 0.0;
    for (std::size_t k = 0; k < i; ++k) v -= A[i * N + k] * y[k];
    y[i] = v / A[i * N + i];
  }
  std::vector<double> gdense(N, 0.0);
  for (std::size_t ii = N; ii-- > 0;) {
    double v = y[ii];
    for (std::size_t k = ii + 1; k < N; ++k) v -= A[k * N + ii] * gdense[k];
    gdense[ii] = v / A[ii * N + ii];
  }

  std::vector<double> gmom = torus_green(t, m2);
  double worst = 0.0;
  for (std::size_t i = 0; i < N; ++i) worst = std::max(worst, std::abs(gdense[i] - gmom[i]));
  return worst;
}

// Infinite-lattice Green function in any dimension d >= 1 through the
// proper-time representation; the 4-dimensional fast path lives in
// green_position_many.  Massless evaluation requires d >= 3 (the proper-time
// tail (4 pi u)^{-d/2} is otherwise not integrable) and x != 0.
inline double green_position_d(const std::vector<int>& x, double m2) {
  int d = static_cast<int>(x.size());
  if (d < 1) throw std::invalid_argument("green_position_d: empty coordinate");
  if (m2 < 0.0) throw std::invalid_argument("green_position_d: m2 < 0");
  int kmax = 0, nrm1 = 0;
  for (int c : x) {
    kmax = std::max(kmax, std::abs(c));
    nrm1 += std::abs(c);
  }
  if (m2 == 0.0 && (d <= 2 || nrm1 == 0))
    throw std::domain_error("green_position_d: massless Green diverges");

  GaussRule g16 = gauss_legendre(16);
  Neumaier acc;
  auto add_panel = [&](double a, double b) {
    double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double peak = 0.0;
    for (std::size_t i = 0; i < g16.x.size(); ++i) {
      double u = c + h * g16.x[i];
      auto tab = i_scaled_all(kmax, 2.0 * u);
      double p = 1.0;
      for (int cc : x) p *= tab[static_cast<std::size_t>(std::abs(cc))];
      double v = h * g16.w[i] * std::exp(-u * m2) * p;
      acc.add(v);
      peak = std::max(peak, std::abs(v));
    }
    return peak;
  };

  add_panel(0.0, 1.0 / 16.0);
  double u = 1.0 / 16.0;
  for (; u < 64.0; u *= 2.0) add_panel(u, 2.0 * u);
  double guard = 4.0 * (1.0 + 4.0 * static_cast<double>(kmax) * kmax);
  int quiet = 0;
  while (u < 1e300) {
    double contrib = add_panel(u, 2.0 * u);
    u *= 2.0;
    if (u > guard && contrib <= 1e-17 * std::abs(acc.value()))
      ++quiet;
    else
      quiet = 0;
    if (quiet >= 2) break;
  }
  return acc.value();
}

struct BubbleReport {
  double position_sum = 0.0;  // sum over |x|_inf <= R of G(x)^2
  double proper_time = 0.0;   // the proper-time bubble integral
  double difference = 0.0;
  double tail_bound = 0.0;    // estimated mass beyond the box
  bool conclusive = false;    // tail bound within the requested tolerance
};

// Compare the position-space bubble over the box |x|_inf <= R with the
// proper-time integral.  The tail is estimated from the exponential decay of
// G at rate mu = arccosh(1 + m^2/2) per unit sup-distance, with the
// polynomially growing shell count folded in.
inline BubbleReport bubble_position_check(double m2, int R, double tol = 1e-6) {
  if (!(m2 > 0.0)) throw std::domain_error("bubble_position_check: m2 <= 0");
  if (R < 2) throw std::invalid_argument("bubble_position_check: R < 2");

  std::vector<std::array<int, 4>> xs;
  std::vector<double> mult;
  for (int a = 0; a <= R; ++a)
    for (int b = 0; b <= R; ++b)
      for (int c = 0; c <= R; ++c)
        for (int e = 0; e <= R; ++e) {
          xs.push_back({a, b, c, e});
          mult.push_back((a ? 2.0 : 1.0) * (b ? 2.0 : 1.0) * (c ? 2.0 : 1.0) * (e ? 2.0 : 1.0));
        }
  std::vector<double> g = green_position_many(xs, m2);

  Neumaier box, shell;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double v = mult[i] * g[i] * g[i];
    box.add(v);
    int sup = std::max(std::max(xs[i][0], xs[i][1]), std::max(xs[i][2], xs[i][3]));
    if (sup == R) shell.add(v);
  }

  BubbleReport rep;
  rep.position_sum = box.value();
  rep.proper_time = bubble(m2);
  rep.difference = std::abs(rep.position_sum - rep.proper_time);

  double mu = std::acosh(1.0 + 0.5 * m2);
  double q = std::exp(-2.0 * mu);
  double sum = 0.0, pw = 1.0;
  for (int j = 1; j <= 400; ++j) {
    pw *= q;
    double grow = static_cast<double>(R + j) / R;
    double term = pw * grow * grow * grow;
    sum += term;
    if (term < 1e-6 * sum) break;
  }
  rep.tail_bound = shell.value() * sum;
  rep.conclusive = rep.tail_bound <= tol;
  return rep;
}

// chi of the two-site d=1 torus by transfer-matrix quadrature: both bonds
// wrap, so V = z (a-b)^2 + nu (a^2+b^2)/2 + g (a^4+b^4)/4 and
// chi = <(a+b)^2> / 2 per component.
inline double two_site_chi(double nu, double g, double z = 1.0) {
  if (!(nu > 0.0 || g > 0.0)) throw std::domain_error("two_site_chi: not integrable");
  // Truncation to [-8, 8] leaves a relative tail below 1e-12 for nu >= 1/2.
  double width = 8.0;
  GaussRule rule = gauss_legendre(96);
  auto nodes = [&](std::vector<double>& t, std::vector<double>& w) {
    for (int half = 0; half < 2; ++half) {
      double a = half ? 0.0 : -width, b = half ? width : 0.0;
      double c = 0.5 * (a + b), h = 0.5 * (b - a);
      for (std::size_t i = 0; i < rule.x.size(); ++i) {
        t.push_back(c + h * rule.x[i]);
        w.push_back(h * rule.w[i]);
      }
    }
  };
  std::vector<double> t, w;
  nodes(t, w);
  Neumaier Z, S;
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (std::size_t j = 0; j < t.size(); ++j) {
      double a = t[i], b = t[j];
      double V = z * (a - b) * (a - b) + 0.5 * nu * (a * a + b * b) +
                 0.25 * g * (a * a * a * a + b * b * b * b);
      double e = w[i] * w[j] * std::exp(-V);
      Z.add(e);
      S.add((a + b) * (a + b) * e);
    }
  }
  return S.value() / Z.value() / 2.0;
}

struct McmcEstimate {
  double mean = 0.0;
  double se = 0.0;        // standard error from batch means
  long long sweeps = 0;   // total sweeps performed
  std::uint64_t seed = 0;
  double acceptance = 0.0;
  int batches = 0;
};

// Metropolis single-site sampler for exp(-V_{g,nu,1}).  The proposal width
// adapts toward 40-60% acceptance during the first fifth of the run and is
// frozen for the measurement phase; chi is estimated per component as
// <|sum_x phi_x|^2> / (n |Lambda|), which the free field makes exactly 1/nu.
inline McmcEstimate mcmc_phi4(const TorusSpec& t, int n, double g, double nu,
                              std::uint64_t seed, long long sweeps) {
  validate(t);
  if (n < 1) throw std::invalid_argument("mcmc_phi4: n < 1");
  if (!(nu > 0.0 || g > 0.0)) throw std::domain_error("mcmc_phi4: measure not integrable");
  if (g < 0.0) throw std::domain_error("mcmc_phi4: g < 0");
  long long sites = t.sites();
  if (sites > 4096) throw std::length_error("mcmc_phi4: more than 4096 sites");
  if (sweeps < 320) throw std::invalid_argument("mcmc_phi4: need at least 320 sweeps");

  std::vector<int> nbr = torus_neighbors(t);
  int deg = 2 * t.d;
  std::vector<double> phi(static_cast<std::size_t>(sites) * n, 0.0);
  std::vector<double> M(static_cast<std::size_t>(n), 0.0);  // running sum_x phi_x

  std::uint64_t state = seed ? seed : 0x9e3779b97f4a7c15ull;
  std::mt19937_64 rng(state);
  auto uniform = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1p-53; };

  double width = 1.0;
  long long warmup = sweeps / 5;
  long long measure = sweeps - warmup;
  const int kBatches = 16;
  long long per_batch = measure / kBatches;
  measure = per_batch * kBatches;

  std::vector<double> prop(static_cast<std::size_t>(n));
  long long accepted = 0, proposed = 0;
  long long win_acc = 0, win_prop = 0;
  std::vector<double> batch_mean;
  Neumaier batch_acc;
  long long in_batch = 0;

  for (long long sweep = 0; sweep < warmup + measure; ++sweep) {
    bool measuring = sweep >= warmup;
    for (long long s = 0; s < sites; ++s) {
      double old_sq = 0.0, new_sq = 0.0, dlap = 0.0;
      for (int c = 0; c < n; ++c) {
        double v = phi[static_cast<std::size_t>(s) * n + c];
        double p = v + width * (2.0 * uniform() - 1.0);
        prop[static_cast<std::size_t>(c)] = p;
        old_sq += v * v;
        new_sq += p * p;
        double neigh = 0.0;
        for (int k = 0; k < deg; ++k)
          neigh += phi[static_cast<std::size_t>(nbr[static_cast<std::size_t>(s) * deg + static_cast<std::size_t>(k)]) * n + c];
        // Bond-energy change: each of the deg touching bonds appears once.
        dlap += 0.5 * (deg * (p * p - v * v) - 2.0 * (p - v) * neigh);
      }
      double dV = dlap + 0.5 * nu * (new_sq - old_sq) +
                  0.25 * g * (new_sq * new_sq - old_sq * old_sq);
      ++proposed;
      ++win_prop;
      if (dV <= 0.0 || uniform() < std::exp(-dV)) {
        ++accepted;
        ++win_acc;
        for (int c = 0; c < n; ++c) {
          M[static_cast<std::size_t>(c)] += prop[static_cast<std::size_t>(c)] - phi[static_cast<std::size_t>(s) * n + c];
          phi[static_cast<std::size_t>(s) * n + c] = prop[static_cast<std::size_t>(c)];
        }
      }
    }

    if (!measuring) {
      if (win_prop >= 50 * sites) {
        double rate = static_cast<double>(win_acc) / static_cast<double>(win_prop);
        if (rate < 0.40) width *= 0.8;
        if (rate > 0.60) width *= 1.25;
        width = std::min(50.0, std::max(1e-3, width));
        win_acc = win_prop = 0;
      }
      if (sweep + 1 == warmup) {
        accepted = proposed = 0;  // count acceptance over the measurement phase
      }
      continue;
    }

    double msq = 0.0;
    for (int c = 0; c < n; ++c) msq += M[static_cast<std::size_t>(c)] * M[static_cast<std::size_t>(c)];
    batch_acc.add(msq / (static_cast<double>(n) * static_cast<double>(sites)));
    if (++in_batch == per_batch) {
      batch_mean.push_back(batch_acc.value() / static_cast<double>(per_batch));
      batch_acc = Neumaier{};
      in_batch = 0;
      // Kill accumulated drift in the running field sum between batches.
      for (int c = 0; c < n; ++c) {
        Neumaier sum;
        for (long long s = 0; s < sites; ++s)
          sum.add(phi[static_cast<std::size_t>(s) * n + c]);
        M[static_cast<std::size_t>(c)] = sum.value();
      }
    }
  }

  McmcEstimate est;
  est.sweeps = warmup + measure;
  est.seed = seed;
  est.batches = kBatches;
  est.acceptance = static_cast<double>(accepted) / static_cast<double>(proposed);
  Neumaier mtot;
  for (double b : batch_mean) mtot.add(b);
  est.mean = mtot.value() / kBatches;
  Neumaier var;
  for (double b : batch_mean) var.add((b - est.mean) * (b - est.mean));
  est.se = std::sqrt(var.value() / (kBatches * (kBatches - 1.0)));
  return est;
}

}  // namespace phi4rg
