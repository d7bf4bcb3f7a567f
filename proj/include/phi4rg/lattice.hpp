// Z^4 lattice basics: Laplacian symbol, heat kernel, Brillouin-zone
// quadrature, the free Green function in position space, and the exact
// finite-torus Green function.
//
// Conventions.  The nearest-neighbour Laplacian has symbol
// lambda(k) = sum_i 4 sin^2(k_i / 2) on [-pi, pi]^4, and the continuous-time
// heat kernel factorises per axis: p_u(x) = prod_i exp(-2u) I_{|x_i|}(2u).
// All Brillouin integrals are normalised as averages, (2 pi)^{-4} int d^4k.
// Site tables on a torus are row-major with the last axis fastest.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <vector>

#include "bessel.hpp"
#include "quadrature.hpp"

namespace phi4rg {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double k16Pi2 = 157.91367041742973790108772;  // 16 pi^2

struct TorusSpec {
  int d = 4;  // spatial dimension
  int L = 2;  // block ratio per scale
  int N = 1;  // number of scales; torus side = L^N

  int side() const {
    long long s = 1;
    for (int k = 0; k < N; ++k) s *= L;
    return static_cast<int>(s);
  }
  long long sites() const {
    long long s = 1;
    for (int k = 0; k < d; ++k) s *= side();
    return s;
  }
};

inline void validate(const TorusSpec& t) {
  if (t.d < 1 || t.L < 2 || t.N < 1)
    throw std::domain_error("TorusSpec: need d >= 1, L >= 2, N >= 1");
  double cells = std::pow(static_cast<double>(t.L), static_cast<double>(t.N) * t.d);
  if (cells > 1e9) throw std::length_error("TorusSpec: torus too large to enumerate");
}

namespace detail {

// Evaluates a momentum symbol f(lambda(k)) at every torus momentum and
// inverse-transforms to position space by d successive cosine transforms;
// valid because the symbol table is even in every momentum axis.
template <class F>
std::vector<double> torus_from_symbol(const TorusSpec& t, F&& symbol) {
  validate(t);
  long long sites = t.sites();
  if (sites > (1 << 20)) throw std::length_error("torus_from_symbol: torus too large");
  int side = t.side();

  std::vector<double> cur(static_cast<std::size_t>(sites));
  std::vector<int> digit(static_cast<std::size_t>(t.d), 0);
  for (long long i = 0; i < sites; ++i) {
    double lam = 0.0;
    for (int a = 0; a < t.d; ++a) {
      double s = std::sin(kPi * digit[static_cast<std::size_t>(a)] / side);
      lam += 4.0 * s * s;
    }
    cur[static_cast<std::size_t>(i)] = symbol(lam);
    for (int a = t.d - 1; a >= 0; --a) {
      if (++digit[static_cast<std::size_t>(a)] < side) break;
      digit[static_cast<std::size_t>(a)] = 0;
    }
  }

  std::vector<double> cosmat(static_cast<std::size_t>(side) * side);
  for (int x = 0; x < side; ++x)
    for (int n = 0; n < side; ++n)
      cosmat[static_cast<std::size_t>(x) * side + n] =
          std::cos(2.0 * kPi * static_cast<double>(n) * x / side);

  std::vector<double> next(cur.size());
  std::vector<double> line(static_cast<std::size_t>(side));
  long long stride = sites;
  for (int a = 0; a < t.d; ++a) {
    stride /= side;  // stride of axis a in the row-major layout
    for (long long base = 0; base < sites; ++base) {
      // Visit each axis-a line once, at its first element.
      if ((base / stride) % side != 0) continue;
      for (int n = 0; n < side; ++n)
        line[static_cast<std::size_t>(n)] = cur[static_cast<std::size_t>(base + n * stride)];
      for (int x = 0; x < side; ++x) {
        Neumaier acc;
        for (int n = 0; n < side; ++n)
          acc.add(cosmat[static_cast<std::size_t>(x) * side + n] * line[static_cast<std::size_t>(n)]);
        next[static_cast<std::size_t>(base + x * stride)] = acc.value();
      }
    }
    cur.swap(next);
  }
  double norm = static_cast<double>(sites);
  for (double& v : cur) v /= norm;
  return cur;
}

}  // namespace detail

// G(x) = (-Delta + m^2)^{-1}(0, x) on the torus by the exact momentum sum.
// The zero mode makes sum_x G(x) = 1/m^2 identically.
inline std::vector<double> torus_green(const TorusSpec& t, double m2) {
  if (!(m2 > 0.0)) throw std::domain_error("torus_green: m2 <= 0");
  return detail::torus_from_symbol(t, [m2](double lam) { return 1.0 / (lam + m2); });
}

inline double axis_symbol(double k) {
  double s = std::sin(0.5 * k);
  return 4.0 * s * s;
}

inline double lattice_symbol(const std::array<double, 4>& k) {
  return axis_symbol(k[0]) + axis_symbol(k[1]) + axis_symbol(k[2]) + axis_symbol(k[3]);
}

// Heat-kernel diagonal p_u(0) = [exp(-2u) I_0(2u)]^d.
inline double heat_diag(double u, int d = 4) {
  double a = i0_scaled(2.0 * u);
  double r = 1.0;
  for (int i = 0; i < d; ++i) r *= a;
  return r;
}

// 16 pi^2 s^2 p_s(0) for d = 4.  Tends to 1 + 1/(4s) + O(s^-2) as s grows
// and never underflows, unlike p_s(0) itself which leaves double range
// near s ~ 1e77 per squared axis pair.
inline double heat_diag_scaled(double s) {
  if (!(s > 0.0)) throw std::invalid_argument("heat_diag_scaled: s <= 0");
  double h = std::sqrt(4.0 * kPi * s) * i0_scaled(2.0 * s);
  double h2 = h * h;
  return h2 * h2;
}

// p_u(x) on Z^4.
inline double heat_kernel(double u, const std::array<int, 4>& x) {
  int kmax = 0;
  for (int c : x) kmax = std::max(kmax, std::abs(c));
  auto tab = i_scaled_all(kmax, 2.0 * u);
  double r = 1.0;
  for (int c : x) r *= tab[static_cast<std::size_t>(std::abs(c))];
  return r;
}

// Per-axis quadrature nodes on [0, pi] for integrands even in each k_i.
// Panels halve dyadically toward k = 0 so that structure on scale k_min
// (a mass or inverse time scale) is resolved; the innermost panel has
// width <= 2 k_min.
struct AxisRule {
  std::vector<double> k;
  std::vector<double> w;
};

inline AxisRule brillouin_axis(double k_min, int per_panel = 12) {
  k_min = std::clamp(k_min, 1e-12, kPi / 4.0);
  std::vector<double> edges{0.0};
  double e = kPi;
  while (e / 2.0 > k_min && edges.size() < 64) e /= 2.0;
  for (double s = e; s < kPi; s *= 2.0) edges.push_back(s);
  edges.push_back(kPi);
  GaussRule g = gauss_legendre(per_panel);
  AxisRule ax;
  for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
    double c = 0.5 * (edges[p] + edges[p + 1]);
    double h = 0.5 * (edges[p + 1] - edges[p]);
    for (std::size_t i = 0; i < g.x.size(); ++i) {
      ax.k.push_back(c + h * g.x[i]);
      ax.w.push_back(h * g.w[i]);
    }
  }
  return ax;
}

// Brillouin average of f(k) for f even in each axis; full tensor product,
// cost |axis|^4.
template <class F>
double brillouin_average(F&& f, const AxisRule& ax) {
  const std::size_t n = ax.k.size();
  Neumaier acc;
  std::array<double, 4> k;
  for (std::size_t a = 0; a < n; ++a) {
    k[0] = ax.k[a];
    for (std::size_t b = 0; b < n; ++b) {
      k[1] = ax.k[b];
      double wab = ax.w[a] * ax.w[b];
      for (std::size_t c = 0; c < n; ++c) {
        k[2] = ax.k[c];
        double wabc = wab * ax.w[c];
        for (std::size_t d = 0; d < n; ++d) {
          k[3] = ax.k[d];
          acc.add(wabc * ax.w[d] * f(k));
        }
      }
    }
  }
  double pi4 = kPi * kPi * kPi * kPi;
  return acc.value() / pi4;
}

namespace detail {
inline double perm_count(std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
  // Number of distinct orderings of a sorted index 4-tuple.
  if (a == d) return 1.0;
  if (a == c || b == d) return 4.0;
  if (a == b && c == d) return 6.0;
  if (a == b || b == c || c == d) return 12.0;
  return 24.0;
}
}  // namespace detail

// Brillouin average of g(lambda(k)) exploiting permutation symmetry of the
// axes: only non-decreasing index tuples are visited, C(n+3, 4) of them
// instead of n^4.
template <class F>
double brillouin_average_symbol(F&& g, const AxisRule& ax) {
  const std::size_t n = ax.k.size();
  std::vector<double> lam(n);
  for (std::size_t i = 0; i < n; ++i) lam[i] = axis_symbol(ax.k[i]);
  Neumaier acc;
  for (std::size_t a = 0; a < n; ++a) {
    double la = lam[a], wa = ax.w[a];
    for (std::size_t b = a; b < n; ++b) {
      double lab = la + lam[b];
      double wab = wa * ax.w[b];
      for (std::size_t c = b; c < n; ++c) {
        double labc = lab + lam[c];
        double wabc = wab * ax.w[c];
        for (std::size_t d = c; d < n; ++d) {
          double w = wabc * ax.w[d] * detail::perm_count(a, b, c, d);
          acc.add(w * g(labc + lam[d]));
        }
      }
    }
  }
  double pi4 = kPi * kPi * kPi * kPi;
  return acc.value() / pi4;
}

// Free Green functions (-Delta + m^2)^{-1}(0, x) on Z^4 through the
// proper-time representation int_0^inf exp(-u m^2) p_u(x) du, evaluated for
// a batch of sites on one shared u-grid.  m2 = 0 is allowed for x != 0;
// the u-integration is continued in log-u until the power-law tail
// (4 pi u)^{-2} contributes below 1e-17 of the running total.
inline std::vector<double> green_position_many(const std::vector<std::array<int, 4>>& xs,
                                               double m2) {
  if (m2 < 0) throw std::invalid_argument("green_position_many: m2 < 0");
  int kmax = 0;
  bool has_origin = false;
  for (const auto& x : xs) {
    int nrm2 = 0;
    for (int c : x) {
      kmax = std::max(kmax, std::abs(c));
      nrm2 += c * c;
    }
    if (nrm2 == 0) has_origin = true;
  }
  if (m2 == 0.0 && has_origin)
    throw std::invalid_argument("green_position_many: massless Green diverges at x = 0");

  std::vector<Neumaier> acc(xs.size());
  GaussRule g16 = gauss_legendre(16);
  auto add_panel = [&](double a, double b) {
    // Returns the largest |contribution| across sites, for the stop rule.
    double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double peak = 0.0;
    for (std::size_t i = 0; i < g16.x.size(); ++i) {
      double u = c + h * g16.x[i];
      double w = h * g16.w[i] * std::exp(-u * m2);
      auto tab = i_scaled_all(kmax, 2.0 * u);
      for (std::size_t j = 0; j < xs.size(); ++j) {
        double p = 1.0;
        for (int cc : xs[j]) p *= tab[static_cast<std::size_t>(std::abs(cc))];
        double v = w * p;
        acc[j].add(v);
        peak = std::max(peak, std::abs(v));
      }
    }
    return peak;
  };

  add_panel(0.0, 1.0 / 16.0);
  double u = 1.0 / 16.0;
  for (; u < 64.0; u *= 2.0) add_panel(u, 2.0 * u);

  // Far region: dyadic panels continue; stop once two consecutive panels
  // fall below 1e-17 of the accumulated peak and the heat-kernel peak
  // u ~ |x|^2 / 4 of every requested site has been passed.
  double guard = 4.0 * (1.0 + 4.0 * static_cast<double>(kmax) * kmax);
  int quiet = 0;
  while (u < 1e300) {
    double contrib = add_panel(u, 2.0 * u);
    u *= 2.0;
    double total = 0.0;
    for (const auto& a : acc) total = std::max(total, std::abs(a.value()));
    if (u > guard && contrib <= 1e-17 * total)
      ++quiet;
    else
      quiet = 0;
    if (quiet >= 2) break;
  }

  std::vector<double> out(xs.size());
  for (std::size_t j = 0; j < xs.size(); ++j) out[j] = acc[j].value();
  return out;
}

inline double green_position(const std::array<int, 4>& x, double m2) {
  return green_position_many({x}, m2)[0];
}

}  // namespace phi4rg
