// Scaled modified Bessel functions for the lattice heat kernel.
//
// Everything works with exponentially scaled values i_k(x) = exp(-x) I_k(x),
// which stay in [0, 1] for all x >= 0 and never overflow.  The transition
// kernel of continuous-time simple random walk on Z is exp(-2u) I_{|x|}(2u).
#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace phi4rg {

namespace detail {

// Power series for exp(-x) I_0(x): all terms positive, so the relative
// error is a few ulp.  Usable for any x but the scaling factor exp(-x)
// loses accuracy in the last multiply once x is large; keep x <= 16.
inline double i0_scaled_series(double x) {
  double u = 0.5 * x;
  double term = 1.0, sum = 1.0;
  double u2 = u * u;
  for (int m = 1; m < 200; ++m) {
    term *= u2 / (static_cast<double>(m) * m);
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  return std::exp(-x) * sum;
}

// Hankel asymptotic expansion of exp(-x) I_0(x) ~ (2 pi x)^{-1/2} sum a_m x^{-m}
// with a_m = prod_{i<m} (2i+1)^2 / (8 (i+1)).  For x >= 16 the truncation
// error at the smallest term is far below 1e-15 relative.
inline double i0_scaled_asymptotic(double x) {
  double sum = 1.0, term = 1.0;
  double prev = 1.0;
  for (int m = 1; m < 40; ++m) {
    double num = (2.0 * m - 1.0) * (2.0 * m - 1.0);
    term *= num / (8.0 * m * x);
    if (term > prev) break;   // divergent tail reached, stop at smallest term
    sum += term;
    prev = term;
    if (term < 1e-17 * sum) break;
  }
  return sum / std::sqrt(2.0 * 3.14159265358979323846 * x);
}

}  // namespace detail

// exp(-x) I_0(x), accurate to ~1e-14 relative on [0, inf).
inline double i0_scaled(double x) {
  if (x < 0) throw std::invalid_argument("i0_scaled: x < 0");
  return x <= 16.0 ? detail::i0_scaled_series(x)
                   : detail::i0_scaled_asymptotic(x);
}

// exp(-x) [I_0(x), I_1(x), ..., I_{kmax}(x)] by Miller's downward recurrence,
// normalised with I_0 + 2 sum_{k>=1} I_k = e^x.  The start order grows with x;
// for x beyond a few thousand use bessel_i_scaled_quad instead.
inline std::vector<double> i_scaled_miller(int kmax, double x) {
  if (kmax < 0) throw std::invalid_argument("i_scaled_miller: kmax < 0");
  if (x < 0) throw std::invalid_argument("i_scaled_miller: x < 0");
  std::vector<double> out(static_cast<std::size_t>(kmax) + 1, 0.0);
  if (x == 0.0) {
    out[0] = 1.0;
    return out;
  }
  // The downward recurrence only damps contamination for orders above x, and
  // the turnover region has width ~ x^{1/3}; starting 10 widths above x (or
  // above kmax, whichever governs) leaves the trial-seed error below 1e-25.
  int start = std::max(kmax, static_cast<int>(std::ceil(x))) + 30 +
              static_cast<int>(10.0 * std::cbrt(x + 1.0) +
                               2.0 * std::sqrt(40.0 * (kmax + 1.0)));
  double kp1 = 0.0, k0 = 1e-30;
  double norm = 0.0;
  for (int k = start; k >= 1; --k) {
    double km1 = kp1 + (2.0 * k / x) * k0;
    kp1 = k0;
    k0 = km1;
    norm += 2.0 * kp1;
    if (k - 1 <= kmax) out[static_cast<std::size_t>(k - 1)] = km1;
    // Rescale to avoid overflow of the unnormalised recurrence.
    if (k0 > 1e250) {
      k0 *= 1e-250;
      kp1 *= 1e-250;
      norm *= 1e-250;
      for (auto& v : out) v *= 1e-250;
    }
  }
  norm += k0;   // norm = e^x * i_0_unnormalised scale
  for (auto& v : out) v /= norm;
  return out;
}

// exp(-x) I_k(x) = (1/pi) int_0^pi exp(x (cos t - 1)) cos(k t) dt by
// Gauss-Legendre on [0, tmax], where tmax cuts the integrand at ~1e-20.
// Robust for large x where Miller start orders would be excessive.
inline std::vector<double> i_scaled_quad(int kmax, double x, int nodes = 192) {
  if (kmax < 0 || x <= 0) throw std::invalid_argument("i_scaled_quad: bad args");
  // exp(x(cos t - 1)) <= exp(-x t^2 / 5) on [0, pi]; 1e-22 cutoff.
  const double pi = 3.14159265358979323846;
  double tmax = std::min(pi, std::sqrt(5.0 * 51.0 / x));
  std::vector<double> out(static_cast<std::size_t>(kmax) + 1, 0.0);
  // Composite 16-point Gauss-Legendre panels.
  static const double gx[8] = {
      0.0950125098376374, 0.2816035507792589, 0.4580167776572274,
      0.6178762444026438, 0.7554044083550030, 0.8656312023878318,
      0.9445750230732326, 0.9894009349916499};
  static const double gw[8] = {
      0.1894506104550685, 0.1826034150449236, 0.1691565193950025,
      0.1495959888165767, 0.1246289712555339, 0.0951585116824928,
      0.0622535239386479, 0.0271524594117541};
  int panels = (nodes + 15) / 16;
  double h = tmax / panels;
  for (int p = 0; p < panels; ++p) {
    double c = (p + 0.5) * h, r = 0.5 * h;
    for (int i = 0; i < 8; ++i) {
      for (double sgn : {-1.0, 1.0}) {
        double t = c + sgn * r * gx[i];
        double w = r * gw[i];
        // x (cos t - 1) written as -2 x sin^2(t/2): the direct form loses all
        // accuracy once t < 1e-8, which large x reaches.
        double sh = std::sin(0.5 * t);
        double f = std::exp(-2.0 * x * sh * sh);
        for (int k = 0; k <= kmax; ++k)
          out[static_cast<std::size_t>(k)] += w * f * std::cos(k * t);
      }
    }
  }
  for (auto& v : out) v /= pi;
  return out;
}

// exp(-x) I_k(x) for all orders 0..kmax, choosing the method by x.
inline std::vector<double> i_scaled_all(int kmax, double x) {
  if (x > 2000.0) return i_scaled_quad(kmax, x);
  return i_scaled_miller(kmax, x);
}

}  // namespace phi4rg
