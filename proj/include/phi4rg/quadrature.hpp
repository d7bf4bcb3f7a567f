// One-dimensional quadrature machinery: Gauss-Legendre rules, compensated
// summation, composite panels, and breakpoint builders for integrands whose
// scale varies over many decades.
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

namespace phi4rg {

// Kahan-Neumaier compensated accumulator.  add() keeps a running error term
// so that sums of ~1e8 terms of mixed magnitude stay accurate to ~1 ulp of
// the true result rather than drifting by sqrt(N) ulps.
struct Neumaier {
  double sum = 0.0;
  double comp = 0.0;
  void add(double v) {
    double t = sum + v;
    if (std::abs(sum) >= std::abs(v))
      comp += (sum - t) + v;
    else
      comp += (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + comp; }
};

struct GaussRule {
  std::vector<double> x;   // nodes on (-1, 1)
  std::vector<double> w;
};

// Gauss-Legendre nodes and weights by Newton iteration on P_n.  Nodes are
// accurate to ~1 ulp for n up to several hundred.
inline GaussRule gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n < 1");
  GaussRule r;
  r.x.resize(static_cast<std::size_t>(n));
  r.w.resize(static_cast<std::size_t>(n));
  const double pi = 3.14159265358979323846;
  int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      // Evaluate P_n(x) and P'_n(x) by the three-term recurrence.
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      pp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    r.x[static_cast<std::size_t>(i)] = -x;
    r.x[static_cast<std::size_t>(n - 1 - i)] = x;
    double w = 2.0 / ((1.0 - x * x) * pp * pp);
    r.w[static_cast<std::size_t>(i)] = w;
    r.w[static_cast<std::size_t>(n - 1 - i)] = w;
  }
  if (n % 2 == 1) r.x[static_cast<std::size_t>(n / 2)] = 0.0;
  return r;
}

// Integral of f over [a, b] with a single n-point Gauss-Legendre rule.
template <class F>
double gauss_panel(F&& f, double a, double b, const GaussRule& rule) {
  double c = 0.5 * (a + b), h = 0.5 * (b - a);
  Neumaier acc;
  for (std::size_t i = 0; i < rule.x.size(); ++i)
    acc.add(h * rule.w[i] * f(c + h * rule.x[i]));
  return acc.value();
}

// Composite rule over consecutive panels [pts[0], pts[1]], [pts[1], pts[2]], ...
template <class F>
double gauss_composite(F&& f, const std::vector<double>& pts, const GaussRule& rule) {
  if (pts.size() < 2) throw std::invalid_argument("gauss_composite: need >= 2 breakpoints");
  Neumaier acc;
  for (std::size_t p = 0; p + 1 < pts.size(); ++p) {
    double a = pts[p], b = pts[p + 1];
    double c = 0.5 * (a + b), h = 0.5 * (b - a);
    for (std::size_t i = 0; i < rule.x.size(); ++i)
      acc.add(h * rule.w[i] * f(c + h * rule.x[i]));
  }
  return acc.value();
}

// Breakpoints a, 2a, 4a, ..., b (geometric, ratio 2), endpoints exact.
// Resolves integrands that vary on the scale of s itself.
inline std::vector<double> dyadic_breakpoints(double a, double b) {
  if (!(a > 0.0) || !(b > a)) throw std::invalid_argument("dyadic_breakpoints: need 0 < a < b");
  std::vector<double> pts{a};
  for (double s = 2.0 * a; s < b; s *= 2.0) pts.push_back(s);
  pts.push_back(b);
  return pts;
}

// Breakpoints with n geometrically spaced panels from a to b.
inline std::vector<double> geometric_breakpoints(double a, double b, int n) {
  if (!(a > 0.0) || !(b > a) || n < 1)
    throw std::invalid_argument("geometric_breakpoints: need 0 < a < b, n >= 1");
  std::vector<double> pts(static_cast<std::size_t>(n) + 1);
  double la = std::log(a), lb = std::log(b);
  for (int i = 0; i <= n; ++i)
    pts[static_cast<std::size_t>(i)] = std::exp(la + (lb - la) * i / n);
  pts.front() = a;
  pts.back() = b;
  return pts;
}

// Uniformly split [a, b] into n panels.
inline std::vector<double> linear_breakpoints(double a, double b, int n) {
  if (!(b > a) || n < 1) throw std::invalid_argument("linear_breakpoints: need a < b, n >= 1");
  std::vector<double> pts(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i)
    pts[static_cast<std::size_t>(i)] = a + (b - a) * i / n;
  pts.front() = a;
  pts.back() = b;
  return pts;
}

}  // namespace phi4rg
