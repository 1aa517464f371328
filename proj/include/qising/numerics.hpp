#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

namespace qising {

inline double abs_of(double x) { return std::abs(x); }
inline double abs_of(const std::complex<double>& x) { return std::abs(x); }

template <class T>
struct QuadResult {
  T value{};
  double abs_err = 0.0;
  std::size_t evals = 0;
  bool converged = false;
};

namespace detail {

// 15-point Kronrod extension of 7-point Gauss, abscissae for [-1, 1].
inline constexpr double kGK15Node[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769,
    0.741531185599394, 0.586087235467691, 0.405845151377397,
    0.207784955007898, 0.0};
inline constexpr double kGK15WK[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728};
// Gauss weights attach to odd-index nodes above (and the centre).
inline constexpr double kGK15WG[4] = {0.129484966168870, 0.279705391489277,
                                      0.381830050505119, 0.417959183673469};

template <class F, class T>
void gk15(F&& f, double a, double b, T& value, double& err) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  T fc = f(c);
  T kron = fc * kGK15WK[7];
  T gauss = fc * kGK15WG[3];
  for (int i = 0; i < 7; ++i) {
    T lo = f(c - h * kGK15Node[i]);
    T hi = f(c + h * kGK15Node[i]);
    kron += (lo + hi) * kGK15WK[i];
    if (i % 2 == 1) gauss += (lo + hi) * kGK15WG[i / 2];
  }
  value = kron * h;
  err = abs_of((kron - gauss) * h);
}

}  // namespace detail

// Adaptive Gauss-Kronrod on [a, b]. Splits the worst segment until the summed
// error estimate is below max(abs_tol, rel_tol * |integral|).
template <class F>
auto integrate_gk(F&& f, double a, double b, double abs_tol,
                  double rel_tol = 0.0, std::size_t max_segments = 4000)
    -> QuadResult<decltype(f(a))> {
  using T = decltype(f(a));
  struct Seg {
    double a, b, err;
    T val;
  };
  QuadResult<T> out;
  if (a == b) {
    out.converged = true;
    return out;
  }
  std::vector<Seg> segs;
  Seg s0{a, b, 0.0, T{}};
  detail::gk15(f, a, b, s0.val, s0.err);
  out.evals += 15;
  segs.push_back(s0);
  auto worse = [](const Seg& x, const Seg& y) { return x.err < y.err; };
  std::make_heap(segs.begin(), segs.end(), worse);
  for (;;) {
    T total{};
    double err = 0.0;
    for (const auto& s : segs) {
      total += s.val;
      err += s.err;
    }
    out.value = total;
    out.abs_err = err;
    if (err <= std::max(abs_tol, rel_tol * abs_of(total))) {
      out.converged = true;
      return out;
    }
    if (segs.size() >= max_segments) return out;
    std::pop_heap(segs.begin(), segs.end(), worse);
    Seg top = segs.back();
    segs.pop_back();
    double mid = 0.5 * (top.a + top.b);
    if (mid == top.a || mid == top.b) return out;  // interval exhausted
    Seg l{top.a, mid, 0.0, T{}}, r{mid, top.b, 0.0, T{}};
    detail::gk15(f, l.a, l.b, l.val, l.err);
    detail::gk15(f, r.a, r.b, r.val, r.err);
    out.evals += 30;
    segs.push_back(l);
    std::push_heap(segs.begin(), segs.end(), worse);
    segs.push_back(r);
    std::push_heap(segs.begin(), segs.end(), worse);
  }
}

// Richardson step for a quantity with leading error O(h^p): combine values at
// h and h/2.
template <class T>
T richardson(const T& vh, const T& vh2, int p = 2) {
  const double f = std::ldexp(1.0, p);  // 2^p
  return (vh2 * f - vh) / (f - 1.0);
}

struct LinFit {
  double slope = 0.0;
  double intercept = 0.0;
};

inline LinFit linear_fit(const std::vector<double>& x,
                         const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("linear_fit: need matching n >= 2");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  LinFit f;
  f.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  f.intercept = (sy - f.slope * sx) / n;
  return f;
}

// Kolmogorov-Smirnov distance of sorted samples in [0,1] against Uniform(0,1),
// and the asymptotic two-sided p-value.
inline double ks_statistic_uniform(std::vector<double> s) {
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double d = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double cdf = s[i];
    d = std::max(d, std::abs((i + 1) / n - cdf));
    d = std::max(d, std::abs(cdf - i / n));
  }
  return d;
}

inline double ks_pvalue(double d, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double lam = (sn + 0.12 + 0.11 / sn) * d;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = 2.0 * ((k % 2 == 1) ? 1.0 : -1.0) *
                        std::exp(-2.0 * lam * lam * k * k);
    sum += term;
    if (std::abs(term) < 1e-16) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

struct Kahan {
  double sum = 0.0;
  double c = 0.0;
  void add(double x) {
    double y = x - c;
    double t = sum + y;
    c = (t - sum) - y;
    sum = t;
  }
};

}  // namespace qising
