#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "qising/lattice.hpp"
#include "qising/opuc.hpp"

// Closed-form continuum predictions: elliptic integrals and Jacobi functions,
// hyperbolic metrics, Pfaffians, and the half-plane/rectangle energy and spin
// formulas they combine into.

namespace qising {

struct EllipticParams {
  double k = 0;   // modulus
  double K = 0;   // quarter period
  double Kp = 0;  // complementary quarter period K(sqrt(1-k^2))
};

namespace detail {

inline long double agm(long double a, long double b) {
  while (std::fabs(a - b) > 1e-18L * a) {
    const long double m = 0.5L * (a + b);
    b = std::sqrt(a * b);
    a = m;
  }
  return a;
}

struct Jac3 {
  long double sn, cn, dn;
};

// Real-argument Jacobi functions by the descending Landen chain on function
// values; valid for every real u, no angle unwinding needed.
inline Jac3 jacobi_real(long double u, long double k) {
  long double emc = (1.0L - k) * (1.0L + k);  // complementary parameter
  if (emc <= 0.0L) {                           // k = 1 degenerates
    const long double c = 1.0L / std::cosh(u);
    return {std::tanh(u), c, c};
  }
  long double em[20], en[20];
  long double a = 1.0L, dn = 1.0L, c = 0.0L;
  int l = 0;
  for (int i = 0; i < 20; ++i) {
    l = i;
    em[i] = a;
    emc = std::sqrt(emc);
    en[i] = emc;
    c = 0.5L * (a + emc);
    if (std::fabs(a - emc) <= 1e-19L * a) break;
    emc *= a;
    a = c;
  }
  u *= c;
  long double sn = std::sin(u), cn = std::cos(u);
  if (sn != 0.0L) {
    a = cn / sn;
    c *= a;
    for (int i = l; i >= 0; --i) {
      const long double b = em[i];
      a *= c;
      c *= dn;
      dn = (en[i] + a) / (b + a);
      a = c / b;
    }
    a = 1.0L / std::sqrt(c * c + 1.0L);
    sn = sn >= 0.0L ? a : -a;
    cn = c * sn;
  }
  return {sn, cn, dn};
}

}  // namespace detail

inline EllipticParams elliptic_K(double k) {
  if (!(k > 0.0) || !(k < 1.0)) {
    throw std::invalid_argument("elliptic_K: modulus must lie in (0,1)");
  }
  const long double kp = std::sqrt((1.0L - k) * (1.0L + k));
  const long double pi = std::numbers::pi_v<long double>;
  EllipticParams out;
  out.k = k;
  out.K = static_cast<double>(pi / (2.0L * detail::agm(1.0L, kp)));
  out.Kp = static_cast<double>(pi / (2.0L * detail::agm(1.0L, k)));
  return out;
}

struct JacobiValues {
  std::complex<double> sn, cn, dn;
};

// sn, cn, dn at a complex argument, split through the real/imaginary addition
// identities: the x-part is evaluated at modulus k, the y-part at the
// complementary modulus. This avoids the cancellation a direct series would
// hit near the imaginary axis, where the rectangle formulas live.
inline JacobiValues jacobi(std::complex<double> z, double k) {
  if (!(k >= 0.0) || !(k < 1.0)) {
    throw std::invalid_argument("jacobi: modulus must lie in [0,1)");
  }
  const long double kl = k;
  const long double kp = std::sqrt((1.0L - kl) * (1.0L + kl));
  const auto re = detail::jacobi_real(z.real(), kl);
  const auto im = detail::jacobi_real(z.imag(), kp);
  const long double s = re.sn, c = re.cn, d = re.dn;
  const long double s1 = im.sn, c1 = im.cn, d1 = im.dn;
  const long double den = c1 * c1 + kl * kl * s * s * s1 * s1;
  if (den < 1e-20L) {
    throw std::domain_error("jacobi: argument at a pole");
  }
  using C = std::complex<double>;
  JacobiValues out;
  out.sn = C(static_cast<double>(s * d1 / den),
             static_cast<double>(c * d * s1 * c1 / den));
  out.cn = C(static_cast<double>(c * c1 / den),
             static_cast<double>(-s * d * s1 * d1 / den));
  out.dn = C(static_cast<double>(d * c1 * d1 / den),
             static_cast<double>(-kl * kl * s * c * s1 / den));
  return out;
}

// The three domains with explicit formulas. The rectangle R(k) is
// (-K(k), K(k)) x (0, K'(k)), the conformal image of the upper half-plane
// under the inverse of sn(., k).
struct Geometry {
  enum class Kind { halfplane, disk, rectangle };
  Kind kind = Kind::halfplane;
  double k = 0;  // rectangle modulus, unused otherwise

  static Geometry halfplane() { return {Kind::halfplane, 0.0}; }
  static Geometry disk() { return {Kind::disk, 0.0}; }
  static Geometry rectangle(double k) {
    if (!(k > 0.0) || !(k < 1.0)) {
      throw std::invalid_argument("Geometry::rectangle: modulus must lie in (0,1)");
    }
    return {Kind::rectangle, k};
  }
};

// Modulus of the derivative at a of a conformal map from the unit disk onto
// the domain sending 0 to a; Moebius freedom drops out.
inline double hyperbolic_metric(const Geometry& g, std::complex<double> a) {
  switch (g.kind) {
    case Geometry::Kind::halfplane:
      if (!(a.imag() > 0.0)) {
        throw std::domain_error("hyperbolic_metric: point not inside the half-plane");
      }
      return 1.0 / a.imag();
    case Geometry::Kind::disk:
      if (!(std::norm(a) < 1.0)) {
        throw std::domain_error("hyperbolic_metric: point not inside the disk");
      }
      return 2.0 / (1.0 - std::norm(a));
    case Geometry::Kind::rectangle: {
      const auto ep = elliptic_K(g.k);
      if (!(std::fabs(a.real()) < ep.K) || !(a.imag() > 0.0) ||
          !(a.imag() < ep.Kp)) {
        throw std::domain_error("hyperbolic_metric: point not inside the rectangle");
      }
      const auto j = jacobi(a, g.k);
      // Pullback of 1/Im along sn: |sn'| = |cn dn|.
      return std::abs(j.cn * j.dn) / j.sn.imag();
    }
  }
  throw std::logic_error("hyperbolic_metric: unknown geometry");
}

// Skew-symmetric matrix holding only its upper triangle, so antisymmetry
// cannot drift.
template <class T>
class SkewMatrix {
 public:
  explicit SkewMatrix(std::size_t dim)
      : dim_(dim), upper_(dim < 2 ? 0 : dim * (dim - 1) / 2, T{}) {}

  std::size_t dim() const { return dim_; }

  T at(std::size_t i, std::size_t j) const {
    if (i >= dim_ || j >= dim_) {
      throw std::out_of_range("SkewMatrix::at: index out of range");
    }
    if (i == j) return T{};
    return i < j ? upper_[index(i, j)] : -upper_[index(j, i)];
  }

  void set(std::size_t i, std::size_t j, T v) {
    if (i >= dim_ || j >= dim_) {
      throw std::out_of_range("SkewMatrix::set: index out of range");
    }
    if (i == j) {
      throw std::invalid_argument("SkewMatrix::set: diagonal is identically zero");
    }
    if (i < j) {
      upper_[index(i, j)] = v;
    } else {
      upper_[index(j, i)] = -v;
    }
  }

 private:
  std::size_t index(std::size_t i, std::size_t j) const {
    return i * (2 * dim_ - i - 1) / 2 + (j - i - 1);
  }

  std::size_t dim_;
  std::vector<T> upper_;
};

// Parlett-Reid tridiagonalization with pivoting; sign convention
// Pf([[0,a],[-a,0]]) = a.
template <class T>
T pfaffian(const SkewMatrix<T>& skew) {
  const std::size_t n = skew.dim();
  if (n % 2 != 0) {
    throw std::invalid_argument("pfaffian: dimension must be even");
  }
  if (n == 0) return T{1};
  std::vector<std::vector<T>> m(n, std::vector<T>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) m[i][j] = skew.at(i, j);
  }
  T pf{1};
  for (std::size_t k = 0; k + 1 < n; k += 2) {
    std::size_t p = k + 1;
    for (std::size_t i = k + 2; i < n; ++i) {
      if (std::abs(m[i][k]) > std::abs(m[p][k])) p = i;
    }
    if (std::abs(m[p][k]) == 0.0) return T{};  // singular, Pf vanishes
    if (p != k + 1) {
      std::swap(m[p], m[k + 1]);
      for (std::size_t i = 0; i < n; ++i) std::swap(m[i][p], m[i][k + 1]);
      pf = -pf;
    }
    pf *= m[k][k + 1];
    if (k + 2 >= n) break;
    std::vector<T> tau(n), w(n);
    for (std::size_t j = k + 2; j < n; ++j) {
      tau[j] = m[k][j] / m[k][k + 1];
      w[j] = m[j][k + 1];
    }
    for (std::size_t i = k + 2; i < n; ++i) {
      for (std::size_t j = k + 2; j < n; ++j) {
        m[i][j] += tau[i] * w[j] - w[i] * tau[j];
      }
    }
  }
  return pf;
}

// One energy insertion: the domain enters only through its hyperbolic metric;
// free boundary flips the sign.
inline double predict_energy(const Geometry& g, std::complex<double> a,
                             Boundary bc) {
  const double ell = hyperbolic_metric(g, a);
  const double value = ell / (std::numbers::sqrt2 * std::numbers::pi);
  return bc == Boundary::plus ? value : -value;
}

// n energy insertions in the upper half-plane under plus boundary: a Pfaffian
// over the points and their conjugates, kernel 1/(p_i - p_j). Conjugate pairs
// are kept adjacent and the prefactor is (sqrt(2) i / pi)^n; this keeps the
// value real and collapses to the one-point density for n = 1.
inline double predict_multi_energy_halfplane(
    const std::vector<std::complex<double>>& points) {
  const std::size_t n = points.size();
  if (n == 0) {
    throw std::invalid_argument("predict_multi_energy_halfplane: no points");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(points[i].imag() > 0.0)) {
      throw std::invalid_argument(
          "predict_multi_energy_halfplane: points need positive height");
    }
    for (std::size_t j = i + 1; j < n; ++j) {
      if (points[i] == points[j]) {
        throw std::invalid_argument(
            "predict_multi_energy_halfplane: points must be distinct");
      }
    }
  }
  using C = std::complex<double>;
  std::vector<C> p(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    p[2 * i] = points[i];
    p[2 * i + 1] = std::conj(points[i]);
  }
  SkewMatrix<C> kmat(2 * n);
  for (std::size_t i = 0; i < 2 * n; ++i) {
    for (std::size_t j = i + 1; j < 2 * n; ++j) {
      kmat.set(i, j, 1.0 / (p[i] - p[j]));
    }
  }
  C pref{1.0, 0.0};
  const C unit(0.0, std::numbers::sqrt2 / std::numbers::pi);
  for (std::size_t i = 0; i < n; ++i) pref *= unit;
  return (pref * pfaffian(kmat)).real();
}

// n spins in the upper half-plane at a_r = x_r + i t_r. The pair weight is
// R_rm = ((x_r-x_m)^2 + (t_r-t_m)^2) / ((x_r-x_m)^2 + (t_r+t_m)^2), averaged
// over sign assignments mu in {+-1}^n with exponents mu_r mu_m / 4. The
// average (rather than a 2^(n/2) scaling) makes the empty-pair bracket equal
// one, so a single point gives C (2/t)^(1/8) and far-separated points
// factorize into one-point values. Free boundary exists for n = 2 only and
// replaces the average by the odd combination, always below the plus value.
inline double predict_spins_halfplane(
    const std::vector<std::complex<double>>& points, Boundary bc) {
  const std::size_t n = points.size();
  if (n == 0) {
    throw std::invalid_argument("predict_spins_halfplane: no points");
  }
  if (bc == Boundary::free_ && n != 2) {
    throw std::invalid_argument(
        "predict_spins_halfplane: free boundary needs exactly two points");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(points[i].imag() > 0.0)) {
      throw std::invalid_argument(
          "predict_spins_halfplane: points need positive height");
    }
    for (std::size_t j = i + 1; j < n; ++j) {
      if (points[i] == points[j]) {
        throw std::invalid_argument(
            "predict_spins_halfplane: points must be distinct");
      }
    }
  }
  double prefactor = std::pow(spin_amplitude_sq(), 0.5 * double(n));
  for (std::size_t r = 0; r < n; ++r) {
    prefactor *= std::pow(2.0 / points[r].imag(), 0.125);
  }
  std::vector<double> log_r(n * n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t m = r + 1; m < n; ++m) {
      const double dx = points[r].real() - points[m].real();
      const double dt = points[r].imag() - points[m].imag();
      const double st = points[r].imag() + points[m].imag();
      log_r[r * n + m] = std::log((dx * dx + dt * dt) / (dx * dx + st * st));
    }
  }
  long double bracket = 0.0L;
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    double expo = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t m = r + 1; m < n; ++m) {
        const int mu = ((mask >> r) ^ (mask >> m)) & 1 ? -1 : 1;
        expo += 0.25 * mu * log_r[r * n + m];
      }
    }
    double weight = 1.0;
    if (bc == Boundary::free_) {
      weight = ((mask >> 0) ^ (mask >> 1)) & 1 ? 1.0 : -1.0;
    }
    bracket += weight * std::exp(expo);
  }
  bracket /= static_cast<long double>(std::size_t{1} << n);
  if (bracket < 0.0L) bracket = 0.0L;  // guard rounding at coincident heights
  return prefactor * std::sqrt(static_cast<double>(bracket));
}

// Rectangle-to-half-plane spin correlation ratio at shared coordinates.
inline double predict_rectangle_spin_ratio(
    const std::vector<std::complex<double>>& points, double k) {
  const auto ep = elliptic_K(k);
  double product = 1.0;
  for (const auto& a : points) {
    if (!(std::fabs(a.real()) < ep.K) || !(a.imag() > 0.0) ||
        !(a.imag() < ep.Kp)) {
      throw std::domain_error(
          "predict_rectangle_spin_ratio: point not inside the rectangle");
    }
    const auto j = jacobi(a, k);
    product *= std::abs(j.cn * j.dn);
  }
  return product;
}

// Full-plane two-point asymptotic C^2 |2z|^(-1/4); isotropic by construction.
inline double predict_fullplane_spin(double r) {
  if (!(r > 0.0) || !std::isfinite(r)) {
    throw std::invalid_argument("predict_fullplane_spin: needs r > 0");
  }
  return spin_amplitude_sq() * std::pow(2.0 * r, -0.25);
}

}  // namespace qising
