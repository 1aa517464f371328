#include "qising/continuum.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "qising/numerics.hpp"

namespace {

using namespace qising;
using C = std::complex<double>;

// Quadrature oracle for the complete elliptic integral.
double elliptic_K_quadrature(double k) {
  auto f = [&](double phi) -> long double {
    const long double s = std::sin(phi);
    return 1.0L / std::sqrt(1.0L - static_cast<long double>(k) * k * s * s);
  };
  return static_cast<double>(integrate_gk(f, 0.0, M_PI / 2.0, 1e-14).value);
}

// Inverse-integral oracle: u(w) = int_0^w dt / sqrt((1-t^2)(1-k^2 t^2)),
// so sn(u(w), k) must return w.
double sn_inverse_quadrature(double w, double k) {
  auto f = [&](double t) -> long double {
    const long double tt = t;
    return 1.0L / std::sqrt((1.0L - tt * tt) *
                            (1.0L - static_cast<long double>(k) * k * tt * tt));
  };
  return static_cast<double>(integrate_gk(f, 0.0, w, 1e-14).value);
}

template <class T>
T lu_det(std::vector<std::vector<T>> a) {
  const std::size_t n = a.size();
  T det{1};
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
    }
    if (p != c) {
      std::swap(a[p], a[c]);
      det = -det;
    }
    if (std::abs(a[c][c]) == 0.0) return T{};
    det *= a[c][c];
    for (std::size_t r = c + 1; r < n; ++r) {
      const T f = a[r][c] / a[c][c];
      for (std::size_t cc = c; cc < n; ++cc) a[r][cc] -= f * a[c][cc];
    }
  }
  return det;
}

TEST(Elliptic, AgmMatchesQuadrature) {
  for (double k : {0.1, 0.25, 0.5, 0.707, 0.9}) {
    const auto ep = elliptic_K(k);
    EXPECT_NEAR(ep.K / elliptic_K_quadrature(k), 1.0, 1e-12) << "k=" << k;
    EXPECT_NEAR(ep.Kp / elliptic_K_quadrature(std::sqrt(1.0 - k * k)), 1.0,
                1e-12)
        << "k=" << k;
    EXPECT_GT(ep.K, 0.0);
    EXPECT_GT(ep.Kp, 0.0);
  }
}

TEST(Elliptic, LemniscaticPointLimitsAndGates) {
  const auto ep = elliptic_K(std::numbers::sqrt2 / 2.0);
  EXPECT_NEAR(ep.K / ep.Kp, 1.0, 1e-13);
  EXPECT_NEAR(ep.K, 1.854074677301372, 1e-12);

  EXPECT_NEAR(elliptic_K(1e-6).K, M_PI / 2.0, 1e-11);

  double prev = 0.0;
  for (double k = 0.1; k < 0.95; k += 0.1) {
    const auto e = elliptic_K(k);
    EXPECT_GT(e.K / e.Kp, prev) << "k=" << k;
    prev = e.K / e.Kp;
  }

  EXPECT_THROW(elliptic_K(0.0), std::invalid_argument);
  EXPECT_THROW(elliptic_K(1.0), std::invalid_argument);
  EXPECT_THROW(elliptic_K(-0.3), std::invalid_argument);
  EXPECT_THROW(elliptic_K(1.2), std::invalid_argument);
}

TEST(Jacobi, SpecialValuesAndTrigLimit) {
  const auto origin = jacobi(C(0.0, 0.0), 0.6);
  EXPECT_NEAR(std::abs(origin.sn), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(origin.cn - 1.0), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(origin.dn - 1.0), 0.0, 1e-15);

  // Degenerate modulus: circular functions.
  const C z(0.3, 0.2);
  const auto trig = jacobi(z, 0.0);
  EXPECT_NEAR(std::abs(trig.sn - std::sin(z)), 0.0, 1e-10);
  EXPECT_NEAR(std::abs(trig.cn - std::cos(z)), 0.0, 1e-10);
  EXPECT_NEAR(std::abs(trig.dn - 1.0), 0.0, 1e-10);

  const double k = 0.6;
  const auto ep = elliptic_K(k);
  const auto quarter = jacobi(C(ep.K, 0.0), k);
  EXPECT_NEAR(std::abs(quarter.sn - 1.0), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(quarter.cn), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(quarter.dn - std::sqrt(1.0 - k * k)), 0.0, 1e-12);
}

TEST(Jacobi, InverseIntegralOracleAndIdentities) {
  for (double k : {0.35, 0.6, 0.85}) {
    for (double w : {0.2, 0.37, 0.8}) {
      const double u = sn_inverse_quadrature(w, k);
      const auto j = jacobi(C(u, 0.0), k);
      EXPECT_NEAR(j.sn.real(), w, 1e-12) << "k=" << k << " w=" << w;
      EXPECT_NEAR(j.sn.imag(), 0.0, 1e-13);
    }
  }

  // sn^2 + cn^2 = 1 and dn^2 + k^2 sn^2 = 1 across the period rectangle.
  std::mt19937 gen(20240817);
  for (int i = 0; i < 100; ++i) {
    const double k = i % 2 ? 0.55 : 0.8;
    const auto ep = elliptic_K(k);
    std::uniform_real_distribution<double> ux(-0.95 * ep.K, 0.95 * ep.K);
    std::uniform_real_distribution<double> uy(0.05 * ep.Kp, 0.9 * ep.Kp);
    const C z(ux(gen), uy(gen));
    const auto j = jacobi(z, k);
    EXPECT_NEAR(std::abs(j.sn * j.sn + j.cn * j.cn - 1.0), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(j.dn * j.dn + k * k * j.sn * j.sn - 1.0), 0.0, 1e-12);
  }
}

TEST(Jacobi, PeriodicityPolesAndGates) {
  const double k = 0.45;
  const auto ep = elliptic_K(k);
  const C z(0.37, 0.61);
  const auto base = jacobi(z, k);
  const auto shifted = jacobi(z + C(4.0 * ep.K, 0.0), k);
  EXPECT_NEAR(std::abs(shifted.sn - base.sn), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(shifted.cn - base.cn), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(shifted.dn - base.dn), 0.0, 1e-12);

  const auto half = jacobi(z + C(2.0 * ep.K, 0.0), k);
  EXPECT_NEAR(std::abs(half.sn + base.sn), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(half.cn + base.cn), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(half.dn - base.dn), 0.0, 1e-12);

  EXPECT_THROW(jacobi(C(0.0, ep.Kp), k), std::domain_error);
  EXPECT_THROW(jacobi(C(2.0 * ep.K, ep.Kp), k), std::domain_error);
  EXPECT_THROW(jacobi(C(0.2, 0.3), -0.1), std::invalid_argument);
  EXPECT_THROW(jacobi(C(0.2, 0.3), 1.0), std::invalid_argument);
}

TEST(Metric, HalfplaneAndDiskValues) {
  const auto h = Geometry::halfplane();
  for (double t : {0.3, 1.0, 2.5}) {
    EXPECT_NEAR(hyperbolic_metric(h, C(0.0, t)), 1.0 / t, 1e-14);
  }
  EXPECT_NEAR(hyperbolic_metric(h, C(1.7, 0.4)), 2.5, 1e-14);

  const auto d = Geometry::disk();
  EXPECT_NEAR(hyperbolic_metric(d, C(0.0, 0.0)), 2.0, 1e-15);
  EXPECT_NEAR(hyperbolic_metric(d, C(0.5, 0.0)), 8.0 / 3.0, 1e-14);
  EXPECT_NEAR(hyperbolic_metric(d, C(0.3, -0.4)), 8.0 / 3.0, 1e-14);

  EXPECT_THROW(hyperbolic_metric(h, C(1.0, 0.0)), std::domain_error);
  EXPECT_THROW(hyperbolic_metric(h, C(0.0, -0.2)), std::domain_error);
  EXPECT_THROW(hyperbolic_metric(d, C(1.0, 0.0)), std::domain_error);
  EXPECT_THROW(hyperbolic_metric(d, C(0.9, 0.9)), std::domain_error);
}

TEST(Metric, RectangleConformalCovariance) {
  // sn maps the rectangle onto the upper half-plane; the metric must pull
  // back along it. |d sn^{-1}/dz| is computed from z alone, so both sides
  // are reached through independent code paths.
  const double k = 0.65;
  const auto ep = elliptic_K(k);
  const auto rect = Geometry::rectangle(k);
  const auto h = Geometry::halfplane();
  std::mt19937 gen(77);
  std::uniform_real_distribution<double> ux(-0.9 * ep.K, 0.9 * ep.K);
  std::uniform_real_distribution<double> uy(0.05 * ep.Kp, 0.95 * ep.Kp);
  for (int i = 0; i < 20; ++i) {
    const C u(ux(gen), uy(gen));
    const C z = jacobi(u, k).sn;
    ASSERT_GT(z.imag(), 0.0);
    const C deriv_sq = (1.0 - z * z) * (1.0 - k * k * z * z);
    const double fprime = 1.0 / std::sqrt(std::abs(deriv_sq));
    EXPECT_NEAR(hyperbolic_metric(rect, u) * fprime /
                    hyperbolic_metric(h, z),
                1.0, 1e-8)
        << "u=" << u;
    // A smaller domain carries a denser metric.
    EXPECT_GT(hyperbolic_metric(rect, u), hyperbolic_metric(h, u) * (1.0 - 1e-12));
  }

  EXPECT_THROW(hyperbolic_metric(rect, C(0.5 * ep.K, 0.0)), std::domain_error);
  EXPECT_THROW(hyperbolic_metric(rect, C(1.1 * ep.K, 0.5 * ep.Kp)),
               std::domain_error);
  EXPECT_THROW(hyperbolic_metric(rect, C(0.0, 1.1 * ep.Kp)), std::domain_error);
}

TEST(Pfaffian, SmallClosedForms) {
  SkewMatrix<double> two(2);
  two.set(0, 1, 3.7);
  EXPECT_DOUBLE_EQ(pfaffian(two), 3.7);
  EXPECT_DOUBLE_EQ(two.at(1, 0), -3.7);
  EXPECT_DOUBLE_EQ(two.at(0, 0), 0.0);

  std::mt19937 gen(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  SkewMatrix<double> four(4);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = i + 1; j < 4; ++j) four.set(i, j, u(gen));
  }
  const double expected = four.at(0, 1) * four.at(2, 3) -
                          four.at(0, 2) * four.at(1, 3) +
                          four.at(0, 3) * four.at(1, 2);
  EXPECT_NEAR(pfaffian(four) / expected, 1.0, 1e-12);

  EXPECT_DOUBLE_EQ(pfaffian(SkewMatrix<double>(0)), 1.0);
  EXPECT_DOUBLE_EQ(pfaffian(SkewMatrix<double>(4)), 0.0);
  EXPECT_THROW(pfaffian(SkewMatrix<double>(3)), std::invalid_argument);
  SkewMatrix<double> diag(2);
  EXPECT_THROW(diag.set(1, 1, 1.0), std::invalid_argument);
  EXPECT_THROW(diag.set(0, 2, 1.0), std::out_of_range);
}

TEST(Pfaffian, SquaredIsDeterminant) {
  std::mt19937 gen(2718);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t dim : {6u, 8u}) {
    SkewMatrix<double> a(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      for (std::size_t j = i + 1; j < dim; ++j) a.set(i, j, u(gen));
    }
    std::vector<std::vector<double>> dense(dim, std::vector<double>(dim));
    for (std::size_t i = 0; i < dim; ++i) {
      for (std::size_t j = 0; j < dim; ++j) dense[i][j] = a.at(i, j);
    }
    const double pf = pfaffian(a);
    EXPECT_NEAR(pf * pf / lu_det(dense), 1.0, 1e-9) << "dim=" << dim;
  }

  SkewMatrix<C> ac(6);
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = i + 1; j < 6; ++j) ac.set(i, j, C(u(gen), u(gen)));
  }
  std::vector<std::vector<C>> dc(6, std::vector<C>(6));
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 6; ++j) dc[i][j] = ac.at(i, j);
  }
  const C pfc = pfaffian(ac);
  EXPECT_NEAR(std::abs(pfc * pfc / lu_det(dc) - 1.0), 0.0, 1e-9);
}

TEST(Energy, HalfplaneValueConsistencyAndSign) {
  const auto h = Geometry::halfplane();
  EXPECT_NEAR(predict_energy(h, C(0.0, 1.0), Boundary::plus),
              0.2250790790392765, 1e-13);
  for (double t : {0.4, 1.0, 3.0}) {
    const C a(0.7, t);
    EXPECT_DOUBLE_EQ(predict_energy(h, a, Boundary::plus),
                     hyperbolic_metric(h, a) / (std::numbers::sqrt2 * M_PI));
    EXPECT_NEAR(predict_energy(h, a, Boundary::plus),
                1.0 / (std::numbers::sqrt2 * M_PI * t), 1e-13);
    EXPECT_DOUBLE_EQ(predict_energy(h, a, Boundary::free_),
                     -predict_energy(h, a, Boundary::plus));
  }
  EXPECT_THROW(predict_energy(h, C(0.0, 0.0), Boundary::plus),
               std::domain_error);
}

TEST(Energy, RectangleApproachesHalfplaneNearBottom) {
  const double k = 0.6;
  const auto ep = elliptic_K(k);
  const auto rect = Geometry::rectangle(k);
  const auto h = Geometry::halfplane();
  const C a(0.0, 0.01 * ep.Kp);
  const double ratio = predict_energy(rect, a, Boundary::plus) /
                       predict_energy(h, a, Boundary::plus);
  EXPECT_NEAR(ratio, 1.0, 0.01);
}

TEST(Energy, MultiPointPfaffianStructure) {
  // One point: exact density, translation invariant.
  for (double t : {0.5, 2.0}) {
    for (double x : {0.0, -3.2, 11.0}) {
      EXPECT_NEAR(predict_multi_energy_halfplane({C(x, t)}),
                  1.0 / (std::numbers::sqrt2 * M_PI * t), 1e-13);
    }
  }

  // Two points: expanding the 4x4 Pfaffian by hand gives
  // (2/pi^2) [ 1/(4 t1 t2) + 1/|a1-a2|^2 - 1/|a1-conj(a2)|^2 ].
  auto hand_two = [](C a1, C a2) {
    return (2.0 / (M_PI * M_PI)) *
           (1.0 / (4.0 * a1.imag() * a2.imag()) +
            1.0 / std::norm(a1 - a2) - 1.0 / std::norm(a1 - std::conj(a2)));
  };
  for (auto [a1, a2] : {std::pair{C(0.0, 0.7), C(0.9, 1.1)},
                        std::pair{C(-1.3, 0.4), C(0.2, 2.0)}}) {
    EXPECT_NEAR(predict_multi_energy_halfplane({a1, a2}) / hand_two(a1, a2),
                1.0, 1e-12);
    EXPECT_GT(predict_multi_energy_halfplane({a1, a2}), 0.0);
  }

  // Reality of the complex Pfaffian product, reconstructed via public ops.
  std::mt19937 gen(5);
  std::uniform_real_distribution<double> ux(-2.0, 2.0), ut(0.5, 2.0);
  for (int rep = 0; rep < 5; ++rep) {
    const std::size_t n = 3;
    std::vector<C> pts;
    for (std::size_t i = 0; i < n; ++i) pts.emplace_back(ux(gen), ut(gen));
    SkewMatrix<C> km(2 * n);
    std::vector<C> p;
    for (const auto& a : pts) {
      p.push_back(a);
      p.push_back(std::conj(a));
    }
    for (std::size_t i = 0; i < 2 * n; ++i) {
      for (std::size_t j = i + 1; j < 2 * n; ++j) {
        km.set(i, j, 1.0 / (p[i] - p[j]));
      }
    }
    C pref{1.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      pref *= C(0.0, std::numbers::sqrt2 / M_PI);
    }
    const C value = pref * pfaffian(km);
    EXPECT_NEAR(value.imag(), 0.0, 1e-10);
    EXPECT_NEAR(predict_multi_energy_halfplane(pts), value.real(), 1e-12);
  }

  // Wide separation factorizes.
  {
    const double sep = 100.0 * 1.3;
    const C a1(0.0, 0.7), a2(sep, 1.3);
    const double joint = predict_multi_energy_halfplane({a1, a2});
    const double prod = predict_multi_energy_halfplane({a1}) *
                        predict_multi_energy_halfplane({a2});
    EXPECT_NEAR(joint / prod, 1.0, 0.01);
    const C a3(2.0 * sep, 0.9);
    const double joint3 = predict_multi_energy_halfplane({a1, a2, a3});
    EXPECT_NEAR(joint3 / (prod * predict_multi_energy_halfplane({a3})), 1.0,
                0.01);
  }

  EXPECT_THROW(predict_multi_energy_halfplane({}), std::invalid_argument);
  EXPECT_THROW(predict_multi_energy_halfplane({C(0.0, 1.0), C(0.0, 1.0)}),
               std::invalid_argument);
  EXPECT_THROW(predict_multi_energy_halfplane({C(0.0, -1.0)}),
               std::invalid_argument);
}

TEST(Spins, OnePointValue) {
  const double c_amp = std::sqrt(spin_amplitude_sq());
  EXPECT_NEAR(predict_spins_halfplane({C(0.0, 2.0)}, Boundary::plus), c_amp,
              1e-14);
  EXPECT_NEAR(c_amp, 0.87580, 5e-5);
  EXPECT_NEAR(predict_spins_halfplane({C(4.2, 2.0)}, Boundary::plus), c_amp,
              1e-14);
  EXPECT_NEAR(predict_spins_halfplane({C(0.0, 8.0)}, Boundary::plus),
              c_amp * std::pow(2.0, -0.25), 1e-14);
}

TEST(Spins, TwoPointFormsClusteringAndOrdering) {
  const double c2 = spin_amplitude_sq();
  const C a1(0.0, 0.8), a2(1.7, 1.4);
  const double dx = a1.real() - a2.real();
  const double r = (dx * dx + std::pow(a1.imag() - a2.imag(), 2)) /
                   (dx * dx + std::pow(a1.imag() + a2.imag(), 2));
  const double x_big = std::pow(r, -0.25);
  const double scale = c2 * std::pow(2.0 / a1.imag(), 0.125) *
                       std::pow(2.0 / a2.imag(), 0.125);
  EXPECT_NEAR(predict_spins_halfplane({a1, a2}, Boundary::plus),
              scale * std::sqrt((x_big + 1.0 / x_big) / 2.0), 1e-12);
  EXPECT_NEAR(predict_spins_halfplane({a1, a2}, Boundary::free_),
              scale * std::sqrt((x_big - 1.0 / x_big) / 2.0), 1e-12);

  // Far-separated spins factorize into one-point values.
  const C b1(0.0, 0.8), b2(2000.0, 1.4);
  const double joint = predict_spins_halfplane({b1, b2}, Boundary::plus);
  const double prod = predict_spins_halfplane({b1}, Boundary::plus) *
                      predict_spins_halfplane({b2}, Boundary::plus);
  EXPECT_NEAR(joint / prod, 1.0, 1e-6);

  std::mt19937 gen(99);
  std::uniform_real_distribution<double> ux(-3.0, 3.0), ut(0.1, 3.0);
  for (int i = 0; i < 100; ++i) {
    const C p1(ux(gen), ut(gen)), p2(ux(gen), ut(gen));
    if (p1 == p2) continue;
    EXPECT_LT(predict_spins_halfplane({p1, p2}, Boundary::free_),
              predict_spins_halfplane({p1, p2}, Boundary::plus));
  }

  EXPECT_THROW(predict_spins_halfplane({a1}, Boundary::free_),
               std::invalid_argument);
  EXPECT_THROW(predict_spins_halfplane({a1, a2, C(3.0, 1.0)}, Boundary::free_),
               std::invalid_argument);
  EXPECT_THROW(predict_spins_halfplane({a1, a1}, Boundary::plus),
               std::invalid_argument);
  EXPECT_THROW(predict_spins_halfplane({C(0.0, 0.0)}, Boundary::plus),
               std::invalid_argument);
}

TEST(Spins, ThreePointClusteringAndExchange) {
  const std::vector<C> far{C(0.0, 0.9), C(500.0, 1.2), C(1100.0, 0.6)};
  double prod = 1.0;
  for (const auto& a : far) {
    prod *= predict_spins_halfplane({a}, Boundary::plus);
  }
  EXPECT_NEAR(predict_spins_halfplane(far, Boundary::plus) / prod, 1.0, 1e-6);

  const std::vector<C> pts{C(0.0, 0.9), C(1.0, 1.2), C(-0.5, 0.6)};
  const std::vector<C> perm{pts[2], pts[0], pts[1]};
  EXPECT_DOUBLE_EQ(predict_spins_halfplane(pts, Boundary::plus),
                   predict_spins_halfplane(perm, Boundary::plus));
}

TEST(RectangleSpins, CornerTrigParityAndGates) {
  EXPECT_NEAR(predict_rectangle_spin_ratio({C(1e-6, 1e-6)}, 0.5), 1.0, 1e-9);

  const C z(0.3, 0.2);
  EXPECT_NEAR(predict_rectangle_spin_ratio({z}, 1e-6), std::abs(std::cos(z)),
              1e-9);

  const double k = 0.7;
  EXPECT_NEAR(predict_rectangle_spin_ratio({C(0.4, 0.5)}, k),
              predict_rectangle_spin_ratio({C(-0.4, 0.5)}, k), 1e-14);

  const double single1 = predict_rectangle_spin_ratio({C(0.4, 0.5)}, k);
  const double single2 = predict_rectangle_spin_ratio({C(-0.1, 0.9)}, k);
  EXPECT_NEAR(predict_rectangle_spin_ratio({C(0.4, 0.5), C(-0.1, 0.9)}, k),
              single1 * single2, 1e-13);

  const auto ep = elliptic_K(k);
  EXPECT_THROW(predict_rectangle_spin_ratio({C(1.1 * ep.K, 0.5)}, k),
               std::domain_error);
  EXPECT_THROW(predict_rectangle_spin_ratio({C(0.0, -0.1)}, k),
               std::domain_error);
  EXPECT_THROW(predict_rectangle_spin_ratio({C(0.0, 1.1 * ep.Kp)}, k),
               std::domain_error);
  EXPECT_THROW(predict_rectangle_spin_ratio({C(0.1, 0.1)}, 1.5),
               std::invalid_argument);
}

TEST(Fullplane, SpinAsymptoticHook) {
  for (std::size_t m : {1u, 4u, 8u}) {
    EXPECT_NEAR(predict_fullplane_spin(static_cast<double>(m)) /
                    critical_prediction(m),
                1.0, 1e-15);
  }
  EXPECT_NEAR(predict_fullplane_spin(0.5), spin_amplitude_sq(), 1e-15);
  EXPECT_THROW(predict_fullplane_spin(0.0), std::invalid_argument);
  EXPECT_THROW(predict_fullplane_spin(-2.0), std::invalid_argument);
}

}  // namespace
