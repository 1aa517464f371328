#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace qising {

// Rates of the space-time model on width-W column domains: deaths fall as
// Poisson(tau) on primal lines, bridges as Poisson(theta) on dual lines,
// and delta is half the primal column spacing (columns sit at x = 2*delta*i).
struct ModelParams {
  double delta = 1.0;
  double tau = 1.0;
  double theta = 1.0;
};

inline ModelParams make_params(double delta, double tau, double theta) {
  auto ok = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!ok(delta) || !ok(tau) || !ok(theta))
    throw std::invalid_argument("make_params: delta, tau, theta must be finite and > 0");
  return ModelParams{delta, tau, theta};
}

// (tau, theta) -> (theta/2, 2*tau); involutive, fixed line theta = 2*tau.
inline ModelParams dual_params(const ModelParams& p) {
  return ModelParams{p.delta, p.theta / 2.0, 2.0 * p.tau};
}

inline bool is_critical(const ModelParams& p) { return p.theta == 2.0 * p.tau; }

// theta_star = 2*tau is the dual bridge rate; the circle weights and the
// ladder recursions are parameterized by (theta, theta_star).
inline double theta_star_of(const ModelParams& p) { return 2.0 * p.tau; }

enum class Boundary { plus, free_ };

inline std::string to_string(Boundary b) {
  return b == Boundary::plus ? "plus" : "free";
}

// W primal columns at x = 2*delta*i, i = 0..W-1, flanked and separated by
// W+1 dual columns at x = -delta + 2*delta*i, i = 0..W. Heights run over (0, T).
struct SemiDiscreteDomain {
  int width = 1;       // primal column count
  double height = 1.0;  // T
  Boundary bc = Boundary::free_;
  double delta = 1.0;

  double primal_x(int i) const { return 2.0 * delta * i; }
  double dual_x(int i) const { return -delta + 2.0 * delta * i; }
  int dual_count() const { return width + 1; }
  int column_count() const { return 2 * width + 1; }
};

inline SemiDiscreteDomain build_domain(int width, double height, Boundary bc,
                                       double delta = 1.0) {
  if (width < 1 || !(height > 0.0) || !std::isfinite(height) ||
      !(delta > 0.0) || !std::isfinite(delta))
    throw std::invalid_argument("build_domain: need width >= 1, height > 0, delta > 0");
  return SemiDiscreteDomain{width, height, bc, delta};
}

// Nearest-neighbor anisotropic Ising approximation on an nx * ny grid with
// exact coupling identities e^{-2J_h} = 1 - theta*eps, e^{-2J_v} = tau*eps.
struct FlattenedLattice {
  int nx = 0;
  int ny = 0;
  double eps = 0.0;
  double Jh = 0.0;
  double Jv = 0.0;
  Boundary bc = Boundary::free_;
};

inline FlattenedLattice flatten(const SemiDiscreteDomain& dom,
                                const ModelParams& p, double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps))
    throw std::invalid_argument("flatten: eps must be finite and > 0");
  if (p.theta * eps >= 1.0)
    throw std::invalid_argument("flatten: requires theta*eps < 1");
  if (p.tau * eps >= 1.0)
    throw std::invalid_argument("flatten: requires tau*eps < 1");
  FlattenedLattice lat;
  lat.nx = dom.width;
  lat.ny = static_cast<int>(std::ceil(dom.height / eps));
  lat.eps = eps;
  lat.Jh = -0.5 * std::log1p(-p.theta * eps);
  lat.Jv = -0.5 * std::log(p.tau * eps);
  lat.bc = dom.bc;
  return lat;
}

}  // namespace qising
