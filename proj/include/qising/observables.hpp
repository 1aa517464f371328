#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "qising/sampler.hpp"

namespace qising {

struct SpacePoint {
  int col = 0;   // primal column index
  double y = 0.0;
};

inline int spin_at(const SpaceTimeConfig& cfg, int col, double y) {
  if (col < 0 || col >= cfg.dom.width)
    throw std::out_of_range("spin_at: column outside domain");
  if (!(y > 0.0 && y < cfg.dom.height))
    throw std::out_of_range("spin_at: height outside (0,T)");
  const auto& c = cfg.cols[col];
  auto it = std::lower_bound(c.deaths.begin(), c.deaths.end(), y);
  if (it != c.deaths.end() && *it == y)
    throw std::domain_error("spin_at: probe height hits a death point");
  return c.spins[it - c.deaths.begin()];
}

inline double spin_product(const SpaceTimeConfig& cfg,
                           const std::vector<SpacePoint>& pts) {
  int prod = 1;
  for (const auto& pt : pts) prod *= spin_at(cfg, pt.col, pt.y);
  return static_cast<double>(prod);
}

// sigma_a * sigma_{a+2delta}: the energy density variable; its critical
// full-plane mean 1/sqrt(2) is subtracted by downstream consumers.
inline double energy_pair(const SpaceTimeConfig& cfg, const SpacePoint& a) {
  return spin_product(cfg, {a, {a.col + 1, a.y}});
}

// E[prod sigma] for a pair as same-cluster probability; valid because
// unlinked clusters recolor independently and the ghost cluster is +1.
inline double pair_connected(const SpaceTimeConfig& cfg, const Clustering& cl,
                             const SpacePoint& a, const SpacePoint& b) {
  (void)spin_at(cfg, a.col, a.y);  // reuse domain checks
  (void)spin_at(cfg, b.col, b.y);
  return cl.connected(cl.interval_id(cfg, a.col, a.y),
                      cl.interval_id(cfg, b.col, b.y))
             ? 1.0
             : 0.0;
}

struct SeriesStats {
  double mean = 0.0;
  double stderr_ = 0.0;
  double tau_int = 0.5;   // integrated autocorrelation time, sweeps
  std::size_t n = 0;
};

// Batch-means error bar plus an integrated autocorrelation time from the
// initial-positive-sequence truncation of lag-pair sums.
inline SeriesStats batch_stats(const std::vector<double>& xs, int n_batches) {
  if (n_batches < 2) throw std::invalid_argument("batch_stats: need >= 2 batches");
  if (xs.size() < 2 * static_cast<std::size_t>(n_batches))
    throw std::invalid_argument("batch_stats: need at least 2 samples per batch");
  SeriesStats st;
  st.n = xs.size();
  const std::size_t n = xs.size();
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(n);
  st.mean = mean;

  const std::size_t bl = n / n_batches;          // batch length, remainder dropped
  const std::size_t used = bl * n_batches;
  double bvar = 0.0, bmean = 0.0;
  std::vector<double> bm(n_batches, 0.0);
  for (int b = 0; b < n_batches; ++b) {
    double s = 0.0;
    for (std::size_t i = b * bl; i < (b + 1) * bl; ++i) s += xs[i];
    bm[b] = s / static_cast<double>(bl);
    bmean += bm[b];
  }
  bmean /= n_batches;
  for (double v : bm) bvar += (v - bmean) * (v - bmean);
  bvar /= (n_batches - 1);
  st.stderr_ = std::sqrt(bvar / n_batches);
  (void)used;

  // autocovariances on the full series
  std::vector<double> c(std::min<std::size_t>(n - 1, n / 2 + 2), 0.0);
  for (std::size_t lag = 0; lag < c.size(); ++lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i)
      s += (xs[i] - mean) * (xs[i + lag] - mean);
    c[lag] = s / static_cast<double>(n);
  }
  if (c[0] <= 0.0) {  // constant series
    st.stderr_ = 0.0;
    st.tau_int = 0.5;
    return st;
  }
  double two_tau = 1.0;  // 2*tau = 1 + 2 sum rho_k via positive pair sums
  for (std::size_t k = 1; k + 1 < c.size(); k += 2) {
    double pair = c[k] + c[k + 1];
    if (pair <= 0.0) break;
    two_tau += 2.0 * pair / c[0];
  }
  st.tau_int = std::max(0.5, two_tau / 2.0);
  return st;
}

}  // namespace qising
