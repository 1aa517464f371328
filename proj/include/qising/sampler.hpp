#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>
#include <vector>

#include "qising/lattice.hpp"
#include "qising/rng.hpp"

namespace qising {

// Piecewise-constant spin function on one primal line: spins[k] lives on
// (deaths[k-1], deaths[k]) with deaths[-1] = 0, deaths[n] = T implied.
struct Column {
  std::vector<double> deaths;   // strictly increasing, inside (0, T)
  std::vector<int8_t> spins;    // size deaths.size() + 1, values +-1
};

// Bridges are stored per dual line d = 0..W; line d separates primal d-1
// and d (d = 0 and d = W flank the boundary and couple to the plus ghost).
struct SpaceTimeConfig {
  SemiDiscreteDomain dom;
  ModelParams params;
  std::vector<Column> cols;
  std::vector<std::vector<double>> bridges;
  bool has_bridges = false;
};

enum class InitMode { all_plus, random };

// Sorted Poisson(rate) points on (a, b); rate 0 gives the empty set.
inline std::vector<double> sample_poisson(CounterRng& rng, double rate, double a,
                                          double b) {
  return rng.poisson_points(rate, a, b);
}

// Interval partition of a config plus a union-find snapshot over it.
// Interval ids are offset[col] + k; ghost() is the extra plus-boundary node.
class Clustering {
 public:
  std::vector<int> offset;   // per column, plus one past-the-end entry
  std::vector<int> parent;   // union-find forest, ghost node last
  bool has_ghost = false;

  int ghost() const { return static_cast<int>(parent.size()) - 1; }

  int find(int i) const {
    while (parent[i] != i) i = parent[i];
    return i;
  }

  int interval_id(const SpaceTimeConfig& cfg, int col, double y) const {
    const auto& d = cfg.cols[col].deaths;
    int k = static_cast<int>(std::upper_bound(d.begin(), d.end(), y) - d.begin());
    return offset[col] + k;
  }

  bool connected(int id_a, int id_b) const { return find(id_a) == find(id_b); }
};

namespace detail {

inline void uf_union(std::vector<int>& parent, int a, int b) {
  while (parent[a] != a) a = parent[a] = parent[parent[a]];
  while (parent[b] != b) b = parent[b] = parent[parent[b]];
  if (a != b) parent[std::max(a, b)] = std::min(a, b);
}

// Maximal sub-segments of (0, T) where the two spin functions agree.
// Either side may be the solid +1 ghost (pass nullptr).
inline std::vector<std::pair<double, double>> agreement_segments(
    const Column* left, const Column* right, double T) {
  std::vector<std::pair<double, double>> segs;
  size_t il = 0, ir = 0;
  double y = 0.0;
  double open = -1.0;
  while (y < T) {
    double next = T;
    if (left && il < left->deaths.size()) next = std::min(next, left->deaths[il]);
    if (right && ir < right->deaths.size()) next = std::min(next, right->deaths[ir]);
    int sl = left ? left->spins[il] : 1;
    int sr = right ? right->spins[ir] : 1;
    if (sl == sr) {
      if (open < 0.0) open = y;
    } else if (open >= 0.0) {
      segs.emplace_back(open, y);
      open = -1.0;
    }
    if (left && il < left->deaths.size() && left->deaths[il] == next) ++il;
    if (right && ir < right->deaths.size() && right->deaths[ir] == next) ++ir;
    y = next;
  }
  if (open >= 0.0) segs.emplace_back(open, T);
  return segs;
}

}  // namespace detail

inline SpaceTimeConfig init(const SemiDiscreteDomain& dom, const ModelParams& p,
                            InitMode mode, std::uint64_t seed = 0,
                            std::uint64_t chain = 0) {
  SpaceTimeConfig cfg;
  cfg.dom = dom;
  cfg.params = p;
  cfg.cols.resize(dom.width);
  cfg.bridges.assign(dom.width + 1, {});
  if (mode == InitMode::all_plus) {
    for (auto& c : cfg.cols) c.spins.assign(1, 1);
    return cfg;
  }
  CounterRng rng(seed, chain, 0);
  for (auto& c : cfg.cols) {
    c.deaths = rng.poisson_points(p.tau, 0.0, dom.height);
    c.spins.resize(c.deaths.size() + 1);
    for (auto& s : c.spins) s = rng.uniform() < 0.5 ? int8_t{1} : int8_t{-1};
    if (dom.bc == Boundary::plus) {
      c.spins.front() = 1;
      c.spins.back() = 1;
    }
  }
  return cfg;
}

// Gibbs move for the death layer given the spin function: mandatory deaths at
// sign changes, superposed with a fresh Poisson(tau) field. The spin function
// is unchanged, so stored bridges stay compatible.
inline void resample_deaths(SpaceTimeConfig& cfg, CounterRng& rng) {
  const double T = cfg.dom.height;
  if (cfg.params.tau < 0.0) throw std::invalid_argument("resample_deaths: negative rate");
  for (auto& c : cfg.cols) {
    std::vector<double> forced;
    for (size_t k = 0; k + 1 < c.spins.size(); ++k)
      if (c.spins[k] != c.spins[k + 1]) forced.push_back(c.deaths[k]);
    std::vector<double> fresh = rng.poisson_points(cfg.params.tau, 0.0, T);
    std::vector<double> nd;
    nd.reserve(forced.size() + fresh.size());
    std::merge(forced.begin(), forced.end(), fresh.begin(), fresh.end(),
               std::back_inserter(nd));
    nd.erase(std::unique(nd.begin(), nd.end()), nd.end());
    std::vector<int8_t> ns(nd.size() + 1);
    size_t old_k = 0;
    for (size_t k = 0; k < ns.size(); ++k) {
      double probe = (k < nd.size() ? nd[k] : T);
      // spin on (prev, probe): locate in the old partition by the midpoint
      double lo = (k == 0 ? 0.0 : nd[k - 1]);
      double mid = 0.5 * (lo + probe);
      while (old_k < c.deaths.size() && c.deaths[old_k] <= mid) ++old_k;
      ns[k] = c.spins[old_k];
    }
    c.deaths = std::move(nd);
    c.spins = std::move(ns);
  }
  cfg.has_bridges = false;
}

// Swendsen-Wang style move: draw bridges as Poisson(theta) on agreement
// segments of every dual line, cluster intervals across bridges, recolor
// clusters uniformly. Plus boundary: the ghost swallows both flanking dual
// lines and the first/last interval of every column, and keeps color +1.
inline Clustering cluster_update(SpaceTimeConfig& cfg, CounterRng& rng,
                                 bool keep_bridges = false) {
  const int W = cfg.dom.width;
  const double T = cfg.dom.height;
  const bool plus = cfg.dom.bc == Boundary::plus;
  if (cfg.params.theta < 0.0) throw std::invalid_argument("cluster_update: negative rate");

  Clustering cl;
  cl.offset.resize(W + 1);
  int total = 0;
  for (int i = 0; i < W; ++i) {
    cl.offset[i] = total;
    total += static_cast<int>(cfg.cols[i].spins.size());
  }
  cl.offset[W] = total;
  cl.has_ghost = plus;
  cl.parent.resize(total + 1);  // ghost node always allocated, used iff plus
  std::iota(cl.parent.begin(), cl.parent.end(), 0);
  const int ghost = total;

  std::vector<std::vector<double>> fresh(W + 1);
  for (int d = 0; d <= W; ++d) {
    const Column* left = (d > 0) ? &cfg.cols[d - 1] : nullptr;
    const Column* right = (d < W) ? &cfg.cols[d] : nullptr;
    if ((!left || !right) && !plus) continue;  // boundary dual, nothing to couple
    auto segs = detail::agreement_segments(left, right, T);
    auto& out = fresh[d];
    for (auto [a, b] : segs) {
      auto pts = rng.poisson_points(cfg.params.theta, a, b);
      out.insert(out.end(), pts.begin(), pts.end());
    }
    for (double y : out) {
      int ida = left ? cl.interval_id(cfg, d - 1, y) : ghost;
      int idb = right ? cl.interval_id(cfg, d, y) : ghost;
      detail::uf_union(cl.parent, ida, idb);
    }
  }
  if (plus) {
    for (int i = 0; i < W; ++i) {
      detail::uf_union(cl.parent, ghost, cl.offset[i]);
      detail::uf_union(cl.parent, ghost, cl.offset[i + 1] - 1);
    }
  }
  // flatten the forest so find() is cheap for callers holding the snapshot
  for (int i = 0; i <= total; ++i) cl.parent[i] = cl.find(i);

  std::vector<int8_t> color(total + 1, 1);
  for (int i = 0; i < total; ++i)
    if (cl.parent[i] == i) color[i] = rng.uniform() < 0.5 ? int8_t{1} : int8_t{-1};
  if (plus) color[cl.parent[ghost]] = 1;
  for (int i = 0; i < W; ++i) {
    auto& c = cfg.cols[i];
    for (size_t k = 0; k < c.spins.size(); ++k)
      c.spins[k] = color[cl.parent[cl.offset[i] + static_cast<int>(k)]];
  }
  if (keep_bridges) {
    cfg.bridges = std::move(fresh);
    cfg.has_bridges = true;
  } else {
    cfg.has_bridges = false;
  }
  return cl;
}

// Structural checks: sorted interior deaths, matched spin counts, plus-bc
// forcing, and (when present) bridge endpoints inside agreement regions.
inline void check_compatibility(const SpaceTimeConfig& cfg) {
  const double T = cfg.dom.height;
  auto fail = [](const char* m) { throw std::logic_error(m); };
  if (static_cast<int>(cfg.cols.size()) != cfg.dom.width)
    fail("config: column count mismatch");
  for (const auto& c : cfg.cols) {
    if (c.spins.size() != c.deaths.size() + 1) fail("config: spin/death count mismatch");
    double prev = 0.0;
    for (double d : c.deaths) {
      if (!(d > prev && d < T)) fail("config: deaths not increasing inside (0,T)");
      prev = d;
    }
    for (auto s : c.spins)
      if (s != 1 && s != -1) fail("config: spin not +-1");
    if (cfg.dom.bc == Boundary::plus && (c.spins.front() != 1 || c.spins.back() != 1))
      fail("config: plus boundary interval not +1");
  }
  if (cfg.has_bridges) {
    const int W = cfg.dom.width;
    if (static_cast<int>(cfg.bridges.size()) != W + 1) fail("config: bridge line count");
    for (int d = 0; d <= W; ++d) {
      for (double y : cfg.bridges[d]) {
        if (!(y > 0.0 && y < T)) fail("config: bridge outside (0,T)");
        int sl = 1, sr = 1;
        if (d > 0) {
          const auto& c = cfg.cols[d - 1];
          sl = c.spins[std::upper_bound(c.deaths.begin(), c.deaths.end(), y) -
                       c.deaths.begin()];
        }
        if (d < W) {
          const auto& c = cfg.cols[d];
          sr = c.spins[std::upper_bound(c.deaths.begin(), c.deaths.end(), y) -
                       c.deaths.begin()];
        }
        if (sl != sr) fail("config: bridge across disagreeing spins");
      }
    }
  }
}

struct ChainOptions {
  std::uint64_t seed = 1;
  int chains = 1;
  int sweeps = 1000;     // post burn-in sweeps per chain
  int burn_in = 100;
  int thin = 1;          // record every thin-th sweep
  InitMode start = InitMode::all_plus;
  int threads = 0;       // 0: decide from QISING_THREADS / hardware
};

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("QISING_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc ? static_cast<int>(hc) : 1;
}

// Runs chains of (resample_deaths, cluster_update) sweeps and records the
// observable on the thinned schedule. Results are concatenated in chain
// order, so output is independent of the thread count.
template <typename Obs>
std::vector<double> run_chain(const SemiDiscreteDomain& dom, const ModelParams& p,
                              const ChainOptions& opt, Obs&& observable) {
  if (opt.chains < 1 || opt.sweeps < 1 || opt.thin < 1 || opt.burn_in < 0)
    throw std::invalid_argument("run_chain: bad chain options");
  const int per_chain = opt.sweeps / opt.thin;
  if (per_chain == 0) throw std::invalid_argument("run_chain: no post burn-in samples");

  std::vector<std::vector<double>> results(opt.chains);
  std::exception_ptr error;
  std::mutex error_mu;

  auto body = [&](int chain) {
    try {
      SpaceTimeConfig cfg = init(dom, p, opt.start, opt.seed, chain);
      auto& out = results[chain];
      out.reserve(per_chain);
      const int total_sweeps = opt.burn_in + opt.sweeps;
      for (int s = 1; s <= total_sweeps; ++s) {
        CounterRng rng(opt.seed, chain, s);
        resample_deaths(cfg, rng);
        Clustering cl = cluster_update(cfg, rng);
        check_compatibility(cfg);
        int done = s - opt.burn_in;
        if (done > 0 && done % opt.thin == 0) out.push_back(observable(cfg, cl));
      }
    } catch (...) {
      std::lock_guard<std::mutex> lk(error_mu);
      if (!error) error = std::current_exception();
    }
  };

  int nthreads = std::min(resolve_threads(opt.threads), opt.chains);
  if (nthreads <= 1) {
    for (int c = 0; c < opt.chains; ++c) body(c);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int t = 0; t < nthreads; ++t)
      pool.emplace_back([&] {
        for (int c = next.fetch_add(1); c < opt.chains; c = next.fetch_add(1)) body(c);
      });
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);

  std::vector<double> merged;
  merged.reserve(static_cast<size_t>(opt.chains) * per_chain);
  for (auto& r : results) merged.insert(merged.end(), r.begin(), r.end());
  return merged;
}

// ---- flattened (nearest-neighbor grid) sampler ----

struct FlattenedState {
  FlattenedLattice lat;
  std::vector<int8_t> spins;  // row-major, index = y * nx + x
};

inline FlattenedState flattened_init(const FlattenedLattice& lat, InitMode mode,
                                     std::uint64_t seed = 0, std::uint64_t chain = 0) {
  FlattenedState st;
  st.lat = lat;
  st.spins.assign(static_cast<size_t>(lat.nx) * lat.ny, 1);
  if (mode == InitMode::random) {
    CounterRng rng(seed, chain, 0);
    for (auto& s : st.spins) s = rng.uniform() < 0.5 ? int8_t{1} : int8_t{-1};
  }
  return st;
}

// One Swendsen-Wang sweep; returns the union-find forest (ghost node last)
// so callers can read off cluster connectivities. Plus boundary couples
// every edge site to the ghost with the matching coupling.
inline std::vector<int> flattened_sw_step(FlattenedState& st, CounterRng& rng) {
  const int nx = st.lat.nx, ny = st.lat.ny;
  const int n = nx * ny;
  const bool plus = st.lat.bc == Boundary::plus;
  const std::uint64_t thr_h = CounterRng::threshold(-std::expm1(-2.0 * st.lat.Jh));
  const std::uint64_t thr_v = CounterRng::threshold(-std::expm1(-2.0 * st.lat.Jv));

  std::vector<int> parent(n + 1);
  std::iota(parent.begin(), parent.end(), 0);
  const int ghost = n;
  auto& sp = st.spins;

  for (int y = 0; y < ny; ++y) {
    const int row = y * nx;
    for (int x = 0; x < nx; ++x) {
      const int i = row + x;
      if (x + 1 < nx && sp[i] == sp[i + 1] && rng.next_u64() < thr_h)
        detail::uf_union(parent, i, i + 1);
      if (y + 1 < ny && sp[i] == sp[i + nx] && rng.next_u64() < thr_v)
        detail::uf_union(parent, i, i + nx);
      if (plus) {
        if ((x == 0 || x == nx - 1) && sp[i] == 1 && rng.next_u64() < thr_h)
          detail::uf_union(parent, i, ghost);
        if ((y == 0 || y == ny - 1) && sp[i] == 1 && rng.next_u64() < thr_v)
          detail::uf_union(parent, i, ghost);
      }
    }
  }
  for (int i = 0; i <= n; ++i) {
    int r = i;
    while (parent[r] != r) r = parent[r];
    parent[i] = r;
  }
  std::vector<int8_t> color(n + 1, 1);
  for (int i = 0; i < n; ++i)
    if (parent[i] == i) color[i] = rng.uniform() < 0.5 ? int8_t{1} : int8_t{-1};
  if (plus) color[parent[ghost]] = 1;
  for (int i = 0; i < n; ++i) sp[i] = color[parent[i]];
  return parent;
}

// Flattened counterpart of run_chain: one sweep is one Swendsen-Wang step
// on the nearest-neighbor grid. Same chain seeding and chain-order merge,
// so the output is again independent of the thread count.
template <typename Obs>
std::vector<double> run_flattened(const FlattenedLattice& lat,
                                  const ChainOptions& opt, Obs&& observable) {
  if (opt.chains < 1 || opt.sweeps < 1 || opt.thin < 1 || opt.burn_in < 0)
    throw std::invalid_argument("run_flattened: bad chain options");
  const int per_chain = opt.sweeps / opt.thin;
  if (per_chain == 0)
    throw std::invalid_argument("run_flattened: no post burn-in samples");

  std::vector<std::vector<double>> results(opt.chains);
  std::exception_ptr error;
  std::mutex error_mu;

  auto body = [&](int chain) {
    try {
      FlattenedState st = flattened_init(lat, opt.start, opt.seed, chain);
      auto& out = results[chain];
      out.reserve(per_chain);
      const int total_sweeps = opt.burn_in + opt.sweeps;
      for (int s = 1; s <= total_sweeps; ++s) {
        CounterRng rng(opt.seed, chain, s);
        std::vector<int> parent = flattened_sw_step(st, rng);
        int done = s - opt.burn_in;
        if (done > 0 && done % opt.thin == 0)
          out.push_back(observable(st, parent));
      }
    } catch (...) {
      std::lock_guard<std::mutex> lk(error_mu);
      if (!error) error = std::current_exception();
    }
  };

  int nthreads = std::min(resolve_threads(opt.threads), opt.chains);
  if (nthreads <= 1) {
    for (int c = 0; c < opt.chains; ++c) body(c);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int t = 0; t < nthreads; ++t)
      pool.emplace_back([&] {
        for (int c = next.fetch_add(1); c < opt.chains; c = next.fetch_add(1))
          body(c);
      });
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);

  std::vector<double> merged;
  merged.reserve(static_cast<size_t>(opt.chains) * per_chain);
  for (auto& r : results) merged.insert(merged.end(), r.begin(), r.end());
  return merged;
}

// Exact Boltzmann expectation over all spin assignments; capped at 20 sites.
template <typename Obs>
double enumerate_flattened(const FlattenedLattice& lat, Obs&& observable) {
  const int n = lat.nx * lat.ny;
  if (n > 20) throw std::invalid_argument("enumerate_flattened: more than 20 sites");
  const bool plus = lat.bc == Boundary::plus;
  std::vector<int8_t> sp(n);
  long double Z = 0.0L, acc = 0.0L;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    for (int i = 0; i < n; ++i) sp[i] = (mask >> i) & 1 ? 1 : -1;
    long double E = 0.0L;
    for (int y = 0; y < lat.ny; ++y)
      for (int x = 0; x < lat.nx; ++x) {
        const int i = y * lat.nx + x;
        if (x + 1 < lat.nx) E += lat.Jh * sp[i] * sp[i + 1];
        if (y + 1 < lat.ny) E += lat.Jv * sp[i] * sp[i + lat.nx];
        if (plus) {
          if (x == 0) E += lat.Jh * sp[i];
          if (x == lat.nx - 1) E += lat.Jh * sp[i];
          if (y == 0) E += lat.Jv * sp[i];
          if (y == lat.ny - 1) E += lat.Jv * sp[i];
        }
      }
    long double w = std::exp(E);
    Z += w;
    acc += w * observable(sp);
  }
  return static_cast<double>(acc / Z);
}

}  // namespace qising
