#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <map>
#include <vector>

#include "qising/observables.hpp"
#include "qising/sampler.hpp"

using namespace qising;

namespace {

// Exact sign-pattern distribution at two probe rows of a 2-column flattened
// lattice with free boundary, by a normalized 4-state transfer matrix.
// State bit0: column 0 spin is +, bit1: column 1 spin is +.
std::array<double, 16> two_column_pattern_distribution(const FlattenedLattice& lat,
                                                       int row_a, int row_b) {
  auto spin = [](int s, int bit) { return (s >> bit) & 1 ? 1.0 : -1.0; };
  std::array<double, 4> R;
  std::array<std::array<double, 4>, 4> V, M;
  for (int s = 0; s < 4; ++s) {
    R[s] = std::exp(lat.Jh * spin(s, 0) * spin(s, 1));
    for (int t = 0; t < 4; ++t)
      V[s][t] = std::exp(lat.Jv * (spin(s, 0) * spin(t, 0) + spin(s, 1) * spin(t, 1)));
  }
  for (int s = 0; s < 4; ++s)
    for (int t = 0; t < 4; ++t) M[s][t] = V[s][t] * R[t];

  auto normalize4 = [](std::array<double, 4>& v) {
    double m = std::max({v[0], v[1], v[2], v[3]});
    for (auto& x : v) x /= m;
  };
  std::array<double, 4> fwd = R;
  normalize4(fwd);
  for (int r = 1; r <= row_a; ++r) {
    std::array<double, 4> nx{};
    for (int t = 0; t < 4; ++t)
      for (int s = 0; s < 4; ++s) nx[t] += fwd[s] * M[s][t];
    fwd = nx;
    normalize4(fwd);
  }
  std::array<double, 4> bwd{1.0, 1.0, 1.0, 1.0};
  for (int r = lat.ny - 2; r >= row_b; --r) {
    std::array<double, 4> nx{};
    for (int s = 0; s < 4; ++s)
      for (int t = 0; t < 4; ++t) nx[s] += M[s][t] * bwd[t];
    bwd = nx;
    normalize4(bwd);
  }
  // M^(row_b - row_a) with per-step normalization
  std::array<std::array<double, 4>, 4> P{};
  for (int s = 0; s < 4; ++s) P[s][s] = 1.0;
  for (int r = 0; r < row_b - row_a; ++r) {
    std::array<std::array<double, 4>, 4> nx{};
    double m = 0.0;
    for (int s = 0; s < 4; ++s)
      for (int t = 0; t < 4; ++t) {
        for (int u = 0; u < 4; ++u) nx[s][t] += P[s][u] * M[u][t];
        m = std::max(m, nx[s][t]);
      }
    for (auto& row : nx)
      for (auto& x : row) x /= m;
    P = nx;
  }
  std::array<double, 16> joint{};
  double Z = 0.0;
  for (int sa = 0; sa < 4; ++sa)
    for (int sb = 0; sb < 4; ++sb) {
      double w = fwd[sa] * P[sa][sb] * bwd[sb];
      joint[sa + 4 * sb] = w;
      Z += w;
    }
  for (auto& x : joint) x /= Z;
  return joint;
}

}  // namespace

TEST(Sampler, InitModes) {
  auto dom = build_domain(3, 2.0, Boundary::plus);
  auto p = make_params(1.0, 1.0, 1.0);
  auto cfg = init(dom, p, InitMode::all_plus);
  check_compatibility(cfg);
  for (const auto& c : cfg.cols) {
    EXPECT_TRUE(c.deaths.empty());
    EXPECT_EQ(c.spins.size(), 1u);
    EXPECT_EQ(c.spins[0], 1);
  }
  auto r = init(dom, p, InitMode::random, 9, 0);
  check_compatibility(r);  // plus forcing applied on first/last intervals
}

TEST(Sampler, SamplePoissonContract) {
  CounterRng rng(3, 0, 1);
  auto pts = sample_poisson(rng, 1.5, 0.0, 4.0);
  for (size_t i = 1; i < pts.size(); ++i) EXPECT_LT(pts[i - 1], pts[i]);
  EXPECT_TRUE(sample_poisson(rng, 0.0, 0.0, 4.0).empty());
  EXPECT_THROW(sample_poisson(rng, -1.0, 0.0, 4.0), std::invalid_argument);
}

TEST(Sampler, ResampleDeathsKeepsSpinFunction) {
  auto dom = build_domain(2, 3.0, Boundary::free_);
  ModelParams p{1.0, 1.5, 1.0};
  auto cfg = init(dom, p, InitMode::random, 17, 0);
  std::vector<double> probes{0.11, 0.42, 0.9, 1.3, 1.77, 2.2, 2.68, 2.95};
  std::vector<int> before;
  for (int c = 0; c < 2; ++c)
    for (double y : probes) before.push_back(spin_at(cfg, c, y));
  CounterRng rng(17, 0, 1);
  resample_deaths(cfg, rng);
  check_compatibility(cfg);
  std::vector<int> after;
  for (int c = 0; c < 2; ++c)
    for (double y : probes) after.push_back(spin_at(cfg, c, y));
  EXPECT_EQ(before, after);
}

TEST(Sampler, ResampleDeathsZeroRateLeavesOnlySignChanges) {
  auto dom = build_domain(1, 1.0, Boundary::free_);
  ModelParams p{1.0, 0.0, 1.0};  // tau = 0: no fresh deaths
  SpaceTimeConfig cfg;
  cfg.dom = dom;
  cfg.params = p;
  cfg.cols.resize(1);
  cfg.cols[0].deaths = {0.2, 0.5, 0.8};
  cfg.cols[0].spins = {1, -1, -1, 1};  // death at 0.5 carries no flip
  cfg.bridges.assign(2, {});
  CounterRng rng(1, 0, 1);
  resample_deaths(cfg, rng);
  ASSERT_EQ(cfg.cols[0].deaths.size(), 2u);
  EXPECT_DOUBLE_EQ(cfg.cols[0].deaths[0], 0.2);
  EXPECT_DOUBLE_EQ(cfg.cols[0].deaths[1], 0.8);
  EXPECT_EQ(cfg.cols[0].spins[0], 1);
  EXPECT_EQ(cfg.cols[0].spins[1], -1);
  EXPECT_EQ(cfg.cols[0].spins[2], 1);
}

TEST(Sampler, ClusterUpdateZeroBridgesRecolorsIndependently) {
  auto dom = build_domain(2, 1.0, Boundary::free_);
  ModelParams p{1.0, 1.0, 0.0};  // theta = 0: no bridges ever
  auto cfg = init(dom, p, InitMode::all_plus);
  std::map<std::pair<int, int>, int> freq;
  const int n = 8000;
  for (int s = 1; s <= n; ++s) {
    CounterRng rng(23, 0, s);
    cluster_update(cfg, rng);
    check_compatibility(cfg);
    ++freq[{cfg.cols[0].spins[0], cfg.cols[1].spins[0]}];
  }
  for (int a : {-1, 1})
    for (int b : {-1, 1}) {
      double f = freq[{a, b}] / static_cast<double>(n);
      EXPECT_NEAR(f, 0.25, 3.0 * std::sqrt(0.25 * 0.75 / n));
    }
}

TEST(Sampler, PlusBoundaryForcesGhostCluster) {
  auto dom = build_domain(1, 1.0, Boundary::plus);
  auto p = make_params(1.0, 1.0, 1.0);
  auto cfg = init(dom, p, InitMode::all_plus);
  for (int s = 1; s <= 200; ++s) {
    CounterRng rng(5, 0, s);
    resample_deaths(cfg, rng);
    auto cl = cluster_update(cfg, rng);
    check_compatibility(cfg);
    EXPECT_EQ(cfg.cols[0].spins.front(), 1);
    EXPECT_EQ(cfg.cols[0].spins.back(), 1);
    EXPECT_TRUE(cl.has_ghost);
  }
}

TEST(Sampler, BridgesRetainedOnlyWhenRequested) {
  auto dom = build_domain(3, 2.0, Boundary::free_);
  auto p = make_params(1.0, 1.0, 2.0);
  auto cfg = init(dom, p, InitMode::random, 31, 0);
  CounterRng rng(31, 0, 1);
  cluster_update(cfg, rng, /*keep_bridges=*/true);
  EXPECT_TRUE(cfg.has_bridges);
  check_compatibility(cfg);  // includes bridge/agreement consistency
  size_t total = 0;
  for (const auto& b : cfg.bridges) total += b.size();
  EXPECT_GT(total, 0u);
  CounterRng rng2(31, 0, 2);
  cluster_update(cfg, rng2);
  EXPECT_FALSE(cfg.has_bridges);
}

TEST(Sampler, CompatibilityViolationsThrow) {
  auto dom = build_domain(2, 1.0, Boundary::plus);
  auto p = make_params(1.0, 1.0, 1.0);
  auto good = init(dom, p, InitMode::all_plus);
  check_compatibility(good);

  auto bad1 = good;
  bad1.cols[0].spins = {1, 1};  // count mismatch
  EXPECT_THROW(check_compatibility(bad1), std::logic_error);

  auto bad2 = good;
  bad2.cols[0].deaths = {0.4};
  bad2.cols[0].spins = {-1, 1};  // plus bc violated at bottom
  EXPECT_THROW(check_compatibility(bad2), std::logic_error);

  auto bad3 = good;
  bad3.cols[0].deaths = {0.7, 0.3};  // unsorted
  bad3.cols[0].spins = {1, -1, 1};
  EXPECT_THROW(check_compatibility(bad3), std::logic_error);

  auto bad4 = good;
  bad4.cols[0].deaths = {0.5};
  bad4.cols[0].spins = {1, -1};
  bad4.cols[1].deaths = {};
  bad4.cols[1].spins = {1};
  bad4.bridges.assign(3, {});
  bad4.bridges[1] = {0.7};  // spans -1 (col 0 above 0.5) vs +1 (col 1)
  bad4.has_bridges = true;
  EXPECT_THROW(check_compatibility(bad4), std::logic_error);
}

TEST(Sampler, RunChainValidationAndDeterminism) {
  auto dom = build_domain(2, 1.0, Boundary::free_);
  auto p = make_params(1.0, 1.0, 1.0);
  ChainOptions opt;
  opt.seed = 77;
  opt.chains = 3;
  opt.sweeps = 50;
  opt.burn_in = 10;
  opt.thin = 2;

  auto obs = [](const SpaceTimeConfig& cfg, const Clustering&) {
    return spin_product(cfg, {{0, 0.5}});
  };
  auto a = run_chain(dom, p, opt, obs);
  auto b = run_chain(dom, p, opt, obs);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.size(), 3u * 25u);

  auto opt1 = opt;
  opt1.threads = 1;
  auto opt3 = opt;
  opt3.threads = 3;
  EXPECT_EQ(run_chain(dom, p, opt1, obs), run_chain(dom, p, opt3, obs));

  auto bad = opt;
  bad.sweeps = 1;
  bad.thin = 5;  // zero post burn-in samples
  EXPECT_THROW(run_chain(dom, p, bad, obs), std::invalid_argument);

  auto oob = [](const SpaceTimeConfig& cfg, const Clustering&) {
    return spin_product(cfg, {{9, 0.5}});
  };
  EXPECT_THROW(run_chain(dom, p, opt, oob), std::out_of_range);
}

TEST(Sampler, CriticalCenterEnergyMatchesFullPlaneValue) {
  // 32 x 32 physical box at the self-dual point, plus boundary. The exact
  // full-plane adjacent-column expectation at criticality is 2/pi (nearest
  // correlator of the critical quantum chain); the plus boundary adds a
  // positive O(1/L) shift, about +0.03 at this size by the metric law.
  auto p = make_params(0.5, 0.5, 1.0);
  auto dom = build_domain(32, 32.0, Boundary::plus, p.delta);
  ChainOptions opt;
  opt.seed = 4242;
  opt.chains = 2;
  opt.sweeps = 12000;
  opt.burn_in = 300;
  opt.thin = 4;
  SpacePoint a{15, 16.0}, b{16, 16.0};
  auto xs = run_chain(dom, p, opt, [&](const SpaceTimeConfig& cfg, const Clustering& cl) {
    return pair_connected(cfg, cl, a, b);
  });
  auto st = batch_stats(xs, 20);
  const double bulk = 2.0 / M_PI;
  EXPECT_GT(st.mean, bulk - 3.0 * st.stderr_);
  EXPECT_LT(st.mean, bulk + 0.045 + 3.0 * st.stderr_);
  EXPECT_GT(st.stderr_, 0.0);
}

TEST(Sampler, TwoColumnStationaryPatternMatchesTransferMatrix) {
  auto p = make_params(1.0, 1.0, 1.0);
  auto dom = build_domain(2, 1.0, Boundary::free_);
  const double eps = 1.0 / 128.0;
  auto lat = flatten(dom, p, eps);
  auto exact = two_column_pattern_distribution(lat, 32, 96);

  ChainOptions opt;
  opt.seed = 99;
  opt.chains = 2;
  opt.sweeps = 60000;
  opt.burn_in = 500;
  opt.thin = 1;
  auto xs = run_chain(dom, p, opt, [](const SpaceTimeConfig& cfg, const Clustering&) {
    int pat = 0;
    if (spin_at(cfg, 0, 0.25) > 0) pat |= 1;
    if (spin_at(cfg, 1, 0.25) > 0) pat |= 2;
    if (spin_at(cfg, 0, 0.75) > 0) pat |= 4;
    if (spin_at(cfg, 1, 0.75) > 0) pat |= 8;
    return static_cast<double>(pat);
  });
  std::array<double, 16> hist{};
  for (double x : xs) hist[static_cast<int>(x)] += 1.0;
  for (auto& h : hist) h /= static_cast<double>(xs.size());

  double tv = 0.0;
  for (int s = 0; s < 16; ++s) tv += std::abs(hist[s] - exact[s]);
  tv *= 0.5;
  EXPECT_LT(tv, 0.02);
}

TEST(Sampler, PlusDominatesFreeCorrelation) {
  auto p = make_params(0.5, 0.5, 1.0);
  auto dom_plus = build_domain(8, 8.0, Boundary::plus, p.delta);
  auto dom_free = build_domain(8, 8.0, Boundary::free_, p.delta);
  ChainOptions opt;
  opt.seed = 321;
  opt.chains = 2;
  opt.sweeps = 8000;
  opt.burn_in = 200;
  opt.thin = 2;
  SpacePoint a{3, 4.0}, b{4, 4.0};
  auto obs = [&](const SpaceTimeConfig& cfg, const Clustering& cl) {
    return pair_connected(cfg, cl, a, b);
  };
  auto plus = batch_stats(run_chain(dom_plus, p, opt, obs), 16);
  auto fr = batch_stats(run_chain(dom_free, p, opt, obs), 16);
  double sigma = std::hypot(plus.stderr_, fr.stderr_);
  EXPECT_GT(plus.mean - fr.mean, -3.0 * sigma);
}

TEST(Sampler, SelfDualDisorderMatchesMirroredSpin) {
  // At the self-dual point the dual model coincides with the primal one, so
  // the disorder two-point (spin two-point under dual_params) must agree with
  // the primal spin two-point at mirrored columns.
  auto p = make_params(0.5, 0.5, 1.0);
  ASSERT_TRUE(is_critical(p));
  auto dom = build_domain(10, 8.0, Boundary::free_, p.delta);
  ChainOptions opt;
  opt.seed = 654;
  opt.chains = 2;
  opt.sweeps = 10000;
  opt.burn_in = 200;
  opt.thin = 2;
  SpacePoint a{2, 4.0}, b{5, 4.0};
  SpacePoint am{10 - 1 - 5, 4.0}, bm{10 - 1 - 2, 4.0};
  auto dual = batch_stats(
      run_chain(dom, dual_params(p), opt,
                [&](const SpaceTimeConfig& cfg, const Clustering& cl) {
                  return pair_connected(cfg, cl, a, b);
                }),
      16);
  ChainOptions opt2 = opt;
  opt2.seed = 655;
  auto primal = batch_stats(
      run_chain(dom, p, opt2,
                [&](const SpaceTimeConfig& cfg, const Clustering& cl) {
                  return pair_connected(cfg, cl, am, bm);
                }),
      16);
  double sigma = std::hypot(dual.stderr_, primal.stderr_);
  EXPECT_NEAR(dual.mean, primal.mean, 3.0 * sigma);
}

TEST(Flattened, ZeroCouplingGivesIndependentUniformSpins) {
  FlattenedLattice lat;
  lat.nx = 4;
  lat.ny = 4;
  lat.eps = 1.0;
  lat.Jh = 0.0;
  lat.Jv = 0.0;
  lat.bc = Boundary::free_;
  auto st = flattened_init(lat, InitMode::all_plus);
  double m = 0.0, corr = 0.0;
  const int n = 20000;
  for (int s = 1; s <= n; ++s) {
    CounterRng rng(12, 0, s);
    flattened_sw_step(st, rng);
    m += st.spins[5];
    corr += st.spins[5] * st.spins[6];
  }
  EXPECT_NEAR(m / n, 0.0, 3.0 / std::sqrt(n));
  EXPECT_NEAR(corr / n, 0.0, 3.0 / std::sqrt(n));
}

TEST(Flattened, StrongCouplingFreezesSingleCluster) {
  FlattenedLattice lat;
  lat.nx = 5;
  lat.ny = 4;
  lat.eps = 1.0;
  lat.Jh = 20.0;
  lat.Jv = 20.0;
  lat.bc = Boundary::free_;
  auto st = flattened_init(lat, InitMode::all_plus);
  CounterRng rng(8, 0, 1);
  auto parent = flattened_sw_step(st, rng);
  for (int i = 1; i < lat.nx * lat.ny; ++i) EXPECT_EQ(parent[i], parent[0]);
  for (int i = 1; i < lat.nx * lat.ny; ++i) EXPECT_EQ(st.spins[i], st.spins[0]);
}

TEST(Flattened, TwoSiteAgreementProbabilityExact) {
  FlattenedLattice lat;
  lat.nx = 1;
  lat.ny = 2;
  lat.eps = 1.0;
  lat.Jh = 0.0;
  lat.Jv = 0.8;
  lat.bc = Boundary::free_;
  double p_agree = enumerate_flattened(lat, [](const std::vector<int8_t>& s) {
    return s[0] == s[1] ? 1.0 : 0.0;
  });
  EXPECT_NEAR(p_agree, 1.0 / (1.0 + std::exp(-2.0 * 0.8)), 1e-12);
}

TEST(Flattened, EnumerationCapAtTwentySites) {
  FlattenedLattice lat;
  lat.nx = 3;
  lat.ny = 7;
  lat.bc = Boundary::free_;
  EXPECT_THROW(enumerate_flattened(lat, [](const std::vector<int8_t>&) { return 0.0; }),
               std::invalid_argument);
}

TEST(Flattened, SwendsenWangMatchesEnumerationOnThreeByThree) {
  auto p = make_params(1.0, 0.5, 1.0);
  auto dom = build_domain(3, 0.9, Boundary::plus);
  auto lat = flatten(dom, p, 0.3);
  ASSERT_EQ(lat.ny, 3);

  double exact_mag = enumerate_flattened(
      lat, [](const std::vector<int8_t>& s) { return static_cast<double>(s[4]); });
  double exact_corr = enumerate_flattened(lat, [](const std::vector<int8_t>& s) {
    return static_cast<double>(s[4] * s[0]);
  });

  auto st = flattened_init(lat, InitMode::random, 2718, 0);
  const int burn = 500, n = 60000;
  std::vector<double> mags, corrs;
  mags.reserve(n);
  corrs.reserve(n);
  for (int s = 1; s <= burn + n; ++s) {
    CounterRng rng(2718, 0, s);
    flattened_sw_step(st, rng);
    if (s > burn) {
      mags.push_back(st.spins[4]);
      corrs.push_back(st.spins[4] * st.spins[0]);
    }
  }
  auto ms = batch_stats(mags, 30);
  auto cs = batch_stats(corrs, 30);
  EXPECT_NEAR(ms.mean, exact_mag, 3.0 * ms.stderr_);
  EXPECT_NEAR(cs.mean, exact_corr, 3.0 * cs.stderr_);
}
