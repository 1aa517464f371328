#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

namespace qising {

// Counter-based stream: every draw is a pure function of (seed, chain, sweep,
// draw index), so results do not depend on how work is scheduled across threads.
// Core block is Philox-2x64-10.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t chain, std::uint64_t sweep)
      : key_(mix64(mix64(seed) ^ (0xA24BAED4963EE407ull * (chain + 1)))),
        hi_(sweep) {}

  std::uint64_t next_u64() {
    if (have_) {
      have_ = false;
      return spare_;
    }
    auto [a, b] = block(key_, hi_, lo_++);
    spare_ = b;
    have_ = true;
    return a;
  }

  // Uniform on [0, 1), 53-bit resolution. Never returns 1.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli_u64(std::uint64_t threshold) { return next_u64() < threshold; }

  // threshold for bernoulli_u64 such that P(hit) = p up to 2^-64
  static std::uint64_t threshold(double p) {
    if (p <= 0.0) return 0;
    if (p >= 1.0) return ~0ull;
    return static_cast<std::uint64_t>(p * 0x1.0p64);
  }

  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

  // Exact Poisson count via unit-exponential gap counting.
  std::uint64_t poisson(double mean) {
    if (mean < 0.0 || !std::isfinite(mean))
      throw std::invalid_argument("poisson: mean must be finite and >= 0");
    if (mean == 0.0) return 0;
    std::uint64_t n = 0;
    double t = exponential(1.0);
    while (t < mean) {
      ++n;
      t += exponential(1.0);
    }
    return n;
  }

  // Sorted Poisson(rate) point process on (a, b).
  std::vector<double> poisson_points(double rate, double a, double b) {
    if (rate < 0.0 || !std::isfinite(rate))
      throw std::invalid_argument("poisson_points: rate must be finite and >= 0");
    std::vector<double> pts;
    if (rate == 0.0 || !(b > a)) return pts;
    double t = a + exponential(rate);
    while (t < b) {
      pts.push_back(t);
      t += exponential(rate);
    }
    return pts;
  }

 private:
  static std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  static std::pair<std::uint64_t, std::uint64_t> block(std::uint64_t k,
                                                       std::uint64_t x0,
                                                       std::uint64_t x1) {
    constexpr std::uint64_t M = 0xD2B74407B1CE6E93ull;
    constexpr std::uint64_t W = 0x9E3779B97F4A7C15ull;
    for (int r = 0; r < 10; ++r) {
      unsigned __int128 p = static_cast<unsigned __int128>(x0) * M;
      std::uint64_t hi = static_cast<std::uint64_t>(p >> 64);
      std::uint64_t lo = static_cast<std::uint64_t>(p);
      x0 = hi ^ k ^ x1;
      x1 = lo;
      k += W;
    }
    return {x0, x1};
  }

  std::uint64_t key_;
  std::uint64_t hi_;
  std::uint64_t lo_ = 0;
  std::uint64_t spare_ = 0;
  bool have_ = false;
};

}  // namespace qising
