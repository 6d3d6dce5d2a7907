#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "gmlab/error.hpp"

namespace gmlab {

/// Deterministic, platform-independent random source (xoshiro256++ seeded
/// through splitmix64).  Identical seed and call sequence give identical
/// outputs everywhere; std:: distributions are deliberately avoided.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed) {
    std::uint64_t x = seed;
    for (auto& si : s_) si = splitmix64(x);
  }

  std::uint64_t seed() const { return seed_; }

  /// Independent substream derived from (seed, id); used so parallel
  /// episodes are schedule-independent.
  Rng substream(std::uint64_t id) const {
    std::uint64_t x = seed_;
    const std::uint64_t a = splitmix64(x);
    x = id ^ 0x6a09e667f3bcc909ULL;
    const std::uint64_t b = splitmix64(x);
    return Rng(a ^ (b + 0x9e3779b97f4a7c15ULL));
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform draw in the open interval (0, 1).
  double uniform01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double standard_normal() {
    const double u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  /// -log(-log(u)) with u clamped to [1e-12, 1-1e-12].
  double gumbel01() {
    double u = uniform01();
    if (u < 1e-12) u = 1e-12;
    if (u > 1.0 - 1e-12) u = 1.0 - 1e-12;
    return -std::log(-std::log(u));
  }

  double bernoulli(double p) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ContractError("bernoulli: p must be in [0,1]");
    }
    return uniform01() < p ? 1.0 : 0.0;
  }

  std::size_t categorical(std::span<const double> w) {
    double total = 0.0;
    for (double wi : w) {
      if (wi < 0.0) throw ContractError("categorical: negative weight");
      total += wi;
    }
    if (std::abs(total - 1.0) > 1e-6) {
      throw ContractError("categorical: weights must sum to 1");
    }
    const double u = uniform01() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < w.size(); ++i) {
      acc += w[i];
      if (u < acc) return i;
    }
    return w.empty() ? 0 : w.size() - 1;
  }

 private:
  static std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t seed_;
  std::uint64_t s_[4];
};

}  // namespace gmlab
