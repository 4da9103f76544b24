// Copyright (c) 2026 the dsraseg authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <vector>

namespace dsraseg {

// Deterministic xoshiro256** generator seeded through splitmix64.
//
// The library never touches std:: distributions: their output is not pinned
// across standard-library versions, and bitwise reproducibility of training
// runs is a hard contract here. Every stream used by the trainer is derived
// statelessly from (seed, purpose, epoch, step) via Rng::derive, so resuming
// from a checkpoint replays the exact draws of an uninterrupted run.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t x = seed;
    for (auto& si : s_) si = splitmix64(x);
  }

  // Stateless sub-stream derivation: hashes the key words into a fresh seed.
  static Rng derive(uint64_t seed, std::initializer_list<uint64_t> key) {
    uint64_t h = seed ^ 0x9e3779b97f4a7c15ULL;
    for (uint64_t k : key) {
      uint64_t x = k;
      h ^= splitmix64(x) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return Rng(h);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi] inclusive.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    // Rejection sampling keeps the draw exactly uniform.
    const uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return lo + static_cast<int64_t>(v % span);
  }

  // Standard normal via Box-Muller; caches the second variate.
  double normal() {
    if (has_cache_) {
      has_cache_ = false;
      return cache_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    cache_ = r * std::sin(a);
    has_cache_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Fisher-Yates; deterministic given the stream state.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static uint64_t splitmix64(uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  uint64_t s_[4];
  double cache_ = 0.0;
  bool has_cache_ = false;
};

}  // namespace dsraseg
