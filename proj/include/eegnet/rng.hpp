#pragma once

#include <cstdint>
#include <random>

#include "eegnet/common.hpp"

namespace eegnet {

// splitmix64 finalizer; used to derive independent substreams from one seed.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t substream(uint64_t seed, uint64_t index, uint64_t tag = 0) {
  return mix64(mix64(seed ^ mix64(index)) ^ mix64(tag + 0x1234567ULL));
}

/// Seeded generator owning all stochastic behavior of a run.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  Real uniform(Real lo, Real hi) {
    std::uniform_real_distribution<Real> d(lo, hi);
    return d(engine_);
  }

  Real normal(Real mean, Real stddev) {
    std::normal_distribution<Real> d(mean, stddev);
    return d(engine_);
  }

  long uniform_index(long n) {
    std::uniform_int_distribution<long> d(0, n - 1);
    return d(engine_);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    std::shuffle(v.begin(), v.end(), engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace eegnet
