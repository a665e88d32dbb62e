#pragma once

#include <algorithm>
#include <cstdint>
#include <random>

namespace flairsyn {

/// splitmix64 step; used to derive independent child seeds from one root seed
/// so that per-epoch / per-sample streams do not depend on consumption order.
inline uint64_t mix_seed(uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline uint64_t derive_seed(uint64_t root, uint64_t a, uint64_t b = 0, uint64_t c = 0) {
  uint64_t s = mix_seed(root);
  s = mix_seed(s ^ (a * 0x9e3779b97f4a7c15ULL));
  s = mix_seed(s ^ (b * 0xc2b2ae3d27d4eb4fULL));
  s = mix_seed(s ^ (c * 0x165667b19e3779f9ULL));
  return s;
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    return d(engine_);
  }
  double normal(double mean, double stddev) {
    std::normal_distribution<double> d(mean, stddev);
    return d(engine_);
  }
  int64_t uniform_int(int64_t lo, int64_t hi) {  // inclusive bounds
    std::uniform_int_distribution<int64_t> d(lo, hi);
    return d(engine_);
  }
  template <typename It>
  void shuffle(It first, It last) {
    std::shuffle(first, last, engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace flairsyn
