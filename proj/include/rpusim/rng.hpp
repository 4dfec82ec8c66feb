#pragma once

#include <cstdint>
#include <random>

namespace rpusim {

// splitmix64; used to derive independent substream seeds from one master seed.
inline uint64_t mix_seed(uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline uint64_t derive_seed(uint64_t master, uint64_t tag) {
  return mix_seed(master ^ mix_seed(tag));
}

inline uint64_t derive_seed(uint64_t master, uint64_t tag1, uint64_t tag2) {
  return derive_seed(derive_seed(master, tag1), tag2);
}

/// Deterministic random stream. Every stochastic operation takes one of these
/// explicitly; nothing in the library owns hidden global state.
class Rng {
public:
  explicit Rng(uint64_t seed = 0) : engine_(seed) {}

  double uniform() { return unif_(engine_); }        // [0, 1)
  double gaussian() { return gauss_(engine_); }      // N(0, 1)
  bool bernoulli(double p) { return unif_(engine_) < p; }

  // uniform integer in [0, n)
  uint64_t below(uint64_t n) {
    std::uniform_int_distribution<uint64_t> d(0, n - 1);
    return d(engine_);
  }

  Rng substream(uint64_t tag) { return Rng(derive_seed(engine_(), tag)); }

  std::mt19937_64 &engine() { return engine_; }

private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
  std::normal_distribution<double> gauss_{0.0, 1.0};
};

} // namespace rpusim
