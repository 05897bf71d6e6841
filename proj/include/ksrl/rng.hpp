#ifndef KSRL_RNG_HPP
#define KSRL_RNG_HPP

#include <cstdint>
#include <random>
#include <span>

namespace ksrl {

// splitmix64; used to derive independent sub-stream seeds from one root seed.
inline uint64_t mix_seed(uint64_t seed, uint64_t stream) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic RNG owned by exactly one worker at a time. Copying snapshots
// the full generator state.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(gen_);
  }

  double gaussian() { return normal_(gen_); }

  void fill_gaussian(std::span<double> out) {
    for (double& v : out) v = normal_(gen_);
  }

  // inclusive bounds
  int uniform_int(int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(gen_);
  }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace ksrl

#endif  // KSRL_RNG_HPP
