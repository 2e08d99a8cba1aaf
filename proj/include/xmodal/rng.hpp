#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace xmodal {

// Deterministic RNG used everywhere in the project. std::mt19937_64 is fully
// specified by the standard, so streams are bit-identical across platforms;
// the std::* distributions are not, which is why uniform/gauss are done by
// hand here.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform01() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
  }

  // Box-Muller with cached spare.
  double gauss(double mean, double stddev) {
    if (has_spare_) {
      has_spare_ = false;
      return mean + spare_ * stddev;
    }
    constexpr double two_pi = 6.283185307179586476925286766559;
    const double theta = uniform01() * two_pi;
    const double u = 1.0 - uniform01();  // keep away from log(0)
    const double r = std::sqrt(-2.0 * std::log(u));
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return mean + r * std::cos(theta) * stddev;
  }

  // Index in [0, n). Modulo bias is irrelevant at these ranges; what matters
  // is that the result is reproducible.
  size_t below(size_t n) { return static_cast<size_t>(gen_() % n); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.size() <= 1) return;
    for (size_t i = v.size() - 1; i > 0; --i) {
      const size_t j = below(i + 1);
      std::swap(v[i], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// splitmix64 finalizer; used to derive independent stream seeds from a user
// seed plus a tag (epoch index, mix-entry index, ...).
inline uint64_t derive_seed(uint64_t seed, uint64_t tag) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace xmodal
