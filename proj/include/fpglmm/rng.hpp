#ifndef FPGLMM_RNG_HPP
#define FPGLMM_RNG_HPP

#include <cmath>
#include <cstdint>

namespace fpglmm {

// Derives an independent stream seed from (seed, index). Stateless, so
// parallel workers can construct their own streams in any order and still
// reproduce the exact sequence a serial run would produce for that index.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// splitmix64 generator with hand-rolled samplers. The standard-library
// distributions are implementation-defined, which would break the byte-exact
// reproducibility the file formats promise.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform on [0,1) with 53 random bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Marsaglia polar; caches the spare deviate.
  double next_normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * next_unit() - 1.0;
      v = 2.0 * next_unit() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  // Exact Poisson. Knuth multiplication for small means; larger means are
  // split in half recursively, which stays exact at any scale.
  long next_poisson(double mean) {
    if (mean <= 0.0) return 0;
    if (mean > 30.0) {
      long half = next_poisson(0.5 * mean);
      return half + next_poisson(mean - 0.5 * mean);
    }
    const double limit = std::exp(-mean);
    long k = 0;
    double prod = next_unit();
    while (prod > limit) {
      ++k;
      prod *= next_unit();
    }
    return k;
  }

  // Index into cumulative weights; assumes weights sum to ~1.
  template <typename Vec>
  std::size_t next_categorical(const Vec& cumulative) {
    double u = next_unit();
    std::size_t n = static_cast<std::size_t>(cumulative.size());
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (u < cumulative[i]) return i;
    }
    return n - 1;
  }

private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

} // namespace fpglmm

#endif
