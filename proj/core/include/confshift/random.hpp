#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace confshift {

//! SplitMix64 finalizer; a good 64-bit mixing function.
constexpr std::uint64_t
mix64(std::uint64_t x) noexcept
{
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

//! Counter-based sub-seed derivation: the result depends only on the
//! parent seed and the ordered list of stream ids.
constexpr std::uint64_t
derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> ids) noexcept
{
  std::uint64_t h = mix64(parent);
  for (auto id : ids)
    h = mix64(h ^ mix64(id + 0x632BE59BD9B4E019ULL));
  return h;
}

//! Seeded generator with platform-independent variate conversions.
//!
//! std::mt19937_64 has a standardized output sequence, but the standard
//! distributions do not; the conversions below are spelled out so that
//! identical seeds give identical draws on every toolchain.
class Rng
{
public:
  explicit Rng(std::uint64_t seed)
    : engine_(seed)
  {}

  std::uint64_t next_u64() { return engine_(); }

  //! Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  //! Uniform integer in [0, n); n must be positive.
  std::size_t uniform_index(std::size_t n)
  {
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return static_cast<std::size_t>(x % bound);
  }

  //! Standard normal via the Marsaglia polar method.
  double normal()
  {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

} // namespace confshift
