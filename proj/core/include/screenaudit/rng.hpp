#pragma once

#include <cstdint>
#include <string_view>

namespace screenaudit {

// Counter-based random stream: every draw is a pure function of
// (seed, stream, counter). Generators index draws by row number, so growing a
// synthetic dataset from n to n+m reproduces the first n rows bit-for-bit and
// appends m new ones. Streams keep independent variables (feature draws,
// noise, group assignment, ...) from aliasing each other.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream);
  CounterRng(std::uint64_t seed, std::string_view stream_name);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  // Raw 64 mixed bits for the given counter.
  std::uint64_t bits(std::uint64_t counter) const;

  // Uniform on [0, 1).
  double uniform(std::uint64_t counter) const;

  // Uniform on the open interval (0, 1); safe to feed through quantile maps.
  double uniform_open(std::uint64_t counter) const;

  // Standard normal via the inverse CDF (one counter per variate).
  double normal(std::uint64_t counter) const;

  // Bernoulli(p) as 0/1.
  int bernoulli(std::uint64_t counter, double p) const;

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t pick(std::uint64_t counter, std::uint64_t n) const;

  // Stable 64-bit name hash used to derive stream ids (FNV-1a).
  static std::uint64_t hash_name(std::string_view name);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
};

// Inverse of the standard normal CDF (Wichura's PPND16 rational
// approximation, accurate to ~1e-16 over (0,1)).
double inverse_normal_cdf(double p);

}  // namespace screenaudit
