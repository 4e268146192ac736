#pragma once

#include <cstdint>

#include <boost/random/exponential_distribution.hpp>

namespace asep {

/// SplitMix64 finalizer, used to derive well-separated seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of replica r in an ensemble driven by master_seed.
constexpr std::uint64_t replica_seed(std::uint64_t master_seed, std::uint64_t r) noexcept {
  return splitmix64(splitmix64(master_seed) ^ splitmix64(r + 0x632BE59BD9B4E019ULL));
}

/// Counter-based generator: output k is splitmix64(seed + k * golden gamma).
/// Period 2^64; satisfies the UniformRandomBitGenerator requirements.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  result_type operator()() noexcept {
    std::uint64_t x = (state_ += 0x9E3779B97F4A7C15ULL);
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Exponential with the given rate (> 0), ziggurat method.
  double exponential(double rate) { return exp_(*this) / rate; }

  bool bernoulli(double prob) noexcept { return uniform() < prob; }

  std::uint64_t counter_state() const noexcept { return state_; }

 private:
  std::uint64_t state_;
  boost::random::exponential_distribution<double> exp_{1.0};
};

}  // namespace asep
