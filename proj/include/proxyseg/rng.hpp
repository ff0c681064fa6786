#pragma once

#include <cstdint>

namespace proxyseg {

/// Mixes two 64-bit values into a well-spread seed (splitmix64 finaliser).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

/// Counter-based random stream: the n-th draw is a pure function of
/// (key, n), so the full state is the pair and can be checkpointed exactly.
class RngStream {
 public:
  RngStream() = default;
  explicit RngStream(std::uint64_t key, std::uint64_t counter = 0) : key_(key), counter_(counter) {}

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n);
  // Uniform integer in [lo, hi].
  long between(long lo, long hi);
  bool bernoulli(double p) { return uniform() < p; }
  // Standard normal via Box-Muller; consumes two draws.
  double normal();

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

  bool operator==(const RngStream&) const = default;

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace proxyseg
