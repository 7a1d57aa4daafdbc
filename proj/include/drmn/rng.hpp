#pragma once

#include <cstdint>

namespace drmn {

/// Counter-based random stream. The n-th draw depends only on (seed, n), so
/// a state can be copied, replayed, or persisted as two integers.
class RngState {
 public:
  explicit RngState(std::uint64_t seed = 0, std::uint64_t counter = 0) noexcept
      : seed_(seed), counter_(counter) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64() noexcept;
  /// Uniform in [0, 1).
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller; consumes two draws.
  double normal() noexcept;
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept;

  /// Independent stream keyed by `stream`; does not advance this state.
  RngState fork(std::uint64_t stream) const noexcept;

  friend bool operator==(const RngState&, const RngState&) = default;

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace drmn
