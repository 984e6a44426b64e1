#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace cliplab {

// Counter-based generator: the i-th 64-bit draw is a fixed mixing function of
// (key, i), so a stream is reproducible on any platform from its seed alone.
// Normal draws use Box-Muller on top of the uniform stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64() noexcept;

  // Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;

  // Uniform integer on [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept;

  double normal() noexcept;

  // Independent generator derived from this one's seed and a stream id.
  Rng fork(std::uint64_t stream) const noexcept { return Rng(seed_, stream); }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Uniformly random permutation of 0..n-1 (Fisher-Yates).
std::vector<std::size_t> permutation(std::size_t n, Rng& rng);

}  // namespace cliplab
