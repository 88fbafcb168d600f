#pragma once

#include <cstdint>

namespace pnrl {

// Counter-based, splittable random stream.
//
// A stream is a (key, counter) pair; the i-th draw is a SplitMix64 mix of
// key + i * golden-gamma. Children are derived from the key alone, so
// splitting never consumes draws from the parent and the tree of streams
// hanging off one master seed does not depend on how many siblings exist.
// All derived quantities (uniform reals, bounded integers) are computed
// here rather than through <random> distributions, whose outputs are
// implementation-defined.
class RngStream {
 public:
  RngStream() = default;
  explicit RngStream(std::uint64_t seed);

  RngStream split(std::uint64_t stream_id) const;

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  // Uniform in [0, n); n must be positive.
  std::uint64_t uniform_int(std::uint64_t n);

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  bool operator==(const RngStream&) const = default;

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t z);

// Stream ids used when expanding a session master seed.
namespace streams {
inline constexpr std::uint64_t kEnv = 0;
inline constexpr std::uint64_t kAgents = 1;
inline constexpr std::uint64_t kPools = 2;
inline constexpr std::uint64_t kEval = 3;
}  // namespace streams

}  // namespace pnrl
