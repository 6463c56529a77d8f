#pragma once

#include <cstdint>
#include <span>

namespace corral {

// Deterministic random stream used by every stochastic component.
//
// Generator: SplitMix64. The state is a 64-bit counter advanced by the
// golden-ratio increment 0x9E3779B97F4A7C15 on each draw; the output is the
// standard SplitMix64 finalizer applied to the counter. A stream is identified
// by (seed, stream_id): the initial counter is mix(seed) ^ mix(~stream_id), so
// independent streams for the same seed never share a counter sequence start.
//
// Doubles are built from the top 53 bits, so draws are bit-identical on every
// platform. Every draw bumps draws().
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  std::uint64_t next_u64();

  // Uniform on [0, 1).
  double uniform();

  // One uniform draw; true with probability p (p <= 0 never, p >= 1 always).
  bool bernoulli(double p);

  // Uniform integer in [0, n), Lemire's multiply-shift with rejection. n > 0.
  std::uint64_t below(std::uint64_t n);

  // Index drawn proportionally to weights (one uniform draw). Falls back to the
  // last positive entry if rounding leaves the scan short.
  std::size_t categorical(std::span<const double> weights);

  // Standard normal via Box-Muller (two uniform draws, second value discarded).
  double normal();

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  std::uint64_t draws() const { return draws_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t state_;
  std::uint64_t draws_ = 0;
};

// Stream ids used by the harness; one per role so environment and learner
// randomness never interleave.
inline constexpr std::uint64_t kEnvironmentStream = 1;
inline constexpr std::uint64_t kLearnerStream = 2;

}  // namespace corral
