#pragma once

#include <array>
#include <cstdint>

namespace cliplab {

/// Philox-4x32-10 block function. Exposed for known-answer testing.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) noexcept;

/// Counter-based random stream. The draw sequence is a pure function of
/// (seed, stream_id): the seed keys the Philox cipher and the stream id
/// occupies the upper half of the 128-bit block counter, so distinct stream ids
/// never share blocks. A stream is single-owner; hand each worker its own.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id) noexcept
      : seed_(seed), stream_id_(stream_id) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }
  /// Index of the next Philox block to be generated.
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64() noexcept;

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) noexcept;
  /// Standard normal via Box-Muller (no cached second variate).
  double normal() noexcept;

  /// Independent child stream with the same seed; `index` is mixed into the
  /// stream id.
  RngStream substream(std::uint64_t index) const noexcept;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t counter_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int buffered_ = 0;
};

/// Draw from U[-sqrt(3), sqrt(3)]: zero mean, unit second moment.
double uniform_unit_variance_noise(RngStream& rng) noexcept;

}  // namespace cliplab
