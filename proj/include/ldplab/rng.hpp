#pragma once

#include <array>
#include <cstdint>

namespace ldplab {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key) noexcept;

// Stream of N(0,1) variates for one (seed, stream) pair. Block b of the
// stream is the Philox output for counter {b_lo, b_hi, stream_lo, stream_hi},
// so any stream can be regenerated on any worker without shared state.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t stream) noexcept;

  // Uniform on (0, 1) with 53 random bits.
  double uniform() noexcept;
  double normal() noexcept;

 private:
  void refill() noexcept;

  PhiloxKey key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  PhiloxCounter buffer_{};
  int used_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Stream identifiers: the high bits tag the purpose, the low 40 bits the path index.
constexpr std::uint64_t stream_id(std::uint64_t tag, std::uint64_t index) noexcept {
  return (tag << 40) | (index & ((std::uint64_t{1} << 40) - 1));
}

}  // namespace ldplab
