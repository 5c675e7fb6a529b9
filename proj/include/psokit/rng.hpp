#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>

namespace psokit {

/// Key of a random stream; equal keys define equal streams.
struct rng_key {
  std::uint64_t seed = 0;
};

/// Which of the per-(iteration, particle, axis) random numbers is requested.
enum class draw_slot : std::uint32_t {
  r1 = 0,        // cognitive term
  r2 = 1,        // social term
  init_pos = 2,  // initial position
  init_vel = 3,  // initial velocity
};

/// Coordinates of one draw in the run-wide random stream. Distinct tuples map
/// to distinct counters, so a value never depends on evaluation order or on
/// which engine asked for it.
struct rng_draw {
  std::uint32_t iteration = 0;
  std::uint32_t particle = 0;
  std::uint32_t axis = 0;
  draw_slot slot = draw_slot::r1;
};

namespace detail {

// Philox-4x32-10 keyed counter permutation. Matches the published reference
// vectors (see the unit tests for the frozen known-answer triples).
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::uint32_t k0, std::uint32_t k1) noexcept {
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = 0xD2511F53ull * ctr[0];
    const std::uint64_t p1 = 0xCD9E8D57ull * ctr[2];
    ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ k0,
           static_cast<std::uint32_t>(p1),
           static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ k1,
           static_cast<std::uint32_t>(p0)};
    k0 += 0x9E3779B9u;
    k1 += 0xBB67AE85u;
  }
  return ctr;
}

}  // namespace detail

/// Uniform double in [0, 1), a pure function of (key, draw). The high 53 bits
/// of the 64-bit output are divided by 2^53, so 1.0 is never produced and
/// every representable multiple of 2^-53 in range is equally likely.
inline double uniform01(rng_key key, rng_draw draw) noexcept {
  const auto words = detail::philox4x32(
      {draw.iteration, draw.particle, draw.axis, static_cast<std::uint32_t>(draw.slot)},
      static_cast<std::uint32_t>(key.seed), static_cast<std::uint32_t>(key.seed >> 32));
  const std::uint64_t bits = (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Affine transform of uniform01 onto [lo, hi].
inline double uniform_range(rng_key key, rng_draw draw, double lo, double hi) {
  if (lo > hi) throw std::invalid_argument("uniform_range: lo > hi");
  return lo + uniform01(key, draw) * (hi - lo);
}

}  // namespace psokit
