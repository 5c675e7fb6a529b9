#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "psokit/fitness.hpp"

namespace psokit {

/// Run parameters, shared read-only by every worker. Treat as immutable once
/// validated. Velocity bounds may be degenerate (min_v == max_v) to pin
/// velocities; position bounds must describe a real interval.
struct pso_params {
  double inertia = 1.0;     // w
  double cognitive = 2.0;   // c1
  double social = 2.0;      // c2
  double min_pos = -100.0;
  double max_pos = 100.0;
  double min_v = -100.0;
  double max_v = 100.0;
  std::uint32_t particle_cnt = 0;
  std::uint32_t dims = 1;
  std::uint32_t max_iter = 1;
  std::uint32_t group_size = 128;

  std::uint32_t group_count() const noexcept {
    return (particle_cnt + group_size - 1) / group_size;
  }
  std::uint32_t lane_count() const noexcept { return group_count() * group_size; }

  /// Throws std::invalid_argument naming the violated bound.
  void validate() const {
    auto fail = [](const std::string& what) {
      throw std::invalid_argument("pso_params: " + what);
    };
    if (!(min_pos < max_pos))
      fail("min_pos (" + std::to_string(min_pos) + ") must be < max_pos (" +
           std::to_string(max_pos) + ")");
    if (!(min_v <= max_v))
      fail("min_v (" + std::to_string(min_v) + ") must be <= max_v (" +
           std::to_string(max_v) + ")");
    if (particle_cnt < 1) fail("particle_cnt must be >= 1");
    if (dims < 1) fail("dims must be >= 1");
    if (max_iter < 1) fail("max_iter must be >= 1");
    if (group_size < 1) fail("group_size must be >= 1");
  }
};

/// Parameters with the box taken from the fitness function and the default
/// velocity range +-(max_pos - min_pos)/2.
inline pso_params make_params(const fitness_fn& f, std::uint32_t particle_cnt,
                              std::uint32_t dims, std::uint32_t max_iter,
                              std::uint32_t group_size = 128) {
  pso_params p;
  p.min_pos = f.lo;
  p.max_pos = f.hi;
  p.max_v = (f.hi - f.lo) / 2.0;
  p.min_v = -p.max_v;
  p.particle_cnt = particle_cnt;
  p.dims = dims;
  p.max_iter = max_iter;
  p.group_size = group_size;
  p.validate();
  return p;
}

}  // namespace psokit
