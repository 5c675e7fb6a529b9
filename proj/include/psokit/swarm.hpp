#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "psokit/fitness.hpp"
#include "psokit/params.hpp"
#include "psokit/rng.hpp"

namespace psokit {

inline constexpr std::uint32_t no_particle = 0xffffffffu;
inline constexpr double fit_sentinel = -std::numeric_limits<double>::infinity();

/// Flat index of (particle, axis) in the axis-major layout: all particles'
/// axis 0, then axis 1, and so on.
inline std::size_t soa_index(std::uint32_t particle, std::uint32_t axis,
                             std::uint32_t particle_cnt) noexcept {
  return static_cast<std::size_t>(axis) * particle_cnt + particle;
}

/// Structure-of-arrays swarm state. Distinct particles' slots never alias, so
/// workers may advance different particles concurrently without locks.
struct swarm_state {
  std::uint32_t particle_cnt = 0;
  std::uint32_t dims = 0;
  std::vector<double> positions;   // particle_cnt * dims, axis-major
  std::vector<double> velocities;  // same shape
  std::vector<double> fitness;     // particle_cnt
  std::vector<double> pbest_pos;   // particle_cnt * dims, axis-major
  std::vector<double> pbest_fit;   // particle_cnt

  strided_view particle_position(std::uint32_t i) const noexcept {
    return {positions.data() + i, dims, particle_cnt};
  }
  strided_view particle_pbest(std::uint32_t i) const noexcept {
    return {pbest_pos.data() + i, dims, particle_cnt};
  }
};

/// Swarm-wide best record. `particle` is the index that produced the record;
/// it is the tie-break key when two equal fitness values race for the update
/// (the lower index wins, matching the serial processing order). `lock` is
/// the gate used by the fused engine: 0 = free, 1 = held.
struct global_best {
  double fit = fit_sentinel;
  std::vector<double> pos;
  std::uint32_t particle = no_particle;
  std::atomic<std::uint32_t> lock{0};
};

inline double clamp_velocity(double v, const pso_params& p) noexcept {
  return std::clamp(v, p.min_v, p.max_v);
}

inline double clamp_position(double x, const pso_params& p) noexcept {
  return std::clamp(x, p.min_pos, p.max_pos);
}

/// One axis of the velocity rule: w*v + c1*r1*(pbest - x) + c2*r2*(gbest - x),
/// saturated into [min_v, max_v]. Every engine funnels through this function
/// so trajectories stay bit-identical across engines.
inline double velocity_step(double v, double x, double pbest_x, double gbest_x,
                            const pso_params& p, double r1, double r2) noexcept {
  const double next =
      p.inertia * v + p.cognitive * r1 * (pbest_x - x) + p.social * r2 * (gbest_x - x);
  return clamp_velocity(next, p);
}

/// One axis of the position rule: x + v, saturated into [min_pos, max_pos].
inline double position_step(double x, double v, const pso_params& p) noexcept {
  return clamp_position(x + v, p);
}

/// Writes the clamped next velocity of particle i, one (r1, r2) pair per axis.
inline void update_velocity(swarm_state& s, const pso_params& p, std::uint32_t i,
                            std::span<const double> gbest_pos,
                            std::span<const double> r1, std::span<const double> r2) noexcept {
  for (std::uint32_t d = 0; d < s.dims; ++d) {
    const std::size_t at = soa_index(i, d, s.particle_cnt);
    s.velocities[at] = velocity_step(s.velocities[at], s.positions[at], s.pbest_pos[at],
                                     gbest_pos[d], p, r1[d], r2[d]);
  }
}

/// Moves particle i by its current velocity, clamped into the position box.
inline void update_position(swarm_state& s, const pso_params& p, std::uint32_t i) noexcept {
  for (std::uint32_t d = 0; d < s.dims; ++d) {
    const std::size_t at = soa_index(i, d, s.particle_cnt);
    s.positions[at] = position_step(s.positions[at], s.velocities[at], p);
  }
}

/// Adopts (fit, current position) as particle i's personal best when strictly
/// better; ties keep the old best. Returns whether an update happened.
inline bool update_pbest(swarm_state& s, std::uint32_t i, double fit) noexcept {
  if (!(fit > s.pbest_fit[i])) return false;
  s.pbest_fit[i] = fit;
  for (std::uint32_t d = 0; d < s.dims; ++d) {
    const std::size_t at = soa_index(i, d, s.particle_cnt);
    s.pbest_pos[at] = s.positions[at];
  }
  return true;
}

/// One particle's full update for iteration `iteration`: velocity, position,
/// fitness, personal best. `gbest_pos` must be the iteration-start snapshot;
/// every engine feeds the same snapshot, which is what makes parallel
/// trajectories reproduce the serial ones bit for bit. Returns the fitness of
/// the new position.
inline double advance_particle(swarm_state& s, const pso_params& p, const fitness_fn& f,
                               rng_key key, std::uint32_t iteration, std::uint32_t i,
                               std::span<const double> gbest_pos) {
  for (std::uint32_t d = 0; d < s.dims; ++d) {
    const std::size_t at = soa_index(i, d, s.particle_cnt);
    const double r1 = uniform01(key, {iteration, i, d, draw_slot::r1});
    const double r2 = uniform01(key, {iteration, i, d, draw_slot::r2});
    const double v = velocity_step(s.velocities[at], s.positions[at], s.pbest_pos[at],
                                   gbest_pos[d], p, r1, r2);
    s.velocities[at] = v;
    s.positions[at] = position_step(s.positions[at], v, p);
  }
  const double fit = f.eval(s.particle_position(i));
  s.fitness[i] = fit;
  update_pbest(s, i, fit);
  return fit;
}

/// Random initial state: positions and velocities uniform in their bounds,
/// fitness evaluated, personal bests seeded from the initial point, global
/// best at the argmax of the initial bests (ties to the lowest index).
inline void init_swarm(const pso_params& p, rng_key key, const fitness_fn& f,
                       swarm_state& s, global_best& best) {
  p.validate();
  const std::uint32_t n = p.particle_cnt;
  const std::size_t cells = static_cast<std::size_t>(n) * p.dims;
  s.particle_cnt = n;
  s.dims = p.dims;
  s.positions.resize(cells);
  s.velocities.resize(cells);
  s.fitness.resize(n);
  s.pbest_fit.resize(n);
  for (std::uint32_t d = 0; d < p.dims; ++d) {
    for (std::uint32_t i = 0; i < n; ++i) {
      const std::size_t at = soa_index(i, d, n);
      s.positions[at] = uniform_range(key, {0, i, d, draw_slot::init_pos}, p.min_pos, p.max_pos);
      s.velocities[at] = uniform_range(key, {0, i, d, draw_slot::init_vel}, p.min_v, p.max_v);
    }
  }
  s.pbest_pos = s.positions;
  for (std::uint32_t i = 0; i < n; ++i) {
    s.fitness[i] = f.eval(s.particle_position(i));
    s.pbest_fit[i] = s.fitness[i];
  }

  best.fit = fit_sentinel;
  best.particle = no_particle;
  best.pos.assign(p.dims, 0.0);
  best.lock.store(0, std::memory_order_relaxed);
  for (std::uint32_t i = 0; i < n; ++i) {
    if (s.pbest_fit[i] > best.fit) {
      best.fit = s.pbest_fit[i];
      best.particle = i;
      for (std::uint32_t d = 0; d < p.dims; ++d) best.pos[d] = s.pbest_pos[soa_index(i, d, n)];
    }
  }
}

}  // namespace psokit
