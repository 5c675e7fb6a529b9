#pragma once

#include "psokit/engine.hpp"

namespace psokit {

/// Reference engine: single-threaded, particles processed in index order.
/// The global-best record is updated online after each particle (which, at
/// iteration end, equals the max over all personal bests with ties resolved
/// to the lowest index). The velocity rule reads the record as of iteration
/// start, the same snapshot the parallel engines use -- that shared phase
/// structure is what makes their traces comparable bit for bit.
inline run_result run_serial(const pso_params& p, const fitness_fn& f, rng_key key,
                             const iteration_observer& observe = {}) {
  p.validate();
  swarm_state s;
  global_best gb;
  init_swarm(p, key, f, s, gb);

  run_result r;
  r.initial_gbest_fit = gb.fit;
  r.trace.reserve(p.max_iter);
  std::vector<double> snap_pos(p.dims);

  const stopwatch timer;
  for (std::uint32_t t = 0; t < p.max_iter; ++t) {
    std::copy(gb.pos.begin(), gb.pos.end(), snap_pos.begin());
    for (std::uint32_t i = 0; i < p.particle_cnt; ++i) {
      advance_particle(s, p, f, key, t, i, snap_pos);
      if (s.pbest_fit[i] > gb.fit) {
        gb.fit = s.pbest_fit[i];
        gb.particle = i;
        for (std::uint32_t d = 0; d < p.dims; ++d)
          gb.pos[d] = s.pbest_pos[soa_index(i, d, p.particle_cnt)];
      }
    }
    r.trace.push_back(gb.fit);
    if (observe) observe(t, s, gb);
  }
  r.compute_seconds = timer.seconds();

  finalize_result(r, gb);
  return r;
}

}  // namespace psokit
