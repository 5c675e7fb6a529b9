#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "psokit/swarm.hpp"

namespace psokit {

/// Outcome of one optimization run. `trace` holds gbest_fit after every
/// iteration (monotone non-decreasing); `compute_seconds` times the iteration
/// loop only, never initialization or result assembly.
struct run_result {
  double gbest_fit = fit_sentinel;
  std::vector<double> gbest_pos;
  std::uint32_t gbest_particle = no_particle;
  double initial_gbest_fit = fit_sentinel;
  std::vector<double> trace;
  double compute_seconds = 0.0;
  // Queue engines only: fraction of particles admitted by the snapshot
  // filter, per iteration. Diagnostic, never asserted on.
  std::vector<double> queue_occupancy;
};

/// Called after each completed iteration with the live state; keep it cheap.
using iteration_observer =
    std::function<void(std::uint32_t iteration, const swarm_state&, const global_best&)>;

/// A (fitness, particle) pair ordered by fitness, ties to the lower index.
struct best_candidate {
  double fit = fit_sentinel;
  std::uint32_t particle = no_particle;
};

inline bool beats(const best_candidate& challenger, const best_candidate& incumbent) noexcept {
  return challenger.fit > incumbent.fit ||
         (challenger.fit == incumbent.fit && challenger.particle < incumbent.particle);
}

/// One round of the in-place binary max-reduction: lanes below `stride` fold
/// the entry `stride` slots above into their own.
inline void reduce_round(std::span<double> fit, std::span<std::uint32_t> idx,
                         std::uint32_t lane, std::uint32_t stride) noexcept {
  if (lane < stride) {
    const best_candidate incumbent{fit[lane], idx[lane]};
    const best_candidate challenger{fit[lane + stride], idx[lane + stride]};
    if (beats(challenger, incumbent)) {
      fit[lane] = challenger.fit;
      idx[lane] = challenger.particle;
    }
  }
}

inline void adopt_record(global_best& gb, const swarm_state& s, const best_candidate& winner) {
  gb.fit = winner.fit;
  gb.particle = winner.particle;
  for (std::uint32_t d = 0; d < s.dims; ++d)
    gb.pos[d] = s.positions[soa_index(winner.particle, d, s.particle_cnt)];
}

inline void finalize_result(run_result& r, const global_best& gb) {
  r.gbest_fit = gb.fit;
  r.gbest_pos = gb.pos;
  r.gbest_particle = gb.particle;
}

class stopwatch {
 public:
  stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace psokit
