#pragma once

#include "psokit/engine.hpp"
#include "psokit/group_runtime.hpp"

namespace psokit {

namespace detail {

// Lane bodies shared by the two queue engines. A lane advances its particle
// and appends (fit, index) to the group queue only when the fitness beats the
// iteration-start global-best snapshot; lane 0 then scans the queue's prefix
// sequentially. The scan keeps its running maximum in locals instead of
// overwriting queue slot 0, which is observationally the same and leaves the
// queue read-only after the barrier.
struct queue_pass {
  const pso_params& p;
  const fitness_fn& f;
  rng_key key;
  swarm_state& s;
  global_best& gb;
  std::vector<double>& snap_pos;
  std::uint32_t groups;
  std::atomic<std::uint64_t>& admitted;  // per-iteration filter passes, for the occupancy log
  double snap_fit = fit_sentinel;
  std::uint32_t iteration = 0;

  best_candidate scan_queue(const lane_ctx& ctx, std::uint32_t count) const noexcept {
    best_candidate best{ctx.scratch.fit_queue[0], ctx.scratch.idx_queue[0]};
    for (std::uint32_t j = 1; j < count; ++j) {
      const best_candidate entry{ctx.scratch.fit_queue[j], ctx.scratch.idx_queue[j]};
      if (beats(entry, best)) best = entry;
    }
    return best;
  }

  // Queue engine, first launch: winners go to the aux slot of the group (or
  // the sentinel when nothing passed the filter).
  lane_task phase1(lane_ctx ctx) {
    const std::uint32_t i = ctx.global_index;
    const bool active = i < p.particle_cnt;
    if (active) {
      const double fit = advance_particle(s, p, f, key, iteration, i, snap_pos);
      if (fit > snap_fit) atomic_append(ctx.scratch, fit, i);
    }
    co_await ctx.barrier();
    if (active && ctx.lane == 0) {
      ctx.scratch.aux_fit[ctx.group] = fit_sentinel;
      ctx.scratch.aux_idx[ctx.group] = no_particle;
      const std::uint32_t n = ctx.scratch.append_count->load(std::memory_order_relaxed);
      if (n != 0) {
        const best_candidate best = scan_queue(ctx, n);
        ctx.scratch.aux_fit[ctx.group] = best.fit;
        ctx.scratch.aux_idx[ctx.group] = best.particle;
        admitted.fetch_add(n, std::memory_order_relaxed);
      }
    }
  }

  // Queue engine, second launch: one group applies the same queue scheme to
  // the aux slots. Candidates passed a fit > snapshot filter, so a strict
  // comparison against the (untouched) record reproduces the serial update.
  lane_task phase2(lane_ctx ctx) {
    best_candidate mine;
    for (std::uint32_t k = ctx.lane; k < groups; k += p.group_size) {
      const best_candidate entry{ctx.scratch.aux_fit[k], ctx.scratch.aux_idx[k]};
      if (beats(entry, mine)) mine = entry;
    }
    if (mine.fit > snap_fit) atomic_append(ctx.scratch, mine.fit, mine.particle);
    co_await ctx.barrier();
    if (ctx.lane == 0) {
      const std::uint32_t n = ctx.scratch.append_count->load(std::memory_order_relaxed);
      if (n != 0) {
        const best_candidate winner = scan_queue(ctx, n);
        if (winner.fit > gb.fit) adopt_record(gb, s, winner);
      }
    }
  }

  // Queue-lock engine: the two phases are fused. Each group leader applies
  // its winner straight to the global record under the lock; a full fence
  // precedes the release. The record may already hold another group's result
  // from this iteration, so equal fitness falls back to the lower particle
  // index -- the same winner the serial fold picks, whatever the arrival
  // order.
  lane_task fused(lane_ctx ctx) {
    const std::uint32_t i = ctx.global_index;
    const bool active = i < p.particle_cnt;
    if (active) {
      const double fit = advance_particle(s, p, f, key, iteration, i, snap_pos);
      if (fit > snap_fit) atomic_append(ctx.scratch, fit, i);
    }
    co_await ctx.barrier();
    if (active && ctx.lane == 0) {
      const std::uint32_t n = ctx.scratch.append_count->load(std::memory_order_relaxed);
      if (n != 0) {
        const best_candidate best = scan_queue(ctx, n);
        admitted.fetch_add(n, std::memory_order_relaxed);
        global_lock_acquire(gb.lock);
        if (beats(best, {gb.fit, gb.particle})) adopt_record(gb, s, best);
        global_lock_release(gb.lock);
      }
    }
  }
};

}  // namespace detail

/// Queue engine: conditional atomic appends replace the per-group reduction
/// tree; a leader scan of the (usually near-empty) queue takes its place.
/// Two launches per iteration, mirroring the two-kernel pipeline.
inline run_result run_queue(const pso_params& p, const fitness_fn& f, rng_key key,
                            const exec_options& opts = {},
                            const iteration_observer& observe = {}) {
  p.validate();
  swarm_state s;
  global_best gb;
  init_swarm(p, key, f, s, gb);
  group_runtime rt(opts);

  const std::uint32_t groups = p.group_count();
  std::vector<double> aux_fit(groups);
  std::vector<std::uint32_t> aux_idx(groups);
  std::vector<double> snap_pos(p.dims);
  std::atomic<std::uint64_t> admitted{0};

  run_result r;
  r.initial_gbest_fit = gb.fit;
  r.trace.reserve(p.max_iter);
  r.queue_occupancy.reserve(p.max_iter);

  detail::queue_pass pass{p, f, key, s, gb, snap_pos, groups, admitted};
  auto phase1 = [&pass](lane_ctx ctx) { return pass.phase1(ctx); };
  auto phase2 = [&pass](lane_ctx ctx) { return pass.phase2(ctx); };

  const stopwatch timer;
  for (std::uint32_t t = 0; t < p.max_iter; ++t) {
    std::copy(gb.pos.begin(), gb.pos.end(), snap_pos.begin());
    pass.snap_fit = gb.fit;
    pass.iteration = t;
    admitted.store(0, std::memory_order_relaxed);
    rt.launch(p.particle_cnt, p.group_size, aux_fit, aux_idx, phase1);
    rt.launch(p.group_size, p.group_size, aux_fit, aux_idx, phase2);
    r.trace.push_back(gb.fit);
    r.queue_occupancy.push_back(static_cast<double>(admitted.load(std::memory_order_relaxed)) /
                                p.particle_cnt);
    if (observe) observe(t, s, gb);
  }
  r.compute_seconds = timer.seconds();

  finalize_result(r, gb);
  return r;
}

/// Queue-lock engine: the fused variant. One launch per iteration; group
/// leaders update the lock-guarded global record directly, eliminating the
/// aux arrays and the second launch.
inline run_result run_queue_lock(const pso_params& p, const fitness_fn& f, rng_key key,
                                 const exec_options& opts = {},
                                 const iteration_observer& observe = {}) {
  p.validate();
  swarm_state s;
  global_best gb;
  init_swarm(p, key, f, s, gb);
  group_runtime rt(opts);

  std::vector<double> snap_pos(p.dims);
  std::atomic<std::uint64_t> admitted{0};

  run_result r;
  r.initial_gbest_fit = gb.fit;
  r.trace.reserve(p.max_iter);
  r.queue_occupancy.reserve(p.max_iter);

  detail::queue_pass pass{p, f, key, s, gb, snap_pos, p.group_count(), admitted};
  auto fused = [&pass](lane_ctx ctx) { return pass.fused(ctx); };

  const stopwatch timer;
  for (std::uint32_t t = 0; t < p.max_iter; ++t) {
    std::copy(gb.pos.begin(), gb.pos.end(), snap_pos.begin());
    pass.snap_fit = gb.fit;
    pass.iteration = t;
    admitted.store(0, std::memory_order_relaxed);
    rt.launch(p.particle_cnt, p.group_size, {}, {}, fused);
    r.trace.push_back(gb.fit);
    r.queue_occupancy.push_back(static_cast<double>(admitted.load(std::memory_order_relaxed)) /
                                p.particle_cnt);
    if (observe) observe(t, s, gb);
  }
  r.compute_seconds = timer.seconds();

  finalize_result(r, gb);
  return r;
}

}  // namespace psokit
