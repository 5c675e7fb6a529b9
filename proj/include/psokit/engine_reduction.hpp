#pragma once

#include "psokit/engine.hpp"
#include "psokit/group_runtime.hpp"

namespace psokit {

namespace detail {

// Shared by both launches of one reduction iteration. Phase 1 lanes advance
// their particle and tree-reduce the group's (fit, particle) candidates into
// the group's aux slot; phase 2 runs in a single group, folds the aux slots
// and applies the winner to the global record under a strict-> comparison.
struct reduction_pass {
  const pso_params& p;
  const fitness_fn& f;
  rng_key key;
  swarm_state& s;
  global_best& gb;
  std::vector<double>& snap_pos;
  std::uint32_t padded;
  std::uint32_t groups;
  bool unrolled;
  std::uint32_t iteration = 0;

  lane_task tree_pass(lane_ctx ctx, bool second_phase) {
    best_candidate mine;
    if (second_phase) {
      for (std::uint32_t k = ctx.lane; k < groups; k += p.group_size) {
        const best_candidate entry{ctx.scratch.aux_fit[k], ctx.scratch.aux_idx[k]};
        if (beats(entry, mine)) mine = entry;
      }
    } else if (ctx.global_index < p.particle_cnt) {
      const std::uint32_t i = ctx.global_index;
      mine = {advance_particle(s, p, f, key, iteration, i, snap_pos), i};
    }

    const std::span<double> wf = ctx.scratch.fit_queue;
    const std::span<std::uint32_t> wi = ctx.scratch.idx_queue;
    wf[ctx.lane] = mine.fit;
    wi[ctx.lane] = mine.particle;
    for (std::uint32_t pad = ctx.lane + p.group_size; pad < padded; pad += p.group_size) {
      wf[pad] = fit_sentinel;
      wi[pad] = no_particle;
    }
    co_await ctx.barrier();

    if (unrolled) {
      // Straight-line stride sequences for the supported group sizes; each
      // entry point falls through the remaining rounds.
      switch (padded) {
        case 256:
          reduce_round(wf, wi, ctx.lane, 128);
          co_await ctx.barrier();
          [[fallthrough]];
        case 128:
          reduce_round(wf, wi, ctx.lane, 64);
          co_await ctx.barrier();
          [[fallthrough]];
        case 64:
          reduce_round(wf, wi, ctx.lane, 32);
          co_await ctx.barrier();
          [[fallthrough]];
        case 32:
          reduce_round(wf, wi, ctx.lane, 16);
          co_await ctx.barrier();
          reduce_round(wf, wi, ctx.lane, 8);
          co_await ctx.barrier();
          reduce_round(wf, wi, ctx.lane, 4);
          co_await ctx.barrier();
          reduce_round(wf, wi, ctx.lane, 2);
          co_await ctx.barrier();
          reduce_round(wf, wi, ctx.lane, 1);
          co_await ctx.barrier();
          break;
      }
    } else {
      for (std::uint32_t stride = padded >> 1; stride >= 1; stride >>= 1) {
        reduce_round(wf, wi, ctx.lane, stride);
        co_await ctx.barrier();
      }
    }

    if (ctx.lane == 0) {
      const best_candidate winner{wf[0], wi[0]};
      if (second_phase) {
        if (winner.fit > gb.fit) adopt_record(gb, s, winner);
      } else {
        ctx.scratch.aux_fit[ctx.group] = winner.fit;
        ctx.scratch.aux_idx[ctx.group] = winner.particle;
      }
    }
  }
};

inline bool unroll_supported(std::uint32_t group_size) noexcept {
  return group_size == 32 || group_size == 64 || group_size == 128 || group_size == 256;
}

}  // namespace detail

/// Two-phase engine with intra-group parallel max-reduction (the baseline the
/// queue engines are measured against). `unrolled` switches the tree to the
/// straight-line variant for group sizes {32, 64, 128, 256} and falls back to
/// the looped tree otherwise; both variants combine in the same order, so
/// their results are bit-identical.
inline run_result run_reduction(const pso_params& p, const fitness_fn& f, rng_key key,
                                bool unrolled = false, const exec_options& opts = {},
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

  run_result r;
  r.initial_gbest_fit = gb.fit;
  r.trace.reserve(p.max_iter);

  const auto padded = static_cast<std::uint32_t>(std::bit_ceil(p.group_size));
  detail::reduction_pass pass{p,      f,      key,
                              s,      gb,     snap_pos,
                              padded, groups, unrolled && detail::unroll_supported(p.group_size)};
  auto phase1 = [&pass](lane_ctx ctx) { return pass.tree_pass(ctx, false); };
  auto phase2 = [&pass](lane_ctx ctx) { return pass.tree_pass(ctx, true); };

  const stopwatch timer;
  for (std::uint32_t t = 0; t < p.max_iter; ++t) {
    std::copy(gb.pos.begin(), gb.pos.end(), snap_pos.begin());
    pass.iteration = t;
    rt.launch(p.particle_cnt, p.group_size, aux_fit, aux_idx, phase1);
    rt.launch(p.group_size, p.group_size, aux_fit, aux_idx, phase2);
    r.trace.push_back(gb.fit);
    if (observe) observe(t, s, gb);
  }
  r.compute_seconds = timer.seconds();

  finalize_result(r, gb);
  return r;
}

}  // namespace psokit
