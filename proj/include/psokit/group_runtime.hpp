#pragma once

#include <atomic>
#include <bit>
#include <coroutine>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "psokit/swarm.hpp"

namespace psokit {

namespace detail {

inline void cpu_pause() noexcept {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_ia32_pause();
#else
  std::this_thread::yield();
#endif
}

// Recycles coroutine frames per thread; lanes of one group are created and
// destroyed by the same worker, so a thread-local freelist is enough.
struct frame_pool {
  struct cache {
    std::size_t size = 0;
    std::vector<void*> blocks;
    ~cache() {
      for (void* b : blocks) ::operator delete(b);
    }
  };
  static cache& local() {
    static thread_local cache c;
    return c;
  }
  static void* allocate(std::size_t n) {
    cache& c = local();
    if (n == c.size && !c.blocks.empty()) {
      void* b = c.blocks.back();
      c.blocks.pop_back();
      return b;
    }
    return ::operator new(n);
  }
  static void release(void* p, std::size_t n) noexcept {
    cache& c = local();
    if (c.size != n) {
      if (!c.blocks.empty()) {
        ::operator delete(p);
        return;
      }
      c.size = n;
    }
    if (c.blocks.size() < 4096)
      c.blocks.push_back(p);
    else
      ::operator delete(p);
  }
};

// Sense-reversing rendezvous for the threads driving one group. The last
// arriver runs `completion` before anyone is released, so writes made there
// are visible to every participant afterwards.
class team_barrier {
 public:
  explicit team_barrier(std::uint32_t participants) : participants_(participants) {}

  template <typename Completion>
  void arrive_and_wait(Completion&& completion) {
    if (participants_ == 1) {
      completion();
      return;
    }
    const std::uint32_t my_sense = sense_.load(std::memory_order_relaxed);
    if (arrived_.fetch_add(1, std::memory_order_acq_rel) + 1 == participants_) {
      arrived_.store(0, std::memory_order_relaxed);
      completion();
      sense_.store(my_sense ^ 1u, std::memory_order_release);
      sense_.notify_all();
    } else {
      for (int spin = 0; spin < 4096; ++spin) {
        if (sense_.load(std::memory_order_acquire) != my_sense) return;
        cpu_pause();
      }
      std::uint32_t cur;
      while ((cur = sense_.load(std::memory_order_acquire)) == my_sense)
        sense_.wait(cur, std::memory_order_acquire);
    }
  }

  void arrive_and_wait() {
    arrive_and_wait([] {});
  }

 private:
  std::atomic<std::uint32_t> arrived_{0};
  std::atomic<std::uint32_t> sense_{0};
  std::uint32_t participants_;
};

}  // namespace detail

/// One lane of a worker group. The body runs lazily; each resume advances it
/// to its next barrier (or to completion). Exceptions are captured on the
/// promise and surfaced by the runtime with the failing group and lane.
class lane_task {
 public:
  struct promise_type {
    std::exception_ptr error;

    lane_task get_return_object() {
      return lane_task{handle_type::from_promise(*this)};
    }
    std::suspend_always initial_suspend() noexcept { return {}; }
    std::suspend_always final_suspend() noexcept { return {}; }
    void return_void() noexcept {}
    void unhandled_exception() noexcept { error = std::current_exception(); }

    static void* operator new(std::size_t n) { return detail::frame_pool::allocate(n); }
    static void operator delete(void* p, std::size_t n) noexcept {
      detail::frame_pool::release(p, n);
    }
  };
  using handle_type = std::coroutine_handle<promise_type>;

  lane_task() = default;
  explicit lane_task(handle_type h) : handle_(h) {}
  lane_task(lane_task&& o) noexcept : handle_(o.handle_) { o.handle_ = {}; }
  lane_task& operator=(lane_task&& o) noexcept {
    if (this != &o) {
      if (handle_) handle_.destroy();
      handle_ = o.handle_;
      o.handle_ = {};
    }
    return *this;
  }
  lane_task(const lane_task&) = delete;
  lane_task& operator=(const lane_task&) = delete;
  ~lane_task() {
    if (handle_) handle_.destroy();
  }

  handle_type handle() const noexcept { return handle_; }

 private:
  handle_type handle_;
};

/// `co_await ctx.barrier()` suspends the lane until every lane of its group
/// has reached the same point; writes made before the barrier are visible to
/// all group lanes after it.
struct barrier_point {
  bool await_ready() const noexcept { return false; }
  void await_suspend(std::coroutine_handle<>) const noexcept {}
  void await_resume() const noexcept {}
};

/// Group-local scratch plus the cross-group winner slots. The queue arrays
/// are padded to the next power of two so a full binary reduction tree fits
/// in place; the append protocol only ever touches the first group_size
/// slots.
struct group_scratch {
  std::span<double> fit_queue;
  std::span<std::uint32_t> idx_queue;
  std::atomic<std::uint32_t>* append_count = nullptr;
  std::span<double> aux_fit;        // one slot per group, indexed by group id
  std::span<std::uint32_t> aux_idx;
};

/// Claims the next queue slot and stores (fit, particle) there. Slots handed
/// out within one iteration form the contiguous prefix 0..count-1. Readers
/// must be separated from writers by a group barrier.
inline std::uint32_t atomic_append(group_scratch& s, double fit, std::uint32_t particle) {
  const std::uint32_t slot = s.append_count->fetch_add(1);
  s.fit_queue[slot] = fit;
  s.idx_queue[slot] = particle;
  return slot;
}

/// Spins until the lock word moves 0 -> 1. Pairs with global_lock_release.
inline void global_lock_acquire(std::atomic<std::uint32_t>& lock) noexcept {
  std::uint32_t expected = 0;
  while (!lock.compare_exchange_weak(expected, 1, std::memory_order_acquire,
                                     std::memory_order_relaxed)) {
    expected = 0;
    while (lock.load(std::memory_order_relaxed) != 0) detail::cpu_pause();
  }
}

/// Publishes all writes made while holding, then frees the lock word.
/// Releasing a lock that is not held is a programming error.
inline void global_lock_release(std::atomic<std::uint32_t>& lock) {
  std::atomic_thread_fence(std::memory_order_seq_cst);
  if (lock.exchange(0, std::memory_order_release) != 1)
    throw std::logic_error("global_lock_release: lock was not held");
}

/// Per-lane view handed to the body: identity plus the group's scratch.
struct lane_ctx {
  std::uint32_t group = 0;
  std::uint32_t lane = 0;          // within the group
  std::uint32_t global_index = 0;  // group * group_size + lane
  group_scratch scratch;

  static barrier_point barrier() noexcept { return {}; }
};

struct exec_options {
  std::size_t threads = 0;             // worker threads; 0 = hardware concurrency
  std::size_t contexts_per_group = 0;  // threads cooperating on one group; 0 = auto
  // Test hook, called before each lane segment; used to perturb scheduling.
  std::function<void(std::uint32_t group, std::uint32_t lane)> schedule_jitter;
};

/// Portable worker-group executor. A launch runs `body` once per lane of
/// ceil(particle_cnt / group_size) groups and returns when all of them have
/// completed, which is the inter-launch synchronization point engines rely
/// on. Lanes of one group are striped over a team of 1..contexts_per_group
/// pool threads; each team thread sweeps its lanes one barrier segment at a
/// time, so barrier semantics hold no matter how lanes are multiplexed.
class group_runtime {
 public:
  explicit group_runtime(exec_options opts = {}) : opts_(std::move(opts)) {
    std::size_t n = opts_.threads;
    if (n == 0) {
      n = std::thread::hardware_concurrency();
      if (n == 0) n = 2;
    }
    threads_.reserve(n);
    for (std::size_t tid = 0; tid < n; ++tid)
      threads_.emplace_back([this, tid] { worker_main(tid); });
  }

  ~group_runtime() {
    quit_.store(true, std::memory_order_release);
    epoch_.fetch_add(1, std::memory_order_release);
    epoch_.notify_all();
    threads_.clear();  // joins
  }

  group_runtime(const group_runtime&) = delete;
  group_runtime& operator=(const group_runtime&) = delete;

  std::size_t thread_count() const noexcept { return threads_.size(); }

  /// Body: callable (lane_ctx) -> lane_task. aux spans back the scratch's
  /// cross-group slots; pass empty spans when the body does not use them.
  /// Not reentrant: one launch at a time per runtime.
  template <typename Body>
  void launch(std::uint32_t particle_cnt, std::uint32_t group_size,
              std::span<double> aux_fit, std::span<std::uint32_t> aux_idx, Body&& body) {
    if (particle_cnt == 0 || group_size == 0)
      throw std::invalid_argument("group_runtime::launch: counts must be >= 1");
    const std::uint32_t groups = (particle_cnt + group_size - 1) / group_size;
    const std::size_t padded = std::bit_ceil(static_cast<std::size_t>(group_size));
    const std::size_t total = threads_.size();
    std::size_t team = opts_.contexts_per_group;
    if (team == 0) team = (groups >= total) ? 1 : total / groups;
    team = std::min<std::size_t>({std::max<std::size_t>(team, 1), group_size, total});
    const std::size_t team_cnt = std::max<std::size_t>(1, total / team);
    reshape_teams(team_cnt, team, padded);

    abort_flag_.store(false, std::memory_order_relaxed);
    abort_error_ = nullptr;

    using body_type = std::remove_reference_t<Body>;
    job_.invoke = [](void* b, lane_ctx ctx) -> lane_task {
      return (*static_cast<body_type*>(b))(ctx);
    };
    job_.body = const_cast<void*>(static_cast<const void*>(std::addressof(body)));
    job_.particle_cnt = particle_cnt;
    job_.group_size = group_size;
    job_.group_count = groups;
    job_.team_size = static_cast<std::uint32_t>(team);
    job_.team_count = static_cast<std::uint32_t>(team_cnt);
    job_.aux_fit = aux_fit;
    job_.aux_idx = aux_idx;
    job_.jitter = opts_.schedule_jitter ? &opts_.schedule_jitter : nullptr;

    pending_.store(total, std::memory_order_release);
    epoch_.fetch_add(1, std::memory_order_release);
    epoch_.notify_all();
    for (;;) {
      const std::size_t left = pending_.load(std::memory_order_acquire);
      if (left == 0) break;
      pending_.wait(left, std::memory_order_acquire);
    }

    if (abort_flag_.load(std::memory_order_acquire)) {
      const std::string where = "lane body failed in group " + std::to_string(abort_group_) +
                                ", lane " + std::to_string(abort_lane_);
      try {
        std::rethrow_exception(abort_error_);
      } catch (const std::exception& e) {
        throw std::runtime_error(where + ": " + e.what());
      } catch (...) {
        throw std::runtime_error(where);
      }
    }
  }

 private:
  struct team_state {
    team_state(std::uint32_t members, std::size_t padded)
        : barrier(members), fit_q(padded), idx_q(padded), live(members, 0) {}
    detail::team_barrier barrier;
    std::vector<double> fit_q;
    std::vector<std::uint32_t> idx_q;
    std::atomic<std::uint32_t> append_count{0};
    std::vector<std::uint32_t> live;  // per-member live lane counts, current sweep
    bool sweep_done = false;          // written by the barrier completion
    bool skip_group = false;
  };

  struct launch_job {
    lane_task (*invoke)(void*, lane_ctx) = nullptr;
    void* body = nullptr;
    std::uint32_t particle_cnt = 0;
    std::uint32_t group_size = 0;
    std::uint32_t group_count = 0;
    std::uint32_t team_size = 1;
    std::uint32_t team_count = 1;
    std::span<double> aux_fit;
    std::span<std::uint32_t> aux_idx;
    const std::function<void(std::uint32_t, std::uint32_t)>* jitter = nullptr;
  };

  void reshape_teams(std::size_t team_cnt, std::size_t team_size, std::size_t padded) {
    if (teams_.size() == team_cnt && team_size_ == team_size && padded_ == padded) return;
    teams_.clear();
    teams_.reserve(team_cnt);
    for (std::size_t t = 0; t < team_cnt; ++t)
      teams_.push_back(std::make_unique<team_state>(static_cast<std::uint32_t>(team_size), padded));
    team_size_ = team_size;
    padded_ = padded;
  }

  void worker_main(std::size_t tid) {
    std::uint64_t handled = 0;  // epochs this worker has completed
    for (;;) {
      epoch_.wait(handled, std::memory_order_acquire);
      const std::uint64_t current = epoch_.load(std::memory_order_acquire);
      if (current == handled) continue;
      if (quit_.load(std::memory_order_acquire)) break;
      const launch_job job = job_;
      if (tid < static_cast<std::size_t>(job.team_size) * job.team_count) {
        const auto team = static_cast<std::uint32_t>(tid / job.team_size);
        const auto member = static_cast<std::uint32_t>(tid % job.team_size);
        try {
          run_team_member(job, team, member);
        } catch (...) {
          record_abort(no_particle, member, std::current_exception());
        }
      }
      handled = current;
      if (pending_.fetch_sub(1, std::memory_order_acq_rel) == 1) pending_.notify_all();
    }
  }

  void run_team_member(const launch_job& job, std::uint32_t team, std::uint32_t member) {
    team_state& ts = *teams_[team];
    const std::uint32_t members = job.team_size;
    std::vector<lane_task> mine;
    mine.reserve((job.group_size + members - 1) / members);

    for (std::uint32_t g = team; g < job.group_count; g += job.team_count) {
      ts.barrier.arrive_and_wait([this, &ts] {
        ts.append_count.store(0, std::memory_order_relaxed);
        ts.skip_group = abort_flag_.load(std::memory_order_relaxed);
      });
      if (ts.skip_group) break;

      group_scratch scratch{std::span(ts.fit_q), std::span(ts.idx_q), &ts.append_count,
                            job.aux_fit, job.aux_idx};
      mine.clear();
      try {
        for (std::uint32_t lane = member; lane < job.group_size; lane += members)
          mine.push_back(job.invoke(job.body, lane_ctx{g, lane, g * job.group_size + lane, scratch}));
      } catch (...) {
        record_abort(g, member, std::current_exception());
      }

      for (;;) {
        std::uint32_t live = 0;
        for (std::size_t k = 0; k < mine.size(); ++k) {
          const auto h = mine[k].handle();
          if (h.done()) continue;
          const std::uint32_t lane = member + static_cast<std::uint32_t>(k) * members;
          if (job.jitter) (*job.jitter)(g, lane);
          h.resume();
          if (h.promise().error) record_abort(g, lane, h.promise().error);
          if (!h.done()) ++live;
        }
        ts.live[member] = live;
        ts.barrier.arrive_and_wait([this, &ts, members] {
          std::uint32_t total = 0;
          for (std::uint32_t k = 0; k < members; ++k) total += ts.live[k];
          ts.sweep_done = (total == 0) || abort_flag_.load(std::memory_order_relaxed);
        });
        if (ts.sweep_done) break;
      }
      mine.clear();  // frames are freed by the thread that created them
    }
  }

  void record_abort(std::uint32_t group, std::uint32_t lane, std::exception_ptr e) {
    std::lock_guard<std::mutex> lk(abort_mu_);
    if (!abort_error_) {
      abort_error_ = std::move(e);
      abort_group_ = group;
      abort_lane_ = lane;
    }
    abort_flag_.store(true, std::memory_order_release);
  }

  exec_options opts_;
  std::vector<std::jthread> threads_;
  std::atomic<std::uint64_t> epoch_{0};
  std::atomic<std::size_t> pending_{0};
  std::atomic<bool> quit_{false};
  launch_job job_;
  std::vector<std::unique_ptr<team_state>> teams_;
  std::size_t team_size_ = 0;
  std::size_t padded_ = 0;
  std::atomic<bool> abort_flag_{false};
  std::mutex abort_mu_;
  std::exception_ptr abort_error_;
  std::uint32_t abort_group_ = 0;
  std::uint32_t abort_lane_ = 0;
};

}  // namespace psokit
