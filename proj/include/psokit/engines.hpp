#pragma once

#include <string>
#include <string_view>

#include "psokit/engine_queue.hpp"
#include "psokit/engine_reduction.hpp"
#include "psokit/engine_serial.hpp"

namespace psokit {

using engine_fn = std::function<run_result(const pso_params&, const fitness_fn&, rng_key,
                                           const exec_options&, const iteration_observer&)>;

struct engine_entry {
  std::string name;
  bool parallel;
  engine_fn run;
};

inline const std::vector<engine_entry>& engine_registry() {
  static const std::vector<engine_entry> engines = {
      {"serial", false,
       [](const pso_params& p, const fitness_fn& f, rng_key k, const exec_options&,
          const iteration_observer& obs) { return run_serial(p, f, k, obs); }},
      {"reduction", true,
       [](const pso_params& p, const fitness_fn& f, rng_key k, const exec_options& opts,
          const iteration_observer& obs) { return run_reduction(p, f, k, false, opts, obs); }},
      {"unrolled", true,
       [](const pso_params& p, const fitness_fn& f, rng_key k, const exec_options& opts,
          const iteration_observer& obs) { return run_reduction(p, f, k, true, opts, obs); }},
      {"queue", true,
       [](const pso_params& p, const fitness_fn& f, rng_key k, const exec_options& opts,
          const iteration_observer& obs) { return run_queue(p, f, k, opts, obs); }},
      {"queue-lock", true,
       [](const pso_params& p, const fitness_fn& f, rng_key k, const exec_options& opts,
          const iteration_observer& obs) { return run_queue_lock(p, f, k, opts, obs); }},
  };
  return engines;
}

inline const engine_entry& find_engine(std::string_view name) {
  for (const auto& e : engine_registry())
    if (e.name == name) return e;
  std::string known;
  for (const auto& e : engine_registry()) known += " " + e.name;
  throw std::invalid_argument("unknown engine '" + std::string(name) + "'; known:" + known);
}

}  // namespace psokit
