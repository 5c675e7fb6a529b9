#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "psokit/engines.hpp"

namespace psokit {

/// Mean after discarding exactly one minimum and one maximum.
inline double trimmed_mean(std::span<const double> xs) {
  if (xs.size() < 3)
    throw std::invalid_argument("trimmed_mean: need at least 3 samples to drop min and max");
  std::vector<double> sorted(xs.begin(), xs.end());
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (std::size_t i = 1; i + 1 < sorted.size(); ++i) sum += sorted[i];
  return sum / static_cast<double>(sorted.size() - 2);
}

/// FNV-1a over the exact bit patterns of the trace; 16 hex digits.
inline std::string trace_checksum(std::span<const double> trace) {
  std::uint64_t h = 1469598103934665603ull;
  for (const double v : trace) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) {
      h ^= bits & 0xffu;
      h *= 1099511628211ull;
      bits >>= 8;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct bench_config {
  std::string engine = "serial";
  std::uint32_t particles = 1024;
  std::uint32_t dims = 1;
  std::uint32_t iters = 1000;
  std::uint32_t group_size = 128;
  std::vector<std::uint64_t> seeds{1};
  std::uint32_t repeat = 10;
  std::string fitness = "cubic";
  std::string out_path;  // empty: no CSV file
  std::size_t threads = 0;

  void validate() const {
    if (repeat < 3)
      throw std::invalid_argument(
          "bench_config: repeat must be >= 3 (the trimmed mean drops one min and one max)");
    if (seeds.empty()) throw std::invalid_argument("bench_config: need at least one seed");
    find_engine(engine);
    find_fitness(fitness);
  }
};

/// One benchmarked (config, seed) cell: per-run wall times of the compute
/// loop, their trimmed mean, and the determinism audit fields.
struct bench_record {
  std::string engine;
  std::uint32_t particles = 0;
  std::uint32_t dims = 1;
  std::uint32_t iters = 1;
  std::uint64_t seed = 1;
  std::vector<double> seconds;  // indexed by run
  double final_gbest_fit = 0.0;
  std::string checksum;

  double trimmed_mean_seconds() const { return trimmed_mean(seconds); }
};

inline constexpr const char* csv_header =
    "engine,particles,dims,iters,seed,run_idx,seconds,final_gbest_fit,trace_checksum";

inline void write_csv_row(std::ostream& out, const bench_record& rec, std::uint32_t run_idx) {
  char num[32];
  out << rec.engine << ',' << rec.particles << ',' << rec.dims << ',' << rec.iters << ','
      << rec.seed << ',' << run_idx << ',';
  std::snprintf(num, sizeof num, "%.17g", rec.seconds[run_idx]);
  out << num << ',';
  std::snprintf(num, sizeof num, "%.17g", rec.final_gbest_fit);
  out << num << ',' << rec.checksum << '\n';
}

/// Runs `repeat` timed runs per seed. Every run of a (config, seed) cell must
/// produce the same trace checksum; a mismatch aborts the benchmark, since it
/// would mean an engine lost determinism.
inline std::vector<bench_record> run_bench(const bench_config& cfg) {
  cfg.validate();
  const engine_entry& engine = find_engine(cfg.engine);
  const fitness_fn& fitness = find_fitness(cfg.fitness);
  const pso_params params = make_params(fitness, cfg.particles, cfg.dims, cfg.iters, cfg.group_size);
  exec_options opts;
  opts.threads = cfg.threads;

  std::ofstream csv;
  if (!cfg.out_path.empty()) {
    const bool fresh = !std::ifstream(cfg.out_path).good();
    csv.open(cfg.out_path, std::ios::app);
    if (!csv) throw std::runtime_error("cannot open output file: " + cfg.out_path);
    if (fresh) csv << csv_header << '\n';
  }

  std::vector<bench_record> records;
  for (const std::uint64_t seed : cfg.seeds) {
    bench_record rec;
    rec.engine = cfg.engine;
    rec.particles = cfg.particles;
    rec.dims = cfg.dims;
    rec.iters = cfg.iters;
    rec.seed = seed;
    for (std::uint32_t run = 0; run < cfg.repeat; ++run) {
      const run_result res = engine.run(params, fitness, rng_key{seed}, opts, {});
      rec.seconds.push_back(res.compute_seconds);
      const std::string sum = trace_checksum(res.trace);
      if (run == 0) {
        rec.final_gbest_fit = res.gbest_fit;
        rec.checksum = sum;
      } else if (sum != rec.checksum) {
        throw std::runtime_error("determinism violation: engine " + cfg.engine + " seed " +
                                 std::to_string(seed) + " produced differing traces");
      }
      if (csv.is_open()) write_csv_row(csv, rec, run);
    }
    records.push_back(std::move(rec));
  }
  if (csv.is_open() && !csv.flush())
    throw std::runtime_error("write failed: " + cfg.out_path);
  return records;
}

/// Re-reads records from CSV rows (inverse of write_csv_row; loss-free for
/// the persisted fields).
inline std::vector<bench_record> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != csv_header)
    throw std::runtime_error("bad CSV: missing or unexpected header");
  std::map<std::tuple<std::string, std::uint32_t, std::uint32_t, std::uint32_t, std::uint64_t>,
           bench_record>
      cells;
  std::vector<decltype(cells)::key_type> order;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream row(line);
    std::string col;
    while (std::getline(row, col, ',')) cols.push_back(col);
    if (cols.size() != 9) throw std::runtime_error("bad CSV row: " + line);
    bench_record rec;
    rec.engine = cols[0];
    rec.particles = static_cast<std::uint32_t>(std::stoul(cols[1]));
    rec.dims = static_cast<std::uint32_t>(std::stoul(cols[2]));
    rec.iters = static_cast<std::uint32_t>(std::stoul(cols[3]));
    rec.seed = std::stoull(cols[4]);
    const auto run_idx = static_cast<std::uint32_t>(std::stoul(cols[5]));
    const double secs = std::strtod(cols[6].c_str(), nullptr);
    rec.final_gbest_fit = std::strtod(cols[7].c_str(), nullptr);
    rec.checksum = cols[8];
    const auto key = std::make_tuple(rec.engine, rec.particles, rec.dims, rec.iters, rec.seed);
    auto it = cells.find(key);
    if (it == cells.end()) {
      it = cells.emplace(key, std::move(rec)).first;
      order.push_back(key);
    }
    auto& cell = it->second;
    if (cell.seconds.size() != run_idx)
      throw std::runtime_error("bad CSV: run_idx out of order in " + line);
    cell.seconds.push_back(secs);
  }
  std::vector<bench_record> records;
  records.reserve(order.size());
  for (const auto& key : order) records.push_back(std::move(cells.at(key)));
  return records;
}

/// Comparison table mirroring the timing-report layout: one row per
/// (cell, engine), with the serial baseline and the speedup ratio
/// serial/engine. Rows within a cell are ordered fastest first. Every cell
/// must come with a serial baseline record.
inline std::string render_table(std::span<const bench_record> records, bool markdown = true) {
  using cell_key = std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>;  // particles, dims, iters
  std::map<cell_key, double> baseline_sum;
  std::map<cell_key, int> baseline_cnt;
  std::map<cell_key, std::map<std::string, std::pair<double, int>>> engines;
  for (const auto& rec : records) {
    const cell_key key{rec.particles, rec.dims, rec.iters};
    if (rec.engine == "serial") {
      baseline_sum[key] += rec.trimmed_mean_seconds();
      baseline_cnt[key] += 1;
    } else {
      auto& slot = engines[key][rec.engine];
      slot.first += rec.trimmed_mean_seconds();
      slot.second += 1;
    }
  }
  std::string out;
  if (markdown) {
    out += "| engine | particles | dims | iters | serial (s) | engine (s) | speedup |\n";
    out += "|---|---:|---:|---:|---:|---:|---:|\n";
  } else {
    out += "engine,particles,dims,iters,serial_seconds,engine_seconds,speedup\n";
  }
  for (const auto& [key, per_engine] : engines) {
    const auto [particles, dims, iters] = key;
    if (baseline_cnt.find(key) == baseline_cnt.end())
      throw std::invalid_argument("render_table: no serial baseline for particles=" +
                                  std::to_string(particles) + " dims=" + std::to_string(dims) +
                                  " iters=" + std::to_string(iters));
    const double serial_s = baseline_sum[key] / baseline_cnt[key];
    std::vector<std::pair<std::string, double>> rows;
    for (const auto& [name, slot] : per_engine) rows.emplace_back(name, slot.first / slot.second);
    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return a.second < b.second; });
    for (const auto& [name, engine_s] : rows) {
      char buf[160];
      if (markdown)
        std::snprintf(buf, sizeof buf, "| %s | %u | %u | %u | %.3f | %.3f | %.2f |\n",
                      name.c_str(), particles, dims, iters, serial_s, engine_s,
                      serial_s / engine_s);
      else
        std::snprintf(buf, sizeof buf, "%s,%u,%u,%u,%.3f,%.3f,%.2f\n", name.c_str(), particles,
                      dims, iters, serial_s, engine_s, serial_s / engine_s);
      out += buf;
    }
  }
  return out;
}

struct sweep_cell {
  std::uint32_t particles;
  std::uint32_t iters;
};

/// 1D sweep particle column; full scale fixes 100k iterations, desk scale
/// shrinks them to 1k.
inline std::vector<sweep_cell> sweep_1d(bool paper_scale) {
  const std::uint32_t iters = paper_scale ? 100000 : 1000;
  std::vector<sweep_cell> cells;
  for (std::uint32_t particles = 128; particles <= 131072; particles *= 2)
    cells.push_back({particles, iters});
  return cells;
}

/// 120D sweep: the (particles, iterations) pairs of the high-dimension
/// report; desk scale caps iterations at 1k.
inline std::vector<sweep_cell> sweep_120d(bool paper_scale) {
  std::vector<sweep_cell> cells = {
      {128, 5000},  {256, 4000},   {512, 3000},   {1024, 2000},  {2048, 2000},  {4096, 1500},
      {8192, 1000}, {16384, 1000}, {32768, 1000}, {65536, 1000}, {131072, 800},
  };
  if (!paper_scale)
    for (auto& c : cells) c.iters = std::min<std::uint32_t>(c.iters, 1000);
  return cells;
}

}  // namespace psokit
