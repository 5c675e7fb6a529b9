#include <catch2/catch_amalgamated.hpp>

#include <bit>
#include <random>

#include "psokit/engine_serial.hpp"
#include "psokit/swarm.hpp"

using namespace psokit;
using Catch::Matchers::ContainsSubstring;

namespace {

bool bits_equal(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  return true;
}

pso_params tiny_params(std::uint32_t particles, std::uint32_t dims) {
  pso_params p;
  p.particle_cnt = particles;
  p.dims = dims;
  p.max_iter = 1;
  p.min_v = -100.0;
  p.max_v = 100.0;
  return p;
}

}  // namespace

TEST_CASE("parameter validation names the violated bound", "[swarm]") {
  pso_params p = tiny_params(4, 2);
  REQUIRE_NOTHROW(p.validate());

  p.min_pos = p.max_pos = 1.0;
  CHECK_THROWS_WITH(p.validate(), ContainsSubstring("min_pos"));
  p = tiny_params(4, 2);
  p.min_v = 1.0;
  p.max_v = 0.0;
  CHECK_THROWS_WITH(p.validate(), ContainsSubstring("min_v"));
  p = tiny_params(0, 2);
  CHECK_THROWS_WITH(p.validate(), ContainsSubstring("particle_cnt"));
  p = tiny_params(4, 0);
  CHECK_THROWS_WITH(p.validate(), ContainsSubstring("dims"));
  p = tiny_params(4, 2);
  p.max_iter = 0;
  CHECK_THROWS_WITH(p.validate(), ContainsSubstring("max_iter"));
  p = tiny_params(4, 2);
  p.group_size = 0;
  CHECK_THROWS_WITH(p.validate(), ContainsSubstring("group_size"));

  // pinned velocities are a legal degenerate configuration
  p = tiny_params(4, 2);
  p.min_v = p.max_v = 0.0;
  REQUIRE_NOTHROW(p.validate());
}

TEST_CASE("init keeps positions inside a near-degenerate box", "[swarm]") {
  pso_params p = tiny_params(1, 1);
  p.min_pos = 1.0;
  p.max_pos = 1.0 + 1e-9;
  p.min_v = p.max_v = 0.0;
  const fitness_fn flat{"flat", 0.0, 2.0, [](strided_view) { return 0.0; }};
  swarm_state s;
  global_best gb;
  init_swarm(p, rng_key{3}, flat, s, gb);
  REQUIRE(s.positions[0] >= p.min_pos);
  REQUIRE(s.positions[0] <= p.max_pos);
}

TEST_CASE("initial global best is the max of the initial fitness", "[swarm]") {
  const auto& cubic = find_fitness("cubic");
  pso_params p = tiny_params(3, 1);
  swarm_state s;
  global_best gb;
  init_swarm(p, rng_key{11}, cubic, s, gb);
  REQUIRE(s.fitness.size() == 3);
  const double expected = std::max({s.fitness[0], s.fitness[1], s.fitness[2]});
  CHECK(gb.fit == expected);
  CHECK(gb.lock.load() == 0);
  CHECK(s.pbest_fit == s.fitness);
  CHECK(bits_equal(s.pbest_pos, s.positions));
}

TEST_CASE("init is bitwise reproducible", "[swarm]") {
  const auto& cubic = find_fitness("cubic");
  pso_params p = tiny_params(128, 120);
  swarm_state a, b;
  global_best ga, gbb;
  init_swarm(p, rng_key{0xfeed}, cubic, a, ga);
  init_swarm(p, rng_key{0xfeed}, cubic, b, gbb);
  CHECK(bits_equal(a.positions, b.positions));
  CHECK(bits_equal(a.velocities, b.velocities));
  CHECK(bits_equal(a.fitness, b.fitness));
  CHECK(ga.fit == gbb.fit);
  CHECK(ga.particle == gbb.particle);
  CHECK(bits_equal(ga.pos, gbb.pos));
}

TEST_CASE("velocity update pinned cases", "[swarm]") {
  SECTION("at a fixed point with w = 1 the velocity is unchanged") {
    pso_params p = tiny_params(1, 1);
    CHECK(velocity_step(7.0, 5.0, 5.0, 5.0, p, 0.3, 0.9) == 7.0);
  }
  SECTION("zero random terms leave only inertia") {
    pso_params p = tiny_params(1, 1);
    p.inertia = 0.5;
    CHECK(velocity_step(10.0, 0.0, 3.0, 4.0, p, 0.0, 0.0) == 5.0);
  }
  SECTION("the w=1, c1=c2=2 arithmetic") {
    pso_params p = tiny_params(1, 1);  // defaults: w=1, c1=c2=2
    CHECK(velocity_step(0.0, 0.0, 1.0, 2.0, p, 0.5, 0.5) == 3.0);
    p.max_v = 2.5;
    CHECK(velocity_step(0.0, 0.0, 1.0, 2.0, p, 0.5, 0.5) == 2.5);
  }
  SECTION("array form matches the per-axis rule") {
    const auto& cubic = find_fitness("cubic");
    pso_params p = tiny_params(2, 3);
    swarm_state s;
    global_best gb;
    init_swarm(p, rng_key{5}, cubic, s, gb);
    const std::vector<double> r1{0.1, 0.5, 0.9}, r2{0.2, 0.4, 0.8};
    std::vector<double> expect(3);
    for (std::uint32_t d = 0; d < 3; ++d) {
      const std::size_t at = soa_index(1, d, 2);
      expect[d] = velocity_step(s.velocities[at], s.positions[at], s.pbest_pos[at], gb.pos[d], p,
                                r1[d], r2[d]);
    }
    update_velocity(s, p, 1, gb.pos, r1, r2);
    for (std::uint32_t d = 0; d < 3; ++d) CHECK(s.velocities[soa_index(1, d, 2)] == expect[d]);
  }
}

TEST_CASE("position update pinned cases", "[swarm]") {
  pso_params p = tiny_params(1, 1);
  CHECK(position_step(42.0, 0.0, p) == 42.0);
  CHECK(position_step(99.0, 5.0, p) == 100.0);
  CHECK(position_step(-100.0, -1.0, p) == -100.0);
}

TEST_CASE("personal best updates only on strict improvement", "[swarm]") {
  const auto& cubic = find_fitness("cubic");
  pso_params p = tiny_params(1, 1);
  swarm_state s;
  global_best gb;
  init_swarm(p, rng_key{17}, cubic, s, gb);
  const double before = s.pbest_fit[0];
  CHECK_FALSE(update_pbest(s, 0, before));
  CHECK(s.pbest_fit[0] == before);
  s.positions[0] = clamp_position(s.positions[0] + 1.0, p);
  CHECK(update_pbest(s, 0, before + 1.0));
  CHECK(s.pbest_fit[0] == before + 1.0);
  CHECK(s.pbest_pos[0] == s.positions[0]);
}

TEST_CASE("clamping is idempotent", "[swarm]") {
  pso_params p = tiny_params(1, 1);
  p.min_v = -3.0;
  p.max_v = 7.0;
  std::mt19937 gen(23);
  std::uniform_real_distribution<double> wild(-500.0, 500.0);
  for (int i = 0; i < 1000; ++i) {
    const double x = wild(gen);
    CHECK(clamp_velocity(clamp_velocity(x, p), p) == clamp_velocity(x, p));
    CHECK(clamp_position(clamp_position(x, p), p) == clamp_position(x, p));
  }
}

TEST_CASE("updates keep every component inside its bounds", "[swarm]") {
  const auto& cubic = find_fitness("cubic");
  pso_params p = tiny_params(16, 4);
  p.max_iter = 20;
  p.min_v = -15.0;
  p.max_v = 15.0;
  swarm_state s;
  global_best gb;
  init_swarm(p, rng_key{29}, cubic, s, gb);
  for (std::uint32_t t = 0; t < p.max_iter; ++t) {
    const std::vector<double> snap = gb.pos;
    for (std::uint32_t i = 0; i < p.particle_cnt; ++i) advance_particle(s, p, cubic, {29}, t, i, snap);
    for (const double v : s.velocities) {
      REQUIRE(v >= p.min_v);
      REQUIRE(v <= p.max_v);
    }
    for (const double x : s.positions) {
      REQUIRE(x >= p.min_pos);
      REQUIRE(x <= p.max_pos);
    }
  }
}

TEST_CASE("personal bests never decrease", "[swarm]") {
  const auto& cubic = find_fitness("cubic");
  pso_params p = tiny_params(8, 2);
  p.max_iter = 30;
  swarm_state s;
  global_best gb;
  init_swarm(p, rng_key{31}, cubic, s, gb);
  std::vector<double> last = s.pbest_fit;
  for (std::uint32_t t = 0; t < p.max_iter; ++t) {
    const std::vector<double> snap = gb.pos;
    for (std::uint32_t i = 0; i < p.particle_cnt; ++i) advance_particle(s, p, cubic, {31}, t, i, snap);
    for (std::uint32_t i = 0; i < p.particle_cnt; ++i) REQUIRE(s.pbest_fit[i] >= last[i]);
    last = s.pbest_fit;
  }
}

TEST_CASE("SoA flat index is axis-major and round-trips", "[swarm]") {
  const std::uint32_t particles = 7, dims = 5;
  CHECK(soa_index(3, 2, particles) == 2 * particles + 3);
  std::vector<double> flat(particles * dims, 0.0);
  for (std::uint32_t i = 0; i < particles; ++i)
    for (std::uint32_t d = 0; d < dims; ++d) flat[soa_index(i, d, particles)] = i * 1000.0 + d;
  for (std::uint32_t i = 0; i < particles; ++i)
    for (std::uint32_t d = 0; d < dims; ++d)
      REQUIRE(flat[soa_index(i, d, particles)] == i * 1000.0 + d);
}

TEST_CASE("one improving step adopts the new point as pbest", "[swarm]") {
  // replay of the first serial iteration with the raw update rules
  const auto& cubic = find_fitness("cubic");
  pso_params p = tiny_params(4, 2);
  const rng_key key{41};

  swarm_state replay;
  global_best gb;
  init_swarm(p, key, cubic, replay, gb);
  const std::vector<double> snap = gb.pos;
  std::vector<double> expected_pbest_fit(p.particle_cnt);
  for (std::uint32_t i = 0; i < p.particle_cnt; ++i) {
    std::vector<double> r1(p.dims), r2(p.dims);
    for (std::uint32_t d = 0; d < p.dims; ++d) {
      r1[d] = uniform01(key, {0, i, d, draw_slot::r1});
      r2[d] = uniform01(key, {0, i, d, draw_slot::r2});
    }
    update_velocity(replay, p, i, snap, r1, r2);
    update_position(replay, p, i);
    const double fit = cubic.eval(replay.particle_position(i));
    const double old = replay.pbest_fit[i];
    update_pbest(replay, i, fit);
    expected_pbest_fit[i] = std::max(old, fit);
    if (fit > old)
      for (std::uint32_t d = 0; d < p.dims; ++d)
        REQUIRE(replay.pbest_pos[soa_index(i, d, p.particle_cnt)] ==
                replay.positions[soa_index(i, d, p.particle_cnt)]);
  }

  swarm_state engine_state;
  run_serial(p, cubic, key,
             [&](std::uint32_t, const swarm_state& s, const global_best&) { engine_state = s; });
  CHECK(bits_equal(engine_state.positions, replay.positions));
  CHECK(bits_equal(engine_state.velocities, replay.velocities));
  CHECK(bits_equal(engine_state.pbest_fit, expected_pbest_fit));
  CHECK(bits_equal(engine_state.pbest_pos, replay.pbest_pos));
}
