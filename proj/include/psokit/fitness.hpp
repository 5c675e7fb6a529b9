#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace psokit {

/// Read-only view over one particle's coordinates inside an axis-major SoA
/// block (stride = particle count). A contiguous vector is the stride-1 case.
struct strided_view {
  const double* data = nullptr;
  std::size_t size = 0;
  std::size_t stride = 1;

  double operator[](std::size_t i) const noexcept { return data[i * stride]; }
};

/// An objective to MAXIMIZE over the box [lo, hi]^dims. `eval` performs no
/// domain check; engines keep their inputs inside the box by clamping.
/// Evaluation accumulates axis terms in ascending order so every engine
/// produces bit-identical fitness values.
struct fitness_fn {
  std::string name;
  double lo = 0.0;
  double hi = 0.0;
  std::function<double(strided_view)> eval;

  /// Checked evaluation for external inputs.
  double operator()(std::span<const double> x) const {
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!(x[i] >= lo && x[i] <= hi))
        throw std::domain_error(name + ": component " + std::to_string(i) +
                                " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    return eval(strided_view{x.data(), x.size(), 1});
  }
};

/// sum_d x^3 - 0.8 x^2 - 1000 x + 8000 on [-100, 100]^d.
/// Box maximum is at x = 100 on every axis (900000 per axis).
inline double cubic_fitness(strided_view x) noexcept {
  double acc = 0.0;
  for (std::size_t d = 0; d < x.size; ++d) {
    const double v = x[d];
    acc += ((v - 0.8) * v - 1000.0) * v + 8000.0;
  }
  return acc;
}

/// -sum_d x^2 on [-100, 100]^d; maximum 0 at the origin.
inline double sphere_fitness(strided_view x) noexcept {
  double acc = 0.0;
  for (std::size_t d = 0; d < x.size; ++d) acc += x[d] * x[d];
  return -acc;
}

/// -sum_{d<n-1} [100 (x_{d+1} - x_d^2)^2 + (1 - x_d)^2] on [-2.048, 2.048]^d;
/// maximum 0 at the all-ones point (and everywhere when d == 1).
inline double rosenbrock_fitness(strided_view x) noexcept {
  double acc = 0.0;
  for (std::size_t d = 0; d + 1 < x.size; ++d) {
    const double a = x[d + 1] - x[d] * x[d];
    const double b = 1.0 - x[d];
    acc += 100.0 * a * a + b * b;
  }
  return -acc;
}

/// -(1 + sum_d x^2/4000 - prod_d cos(x_d / sqrt(d+1))) on [-600, 600]^d;
/// maximum 0 at the origin.
inline double griewank_fitness(strided_view x) noexcept {
  double sum = 0.0;
  double prod = 1.0;
  for (std::size_t d = 0; d < x.size; ++d) {
    sum += x[d] * x[d] / 4000.0;
    prod *= std::cos(x[d] / std::sqrt(static_cast<double>(d + 1)));
  }
  return -(1.0 + sum - prod);
}

inline const std::vector<fitness_fn>& fitness_registry() {
  static const std::vector<fitness_fn> fns = {
      {"cubic", -100.0, 100.0, cubic_fitness},
      {"sphere", -100.0, 100.0, sphere_fitness},
      {"rosenbrock", -2.048, 2.048, rosenbrock_fitness},
      {"griewank", -600.0, 600.0, griewank_fitness},
  };
  return fns;
}

inline const fitness_fn& find_fitness(std::string_view name) {
  for (const auto& f : fitness_registry())
    if (f.name == name) return f;
  std::string known;
  for (const auto& f : fitness_registry()) known += " " + f.name;
  throw std::invalid_argument("unknown fitness '" + std::string(name) + "'; known:" + known);
}

}  // namespace psokit
