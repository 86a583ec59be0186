#pragma once

// Seeded draws of grid functions for probes and randomized suites.

#include <cmath>
#include <random>

#include "tame/fourier_scale.hpp"

namespace tame {

/// Uniform coefficients in [-amp, amp]^2 per mode, optionally conjugate
/// symmetrized (real-valued function) and damped by <k>^{-decay}.
inline ScaleFunction random_function(const FrequencyGrid& grid, std::mt19937_64& rng,
                                     double amplitude = 1.0, bool real_valued = false,
                                     double decay = 0.0) {
  std::uniform_real_distribution<double> u(-amplitude, amplitude);
  ScaleFunction f(grid);
  const std::size_t m = grid.modes_per_component();
  for (std::size_t i = 0; i < f.coefficients().size(); ++i) {
    Complex c{u(rng), u(rng)};
    if (decay != 0.0) {
      const Real k2 = grid.mode_abs2(i % m);
      c *= static_cast<double>(expl(-0.5L * static_cast<Real>(decay) * log1pl(k2)));
    }
    f.coefficients()[i] = c;
  }
  if (real_valued) {
    ScaleFunction g = conjugate(f);
    f += g;
    f *= Complex{0.5, 0.0};
  }
  return f;
}

} // namespace tame
