#pragma once

// Shared generators for property-style tests.

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "servobench/dataset.hpp"
#include "servobench/friction.hpp"

namespace servobench::testing {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Random valid coefficients for `model`: coefficients in [0, 0.5],
/// v_s in [0.01, 2], alpha in [0.1, 3].
inline FrictionParams random_friction(FrictionModel model, std::mt19937_64& rng) {
  FrictionParams p = FrictionParams::zero(model);
  for (auto name : p.names()) {
    if (name == "v_s") {
      p.set(name, uniform(rng, 0.01, 2.0));
    } else if (name == "alpha") {
      p.set(name, uniform(rng, 0.1, 3.0));
    } else {
      p.set(name, uniform(rng, 0.0, 0.5));
    }
  }
  return p;
}

inline FrictionInputs random_inputs(std::mt19937_64& rng, double torque = 20.0,
                                    double speed = 20.0) {
  FrictionInputs in{uniform(rng, -torque, torque), uniform(rng, -torque, torque),
                    uniform(rng, -speed, speed)};
  // Exercise the exact-zero and equal-magnitude special cases now and then.
  std::uniform_int_distribution<int> pick(0, 15);
  switch (pick(rng)) {
    case 0: in.omega = 0.0; break;
    case 1: in.tau_e = -in.tau_m; break;
    case 2: in.tau_e = in.tau_m; break;
    default: break;
  }
  return in;
}

/// Any finite double, drawn from raw bit patterns half of the time so that
/// subnormals, huge exponents and negative zero show up.
inline double random_finite(std::mt19937_64& rng) {
  if (rng() % 2 == 0) return uniform(rng, -10.0, 10.0);
  for (;;) {
    double v = std::bit_cast<double>(rng());
    if (std::isfinite(v)) return v;
  }
}

/// A structurally valid log with randomized header, timing and samples.
inline TrajectoryLog random_log(std::mt19937_64& rng, std::size_t max_samples = 200) {
  TrajectoryLog log;
  log.header.id = "log-" + std::to_string(rng() % 100000);
  log.header.trajectory = kAllTrajectoryTypes[rng() % kAllTrajectoryTypes.size()];
  log.header.bench = {.m = uniform(rng, 0.0, 20.0), .l = uniform(rng, 0.01, 1.0),
                      .g = uniform(rng, 0.1, 20.0), .dt = uniform(rng, 1e-4, 1e-2)};
  ActuatorModel& a = log.header.actuator;
  a.law.kind = static_cast<LawKind>(rng() % 3);
  a.law.gains = {uniform(rng, 0.0, 50.0), uniform(rng, 0.0, 5.0), uniform(rng, 0.0, 2.0),
                 uniform(rng, 0.1, 10.0)};
  a.law.period = log.header.bench.dt * static_cast<double>(rng() % 4);
  a.motor = {.k_t = uniform(rng, 0.1, 20.0), .R = uniform(rng, 0.05, 50.0),
             .U_max = uniform(rng, 1.0, 48.0), .J_m = uniform(rng, 0.0, 0.1)};
  if (rng() % 2) a.motor.I_heat = uniform(rng, 0.5, 20.0);
  if (rng() % 2) log.ground_truth = random_friction(kAllFrictionModels[rng() % 6], rng);

  const std::size_t n = 2 + rng() % (max_samples - 1);
  const double t0 = uniform(rng, -5.0, 5.0);
  for (std::size_t k = 0; k < n; ++k) {
    log.t.push_back(t0 + static_cast<double>(k) * log.header.bench.dt);
    if (rng() % 8 == 0) {
      log.target.push_back(std::nullopt);
    } else {
      log.target.push_back(random_finite(rng));
    }
    log.measured.push_back(random_finite(rng));
  }
  return log;
}

}  // namespace servobench::testing
