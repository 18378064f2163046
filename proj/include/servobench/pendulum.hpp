#pragma once

// Pendulum test bench: a servo carrying a rigid link of length l with a
// point mass m. theta = 0 is the upward vertical, so gravity contributes
// tau_e = m g l sin(theta) and the hanging rest position is theta = pi.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "servobench/actuator.hpp"
#include "servobench/errors.hpp"
#include "servobench/friction.hpp"

namespace servobench {

struct BenchConfig {
  double m = 0.0;
  double l = 0.0;
  double g = 9.81;
  double dt = 0.001;

  void validate() const {
    if (!std::isfinite(m) || m < 0.0) throw DomainError("mass must be >= 0");
    if (!std::isfinite(l) || l < 0.0) throw DomainError("length must be >= 0");
    if (!std::isfinite(g) || !(g > 0.0)) throw DomainError("g must be > 0");
    if (!std::isfinite(dt) || !(dt > 0.0)) throw DomainError("dt must be > 0");
  }

  friend bool operator==(const BenchConfig&, const BenchConfig&) = default;
};

struct SimState {
  double theta = 0.0;
  double omega = 0.0;

  friend bool operator==(const SimState&, const SimState&) = default;
};

struct StepTrace {
  double tau_m = 0.0;
  double tau_e = 0.0;
  double budget = 0.0;
  double tau_f = 0.0;
};

/// Total inertia m l^2 + J_m seen by the joint.
inline double bench_inertia(const BenchConfig& bench, const MotorElectrical& motor) {
  double J = bench.m * bench.l * bench.l + motor.J_m;
  if (!(J > 0.0)) {
    throw ConfigError("total inertia m*l^2 + J_m must be > 0");
  }
  return J;
}

inline double gravity_torque(const BenchConfig& bench, double theta) {
  return bench.m * bench.g * bench.l * std::sin(theta);
}

/// One integration step for a given motor torque.
///
/// When friction can hold the joint (|stop| <= budget) the next velocity is
/// exactly zero. Otherwise it is confined to the interval between zero and
/// the friction-free velocity, which only removes rounding-level overshoot.
inline SimState integrate_step(const BenchConfig& bench, double inertia,
                               const FrictionTerms& friction, SimState s,
                               double tau_m, StepTrace* trace = nullptr) {
  const double dt = bench.dt;
  double tau_e = gravity_torque(bench, s.theta);
  double budget = budget_unchecked(friction, tau_m, tau_e, s.omega);
  double stop = -(inertia / dt * s.omega + tau_m + tau_e);
  bool sticks = std::abs(stop) <= budget;
  double tau_f = sticks ? stop : std::clamp(stop, -budget, budget);
  double acc = (tau_m + tau_e + tau_f) / inertia;

  SimState next;
  if (sticks) {
    next.omega = 0.0;
  } else {
    double v = s.omega + acc * dt;
    double v_free = s.omega + (tau_m + tau_e) / inertia * dt;
    next.omega = std::clamp(v, std::min(0.0, v_free), std::max(0.0, v_free));
  }
  next.theta = s.theta + s.omega * dt + acc * 0.5 * dt * dt;

  if (trace) *trace = {tau_m, tau_e, budget, tau_f};
  return next;
}

/// Checked single step with an explicit servo (controller state included).
inline SimState step(const BenchConfig& bench, Servo& servo,
                     const FrictionParams& friction, SimState s,
                     std::optional<double> target,
                     StepTrace* trace = nullptr) {
  bench.validate();
  friction.validate();
  detail::require_finite(s.theta, "theta");
  detail::require_finite(s.omega, "omega");
  double J = bench_inertia(bench, servo.model().motor);
  double tau_m = servo(s.theta, s.omega, target);
  return integrate_step(bench, J, friction.terms(), s, tau_m, trace);
}

/// Runs the bench over a target series; `visit(k, state)` is called for
/// every sample k in [0, n), state 0 being the initial state. Returns false
/// if the state became non-finite (the remaining samples are not visited).
///
/// Target k drives the transition from sample k-1 to sample k, so target 0
/// is never used by the dynamics.
template <typename Visitor>
bool simulate(const BenchConfig& bench, const ActuatorModel& actuator,
              const FrictionTerms& friction, SimState initial,
              std::span<const std::optional<double>> targets, Visitor&& visit) {
  if (targets.empty()) return true;
  const double J = bench_inertia(bench, actuator.motor);
  Servo servo(actuator, bench.dt);
  SimState s = initial;
  StepTrace trace;
  visit(std::size_t{0}, s, static_cast<const StepTrace*>(nullptr));
  for (std::size_t k = 1; k < targets.size(); ++k) {
    double tau_m = servo(s.theta, s.omega, targets[k]);
    s = integrate_step(bench, J, friction, s, tau_m, &trace);
    if (!std::isfinite(s.theta) || !std::isfinite(s.omega)) return false;
    visit(k, s, static_cast<const StepTrace*>(&trace));
  }
  return true;
}

struct Rollout {
  std::vector<double> theta;
  std::vector<double> omega;
  // Per transition k -> k+1 (size n - 1).
  std::vector<double> tau_m;
  std::vector<double> tau_e;
  std::vector<double> budget;
  std::vector<double> tau_f;
  bool diverged = false;
};

inline Rollout rollout(const BenchConfig& bench, const ActuatorModel& actuator,
                       const FrictionParams& friction, SimState initial,
                       std::span<const std::optional<double>> targets) {
  bench.validate();
  actuator.validate();
  friction.validate();
  Rollout out;
  out.theta.reserve(targets.size());
  out.omega.reserve(targets.size());
  bool ok = simulate(bench, actuator, friction.terms(), initial, targets,
                     [&](std::size_t, const SimState& s, const StepTrace* tr) {
                       out.theta.push_back(s.theta);
                       out.omega.push_back(s.omega);
                       if (tr) {
                         out.tau_m.push_back(tr->tau_m);
                         out.tau_e.push_back(tr->tau_e);
                         out.budget.push_back(tr->budget);
                         out.tau_f.push_back(tr->tau_f);
                       }
                     });
  if (!ok) throw NumericalError("rollout diverged (non-finite state)");
  return out;
}

// ---------------------------------------------------------------------------
// Drive / backdrive analysis

enum class BoundKind { Finite, Unbounded, BeyondRange };

struct Bound {
  BoundKind kind = BoundKind::Finite;
  double value = 0.0;

  bool finite() const { return kind == BoundKind::Finite; }
};

/// Extremal external torques of the static area at a motor torque.
/// drive is the upper end (largest tau_e), backdrive the lower end.
struct StaticBoundary {
  double tau_m = 0.0;
  Bound drive;
  Bound backdrive;
};

inline constexpr double kBoundarySearchRange = 1e3;

namespace detail {

inline bool holds_static(const FrictionTerms& t, double tau_m, double tau_e,
                         double omega) {
  return std::abs(tau_m + tau_e) <= budget_unchecked(t, tau_m, tau_e, omega);
}

/// Walks from the equilibrium line in direction `dir` (+1 / -1) with
/// doubling steps until the static inequality fails, then bisects.
inline Bound search_boundary(const FrictionTerms& t, double tau_m, double omega,
                             double dir) {
  const double start = -tau_m;
  const double limit = dir * kBoundarySearchRange;
  auto past_limit = [&](double x) { return dir > 0 ? x >= limit : x <= limit; };

  if (past_limit(start)) {
    return {BoundKind::BeyondRange, limit};
  }
  double inside = start;
  double outside = std::numeric_limits<double>::quiet_NaN();
  double h = 1e-6;
  while (true) {
    double x = start + dir * h;
    if (past_limit(x)) x = limit;
    if (!holds_static(t, tau_m, x, omega)) {
      outside = x;
      break;
    }
    inside = x;
    if (x == limit) break;
    h *= 2.0;
  }
  if (std::isnan(outside)) {
    double slope = external_load_slope(t, omega);
    return {slope >= 1.0 ? BoundKind::Unbounded : BoundKind::BeyondRange,
            dir * std::numeric_limits<double>::infinity()};
  }
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (inside + outside);
    if (mid == inside || mid == outside) break;
    if (holds_static(t, tau_m, mid, omega)) {
      inside = mid;
    } else {
      outside = mid;
    }
  }
  return {BoundKind::Finite, inside};
}

}  // namespace detail

/// Static-area boundary at motor torque tau_m and joint speed |omega|
/// (the budget is evaluated at that speed). Searches |tau_e| <= 1e3 N.m.
inline StaticBoundary static_boundary(const FrictionParams& friction,
                                      double tau_m, double omega = 0.0) {
  friction.validate();
  detail::require_finite(tau_m, "tau_m");
  detail::require_finite(omega, "omega");
  FrictionTerms t = friction.terms();
  double speed = std::abs(omega);
  return {tau_m, detail::search_boundary(t, tau_m, speed, +1.0),
          detail::search_boundary(t, tau_m, speed, -1.0)};
}

struct DiagramRow {
  double tau_m = 0.0;
  double velocity = 0.0;
  Bound drive;
  Bound backdrive;
};

inline std::vector<DiagramRow> diagram(const FrictionParams& friction,
                                       std::span<const double> tau_m_grid,
                                       std::span<const double> velocity_levels) {
  if (tau_m_grid.empty()) throw ConfigError("diagram needs a non-empty tau_m grid");
  if (velocity_levels.empty()) {
    throw ConfigError("diagram needs at least one velocity level");
  }
  std::vector<DiagramRow> rows;
  rows.reserve(tau_m_grid.size() * velocity_levels.size());
  for (double v : velocity_levels) {
    for (double tm : tau_m_grid) {
      StaticBoundary b = static_boundary(friction, tm, v);
      rows.push_back({tm, v, b.drive, b.backdrive});
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Coulomb-Viscous equivalent for engines that only support that model.

struct EquivalentCoulombViscous {
  double k_c = 0.0;
  double k_v = 0.0;
};

/// K_v is passed through; K_c absorbs every other term of the budget at the
/// current state. tau_e_prev is the external torque of the previous step,
/// since engines solve tau_e and friction simultaneously.
inline EquivalentCoulombViscous equivalent_cv_params(
    const FrictionParams& friction, double tau_m, double tau_e_prev,
    double omega) {
  detail::require_finite(tau_m, "tau_m");
  detail::require_finite(tau_e_prev, "tau_e_prev");
  detail::require_finite(omega, "omega");
  FrictionTerms t = friction.terms();
  return {static_budget(t, tau_m, tau_e_prev, omega), t.k_v};
}

}  // namespace servobench
