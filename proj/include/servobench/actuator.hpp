#pragma once

// Servo actuator model: a position control law (voltage or current PID, or a
// released H-bridge) feeding a DC motor model, producing the motor-side
// torque tau_m applied to the joint.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "servobench/errors.hpp"

namespace servobench {

struct MotorElectrical {
  double k_t = 1.0;  ///< torque constant times reduction ratio (N.m/A)
  double R = 1.0;    ///< winding resistance (ohm)
  double U_max = 12.0;
  std::optional<double> I_heat;  ///< thermal current limit; nullopt = none
  double J_m = 0.0;              ///< apparent (reflected) rotor inertia

  void validate() const {
    if (!(k_t > 0.0) || !std::isfinite(k_t)) throw DomainError("k_t must be > 0");
    if (!(R > 0.0) || !std::isfinite(R)) throw DomainError("R must be > 0");
    if (!(U_max > 0.0) || !std::isfinite(U_max)) {
      throw DomainError("U_max must be > 0");
    }
    if (I_heat && (!(*I_heat > 0.0) || std::isnan(*I_heat))) {
      throw DomainError("I_heat must be > 0 when present");
    }
    if (!(J_m >= 0.0) || !std::isfinite(J_m)) {
      throw DomainError("J_m must be >= 0");
    }
  }

  friend bool operator==(const MotorElectrical&, const MotorElectrical&) = default;
};

struct PidGains {
  double k_p = 0.0;
  double k_i = 0.0;
  double k_d = 0.0;
  double integral_clamp = 0.0;  ///< bound on |integral of error| (rad.s)

  void validate() const {
    for (double g : {k_p, k_i, k_d, integral_clamp}) {
      if (!std::isfinite(g) || g < 0.0) {
        throw DomainError("PID gains must be finite and >= 0");
      }
    }
    if (k_i > 0.0 && !(integral_clamp > 0.0)) {
      throw DomainError("integral clamp must be > 0 when k_i > 0");
    }
  }

  friend bool operator==(const PidGains&, const PidGains&) = default;
};

enum class LawKind { Voltage, Current, TorqueOff };

inline std::string_view to_string(LawKind k) {
  switch (k) {
    case LawKind::Voltage: return "voltage";
    case LawKind::Current: return "current";
    case LawKind::TorqueOff: return "off";
  }
  return "?";
}

inline LawKind parse_law_kind(std::string_view s) {
  if (s == "voltage") return LawKind::Voltage;
  if (s == "current") return LawKind::Current;
  if (s == "off") return LawKind::TorqueOff;
  throw ConfigError("unknown control law '" + std::string(s) + "'");
}

struct ControlLaw {
  LawKind kind = LawKind::Voltage;
  PidGains gains;
  /// Controller update period in seconds; 0 means "every physics step".
  double period = 0.0;

  friend bool operator==(const ControlLaw&, const ControlLaw&) = default;
};

struct ActuatorModel {
  ControlLaw law;
  MotorElectrical motor;

  void validate() const {
    motor.validate();
    law.gains.validate();
    if (!std::isfinite(law.period) || law.period < 0.0) {
      throw DomainError("control period must be finite and >= 0");
    }
  }

  /// Number of physics steps per controller update for timestep dt.
  int decimation(double dt) const {
    if (law.period == 0.0) return 1;
    double ratio = law.period / dt;
    double n = std::round(ratio);
    if (n < 1.0 || std::abs(ratio - n) > 1e-9 * std::max(1.0, ratio)) {
      throw ConfigError("control period must be a positive integer multiple "
                        "of the physics timestep");
    }
    return static_cast<int>(n);
  }

  friend bool operator==(const ActuatorModel&, const ActuatorModel&) = default;
};

struct PidState {
  double integral = 0.0;
};

/// Updates the integral (clamped) and returns the raw PID output.
/// The derivative acts on the measurement, so a target step gives no kick.
inline double pid_output(const PidGains& g, double theta, double omega,
                         double target, double dt, PidState& st) {
  double error = target - theta;
  if (g.k_i > 0.0) {
    st.integral = std::clamp(st.integral + error * dt, -g.integral_clamp,
                             g.integral_clamp);
  }
  return g.k_p * error + g.k_i * st.integral - g.k_d * omega;
}

struct ControlOutput {
  double tau_m = 0.0;
  double command = 0.0;  ///< U (V) or I (A); 0 when released
};

/// Motor torque for an applied voltage, drive/brake DC model.
inline double voltage_torque(const MotorElectrical& m, double U, double omega) {
  return m.k_t / m.R * U - m.k_t * m.k_t / m.R * omega;
}

/// Admissible current interval [lo, hi] at the given speed. The supply bound
/// is taken per direction so the interval stays non-empty past the no-load
/// speed; both ends are then confined to +/- I_heat.
struct CurrentBounds {
  double lo;
  double hi;
};

inline CurrentBounds current_bounds(const MotorElectrical& m, double omega) {
  double emf = m.k_t * omega;
  double lo = (-m.U_max - emf) / m.R;
  double hi = (m.U_max - emf) / m.R;
  if (m.I_heat) {
    double h = *m.I_heat;
    lo = std::clamp(lo, -h, h);
    hi = std::clamp(hi, -h, h);
  }
  return {lo, hi};
}

inline ControlOutput voltage_step(const MotorElectrical& motor,
                                  const PidGains& gains, double theta,
                                  double omega, double target, double dt,
                                  PidState& st) {
  double U = std::clamp(pid_output(gains, theta, omega, target, dt, st),
                        -motor.U_max, motor.U_max);
  return {voltage_torque(motor, U, omega), U};
}

inline ControlOutput current_step(const MotorElectrical& motor,
                                  const PidGains& gains, double theta,
                                  double omega, double target, double dt,
                                  PidState& st) {
  CurrentBounds b = current_bounds(motor, omega);
  double I = std::clamp(pid_output(gains, theta, omega, target, dt, st), b.lo,
                        b.hi);
  return {motor.k_t * I, I};
}

/// Released actuator: no drive torque and no back-EMF braking.
inline ControlOutput torque_off_step() { return {0.0, 0.0}; }

/// Stateful servo: control law, PID memory and controller-rate decimation.
/// One instance per rollout; not shared between threads.
class Servo {
 public:
  Servo(ActuatorModel model, double physics_dt)
      : model_(std::move(model)),
        dt_(physics_dt),
        decimation_(model_.decimation(physics_dt)) {}

  const ActuatorModel& model() const { return model_; }

  /// Motor torque for state (theta, omega) and target. An empty target
  /// releases the actuator.
  double operator()(double theta, double omega, std::optional<double> target) {
    if (!target || model_.law.kind == LawKind::TorqueOff) {
      // Released: reset so a later re-engage starts from a clean controller.
      pid_ = {};
      counter_ = 0;
      held_ = 0.0;
      return torque_off_step().tau_m;
    }
    if (counter_ == 0) {
      double control_dt = dt_ * decimation_;
      ControlOutput out =
          model_.law.kind == LawKind::Voltage
              ? voltage_step(model_.motor, model_.law.gains, theta, omega,
                             *target, control_dt, pid_)
              : current_step(model_.motor, model_.law.gains, theta, omega,
                             *target, control_dt, pid_);
      held_ = out.tau_m;
    }
    counter_ = (counter_ + 1) % decimation_;
    return held_;
  }

 private:
  ActuatorModel model_;
  double dt_;
  int decimation_;
  PidState pid_;
  int counter_ = 0;
  double held_ = 0.0;
};

}  // namespace servobench
