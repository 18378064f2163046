#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "servobench/actuator.hpp"
#include "test_support.hpp"

namespace servobench {
namespace {

using testing::uniform;

MotorElectrical small_motor() { return {.k_t = 1.5, .R = 5.0, .U_max = 12.0, .J_m = 0.01}; }
MotorElectrical erob_like() { return {.k_t = 2.0, .R = 1.0, .U_max = 48.0, .I_heat = 10.0}; }

TEST(VoltageLaw, SaturatesAtSupplyVoltage) {
  PidState st;
  // k_p = 30 V/rad with 1 rad error asks for 30 V.
  ControlOutput out = voltage_step(small_motor(), {.k_p = 30.0}, 0.0, 0.0, 1.0, 0.001, st);
  EXPECT_EQ(out.command, 12.0);
  EXPECT_NEAR(out.tau_m, 3.6, 1e-12);
}

TEST(VoltageLaw, BackEmfCancelsDriveAtNoLoadSpeed) {
  EXPECT_NEAR(voltage_torque(small_motor(), 12.0, 8.0), 0.0, 1e-12);
}

TEST(VoltageLaw, ZeroCommandZeroSpeed) {
  PidState st;
  EXPECT_EQ(voltage_step(small_motor(), {.k_p = 5.0}, 0.3, 0.0, 0.3, 0.001, st).tau_m, 0.0);
}

TEST(CurrentLaw, HeatLimitBinds) {
  PidState st;
  ControlOutput out = current_step(erob_like(), {.k_p = 20.0}, 0.0, 0.0, 1.0, 0.001, st);
  EXPECT_EQ(out.command, 10.0);
  EXPECT_EQ(out.tau_m, 20.0);
}

TEST(CurrentLaw, EmfLimitBinds) {
  PidState st;
  ControlOutput out = current_step(erob_like(), {.k_p = 20.0}, 0.0, 20.0, 1.0, 0.001, st);
  EXPECT_EQ(out.command, 8.0);
  EXPECT_EQ(out.tau_m, 16.0);
}

TEST(CurrentLaw, ZeroRequestGivesZeroTorque) {
  PidState st;
  EXPECT_EQ(current_step(erob_like(), {.k_p = 20.0}, 1.0, 0.0, 1.0, 0.001, st).tau_m, 0.0);
}

TEST(CurrentLaw, BoundsStayOrderedPastNoLoadSpeed) {
  MotorElectrical m = erob_like();
  for (double w : {-1000.0, -30.0, -24.0, 0.0, 23.9, 24.0, 24.1, 60.0, 1000.0}) {
    CurrentBounds b = current_bounds(m, w);
    EXPECT_LE(b.lo, b.hi) << w;
    EXPECT_GE(b.lo, -10.0);
    EXPECT_LE(b.hi, 10.0);
  }
  m.I_heat.reset();
  CurrentBounds b = current_bounds(m, 100.0);
  EXPECT_LT(b.lo, b.hi);
  EXPECT_NEAR(b.hi, (48.0 - 200.0) / 1.0, 1e-12);
}

TEST(TorqueOff, ReleasedActuatorHasNoEmfBraking) {
  ActuatorModel a{.law = {.kind = LawKind::TorqueOff}, .motor = {.k_t = 2.0, .R = 1.0}};
  Servo servo(a, 0.001);
  EXPECT_EQ(servo(0.0, 5.0, 1.0), 0.0);

  ActuatorModel v{.law = {.kind = LawKind::Voltage, .gains = {.k_p = 4.0}},
                  .motor = {.k_t = 2.0, .R = 1.0}};
  Servo released(v, 0.001);
  EXPECT_EQ(released(0.0, 5.0, std::nullopt), 0.0);  // not -k_t^2/R * w = -20
}

TEST(Pid, DerivativeOnMeasurementAndClampedIntegral) {
  PidGains g{.k_p = 2.0, .k_i = 10.0, .k_d = 0.5, .integral_clamp = 0.05};
  PidState st;
  double out = pid_output(g, 0.0, 0.4, 1.0, 0.01, st);
  EXPECT_DOUBLE_EQ(st.integral, 0.01);
  EXPECT_DOUBLE_EQ(out, 2.0 + 10.0 * 0.01 - 0.5 * 0.4);
  for (int i = 0; i < 100; ++i) pid_output(g, 0.0, 0.0, 1.0, 0.01, st);
  EXPECT_DOUBLE_EQ(st.integral, 0.05);
  pid_output(g, 0.0, 0.0, -100.0, 0.01, st);
  EXPECT_DOUBLE_EQ(st.integral, -0.05);
}

TEST(Pid, GainsValidation) {
  EXPECT_THROW((PidGains{.k_p = -1.0}).validate(), DomainError);
  EXPECT_THROW((PidGains{.k_p = 1.0, .k_i = 1.0}).validate(), DomainError);
  EXPECT_NO_THROW((PidGains{.k_p = 1.0, .k_i = 1.0, .integral_clamp = 0.1}).validate());
}

TEST(Motor, Validation) {
  EXPECT_THROW((MotorElectrical{.k_t = 0.0}).validate(), DomainError);
  EXPECT_THROW((MotorElectrical{.R = -1.0}).validate(), DomainError);
  EXPECT_THROW((MotorElectrical{.U_max = 0.0}).validate(), DomainError);
  EXPECT_THROW((MotorElectrical{.I_heat = 0.0}).validate(), DomainError);
  EXPECT_THROW((MotorElectrical{.J_m = -0.1}).validate(), DomainError);
  EXPECT_NO_THROW(small_motor().validate());
}

TEST(Servo, DecimationHoldsTorqueBetweenUpdates) {
  ActuatorModel a{.law = {.kind = LawKind::Current, .gains = {.k_p = 1.0}, .period = 0.004},
                  .motor = erob_like()};
  EXPECT_EQ(a.decimation(0.001), 4);
  Servo servo(a, 0.001);
  double first = servo(0.0, 0.0, 1.0);
  EXPECT_EQ(servo(0.5, 0.0, 1.0), first);
  EXPECT_EQ(servo(0.9, 0.0, 1.0), first);
  EXPECT_EQ(servo(0.9, 0.0, 1.0), first);
  EXPECT_NE(servo(0.9, 0.0, 1.0), first);

  a.law.period = 0.0025;
  EXPECT_THROW(a.decimation(0.001), ConfigError);
}

// --- properties --------------------------------------------------------------

TEST(ActuatorProperties, CommandsRespectLimits) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 20000; ++i) {
    MotorElectrical m{.k_t = uniform(rng, 0.1, 10), .R = uniform(rng, 0.1, 10),
                      .U_max = uniform(rng, 1, 50), .I_heat = uniform(rng, 0.5, 20)};
    PidGains g{.k_p = uniform(rng, 0, 200), .k_i = uniform(rng, 0, 5), .k_d = uniform(rng, 0, 5),
               .integral_clamp = 1.0};
    double th = uniform(rng, -3, 3), w = uniform(rng, -30, 30), tgt = uniform(rng, -3, 3);
    PidState st;
    ControlOutput v = voltage_step(m, g, th, w, tgt, 0.001, st);
    EXPECT_LE(std::abs(v.command), m.U_max);
    if (std::abs(v.command) == m.U_max) {
      EXPECT_LE(v.tau_m * w, m.U_max * m.k_t * std::abs(w) / m.R + 1e-9);
    }
    ControlOutput c = current_step(m, g, th, w, tgt, 0.001, st);
    EXPECT_LE(std::abs(c.command), *m.I_heat);
    CurrentBounds b = current_bounds(m, w);
    EXPECT_LE(b.lo, b.hi);
  }
}

TEST(ActuatorProperties, ZeroErrorFixedPoint) {
  PidGains g{.k_p = 7.0, .k_i = 2.0, .k_d = 0.3, .integral_clamp = 1.0};
  for (double th : {-1.0, 0.0, 2.5}) {
    PidState a, b;
    EXPECT_EQ(voltage_step(small_motor(), g, th, 0.0, th, 0.001, a).tau_m, 0.0);
    EXPECT_EQ(current_step(erob_like(), g, th, 0.0, th, 0.001, b).tau_m, 0.0);
  }
}

TEST(ActuatorProperties, Deterministic) {
  ActuatorModel a{.law = {.kind = LawKind::Voltage,
                          .gains = {.k_p = 8.0, .k_i = 1.0, .k_d = 0.1, .integral_clamp = 0.5}},
                  .motor = small_motor()};
  Servo s1(a, 0.001), s2(a, 0.001);
  std::mt19937_64 rng(12);
  for (int i = 0; i < 1000; ++i) {
    double th = uniform(rng, -1, 1), w = uniform(rng, -3, 3), t = uniform(rng, -1, 1);
    EXPECT_EQ(s1(th, w, t), s2(th, w, t));
  }
}

}  // namespace
}  // namespace servobench
