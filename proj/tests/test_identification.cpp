#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "servobench/identification.hpp"
#include "servobench/presets.hpp"

namespace servobench {
namespace {

const double kNoise = 0.002;
const double kNoiseFloor = kNoise * std::sqrt(2.0 / std::numbers::pi);

FamilySetup small_setup(std::vector<double> gains) {
  FamilySetup s = load_family(PresetFamily::Dynamixel, SERVOBENCH_PRESETS_FILE);
  s.grid = {{1.0}, {0.15}, std::move(gains)};
  return s;
}

const FrictionParams kCoulombViscousTruth = CoulombViscous{0.08, 0.06};

TEST(Cost, TruthOnNoiselessLogsIsZero) {
  FamilySetup s = small_setup({8.0});
  auto logs = synthesize_dataset(s, kAllTrajectoryTypes, 0.0, 1);
  ParamSpace space = ParamSpace::defaults(s.friction.model());
  EXPECT_LE(cost(s.friction.values(), logs, space), 1e-9);
  EXPECT_LE(cost(kCoulombViscousTruth.values(),
                 synthesize_dataset(s, kAllTrajectoryTypes, 0.0, 1, &kCoulombViscousTruth),
                 FrictionModel::M1),
            1e-9);
}

TEST(Cost, TruthOnNoisyLogsMatchesNoiseFloor) {
  FamilySetup s = small_setup({4.0, 16.0});
  auto logs = synthesize_dataset(s, kAllTrajectoryTypes, kNoise, 2);
  double c = cost(s.friction.values(), logs, ParamSpace::defaults(s.friction.model()));
  EXPECT_NEAR(c, kNoiseFloor, 0.15 * kNoiseFloor);
}

TEST(Cost, PerturbedCoulombIsWorse) {
  FamilySetup s = small_setup({8.0});
  auto logs = synthesize_dataset(s, kAllTrajectoryTypes, kNoise, 3, &kCoulombViscousTruth);
  std::vector<double> x = kCoulombViscousTruth.values();
  double at_truth = cost(x, logs, FrictionModel::M1);
  x[1] *= 1.5;
  EXPECT_GT(cost(x, logs, FrictionModel::M1), at_truth);
}

TEST(Cost, RejectsMismatchedVectorLength) {
  FamilySetup s = small_setup({8.0});
  auto logs = synthesize_dataset(s, kAllTrajectoryTypes, 0.0, 1);
  std::vector<double> three{0.1, 0.1, 0.1};
  EXPECT_THROW(cost(three, logs, FrictionModel::M1), ConfigError);
  EXPECT_THROW(cost(three, logs, ParamSpace::defaults(FrictionModel::M4)), ConfigError);
  EXPECT_THROW(cost(three, std::vector<TrajectoryLog>{}, FrictionModel::M3), ConfigError);
}

TEST(Cost, DivergedRolloutIsPenalised) {
  FamilySetup s = small_setup({8.0});
  auto logs = synthesize_dataset(s, kAllTrajectoryTypes, 0.0, 1);
  // An overflowing error sum counts as a diverged rollout.
  logs[0].measured[10] = 1e308;
  logs[0].measured[11] = -1e308;
  double c = cost(s.friction.values(), std::span(logs).first(1),
                  ParamSpace::defaults(s.friction.model()));
  EXPECT_EQ(c, kDivergencePenalty);
}

TEST(ParamSpace, DefaultsFollowModelOrder) {
  for (FrictionModel m : kAllFrictionModels) {
    ParamSpace sp = ParamSpace::defaults(m);
    auto names = FrictionParams::coefficient_names(m);
    ASSERT_EQ(sp.size(), names.size());
    for (std::size_t i = 0; i < names.size(); ++i) {
      EXPECT_EQ(sp.specs()[i].name, names[i]);
      EXPECT_EQ(sp.specs()[i].scale, Scale::Log);
    }
    ParamSpace with_motor = ParamSpace::defaults(m, true);
    EXPECT_EQ(with_motor.size(), names.size() + 3);
    EXPECT_TRUE(with_motor.identifies_motor());
    EXPECT_FALSE(sp.identifies_motor());
  }
}

TEST(ParamSpace, DecodeStaysInBoundsAndInvertsEncode) {
  ParamSpace sp = ParamSpace::defaults(FrictionModel::M6, true);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> wide(0.5, 1.0);
  for (int i = 0; i < 1000; ++i) {
    Eigen::VectorXd u(static_cast<Eigen::Index>(sp.size()));
    for (auto& v : u) v = wide(rng);
    std::vector<double> x = sp.decode(u);
    EXPECT_TRUE(sp.contains(x));
    for (std::size_t k = 0; k < sp.size(); ++k) {
      double clamped = std::clamp(u[static_cast<Eigen::Index>(k)], 0.0, 1.0);
      EXPECT_NEAR(sp.to_unit(k, x[k]), clamped, 1e-12);
    }
  }
  // Midpoint of a log box is the geometric mean.
  Eigen::VectorXd half = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(sp.size()), 0.5);
  EXPECT_NEAR(sp.decode(half)[0], std::sqrt(1e-6 * 10.0), 1e-15);
}

TEST(ParamSpace, AppliesMotorConstants) {
  ParamSpace sp = ParamSpace::defaults(FrictionModel::M1, true);
  ActuatorModel base;
  base.motor = {.k_t = 1.0, .R = 1.0, .U_max = 10.0, .J_m = 0.0};
  std::vector<double> x{0.1, 0.2, 3.0, 4.0, 0.05};
  ActuatorModel a = sp.actuator(x, base);
  EXPECT_EQ(a.motor.k_t, 3.0);
  EXPECT_EQ(a.motor.R, 4.0);
  EXPECT_EQ(a.motor.J_m, 0.05);
  EXPECT_EQ(a.motor.U_max, 10.0);
  EXPECT_EQ(sp.friction(x), FrictionParams(CoulombViscous{0.1, 0.2}));
}

TEST(ParamSpace, RejectsBadBoxes) {
  using S = std::vector<ParamSpec>;
  EXPECT_THROW(ParamSpace(FrictionModel::M1, S{{"K_v", 0, 1}}), ConfigError);
  EXPECT_THROW(ParamSpace(FrictionModel::M1, S{{"K_c", 0, 1}, {"K_v", 0, 1}}), ConfigError);
  EXPECT_THROW(ParamSpace(FrictionModel::M1, S{{"K_v", 1, 0}, {"K_c", 0, 1}}), ConfigError);
  EXPECT_THROW(ParamSpace(FrictionModel::M1, S{{"K_v", 0, 1, Scale::Log}, {"K_c", 0, 1}}),
               ConfigError);
  EXPECT_THROW(ParamSpace(FrictionModel::M1, S{{"K_v", 0, 1}, {"K_c", 0, 1}, {"L", 0, 1}}),
               ConfigError);
  EXPECT_NO_THROW(ParamSpace(FrictionModel::M1, S{{"K_v", 0, 1}, {"K_c", 0, 1}}));
}

class IdentifyM1 : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    FamilySetup s = small_setup({8.0});
    ident_ = new std::vector<TrajectoryLog>(
        synthesize_dataset(s, kAllTrajectoryTypes, kNoise, 11, &kCoulombViscousTruth));
    s.grid.gains = {16.0};
    valid_ = new std::vector<TrajectoryLog>(
        synthesize_dataset(s, kAllTrajectoryTypes, kNoise, 12, &kCoulombViscousTruth));
  }
  static void TearDownTestSuite() {
    delete ident_;
    delete valid_;
  }
  static std::vector<TrajectoryLog>* ident_;
  static std::vector<TrajectoryLog>* valid_;
};
std::vector<TrajectoryLog>* IdentifyM1::ident_ = nullptr;
std::vector<TrajectoryLog>* IdentifyM1::valid_ = nullptr;

TEST_F(IdentifyM1, RecoversCoulombViscousTruth) {
  ParamSpace space = ParamSpace::defaults(FrictionModel::M1);
  IdentifyOptions opt;
  opt.seed = 1;
  IdentResult r = identify(*ident_, space, opt);
  evaluate(r, *valid_, space);
  EXPECT_NEAR(r.best[0], 0.08, 0.008);
  EXPECT_NEAR(r.best[1], 0.06, 0.006);
  EXPECT_LE(r.evaluations, 4000);
  ASSERT_TRUE(r.validation_mae);
  EXPECT_LT(*r.validation_mae, 1.2 * kNoiseFloor);
  EXPECT_EQ(r.per_log.size(), ident_->size() + valid_->size());

  // Invariants of the run itself.
  ASSERT_EQ(static_cast<int>(r.trace.size()), r.generations);
  for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_LE(r.trace[i], r.trace[i - 1]);
  EXPECT_EQ(r.trace.back(), r.identification_mae);
  EXPECT_TRUE(space.contains(r.best));
  EXPECT_DOUBLE_EQ(cost(r.best, *ident_, space), r.identification_mae);
}

TEST_F(IdentifyM1, SeededAndScheduleIndependent) {
  ParamSpace space = ParamSpace::defaults(FrictionModel::M1);
  IdentifyOptions opt;
  opt.seed = 5;
  opt.budget = 300;
  opt.threads = 1;
  IdentResult a = identify(*ident_, space, opt);
  opt.threads = 3;
  IdentResult b = identify(*ident_, space, opt);
  EXPECT_EQ(serialize_report(a), serialize_report(b));
  opt.seed = 6;
  IdentResult c = identify(*ident_, space, opt);
  EXPECT_NE(a.trace, c.trace);
}

TEST_F(IdentifyM1, BudgetUnits) {
  ParamSpace space = ParamSpace::defaults(FrictionModel::M1);
  IdentifyOptions opt;
  opt.budget = 25;
  opt.unit = BudgetUnit::Generations;
  opt.restarts = false;
  IdentResult r = identify(*ident_, space, opt);
  EXPECT_EQ(r.generations, 25);
  EXPECT_EQ(r.evaluations, 25 * default_population(2));
  opt.unit = BudgetUnit::Evaluations;
  opt.budget = 100;
  r = identify(*ident_, space, opt);
  EXPECT_LE(r.evaluations, 100);
  EXPECT_GT(r.evaluations, 100 - default_population(2));
}

TEST_F(IdentifyM1, RejectsBudgetBelowPopulation) {
  ParamSpace space = ParamSpace::defaults(FrictionModel::M1);
  IdentifyOptions opt;
  opt.budget = default_population(2) - 1;
  EXPECT_THROW(identify(*ident_, space, opt), ConfigError);
  opt.budget = 0;
  EXPECT_THROW(identify(*ident_, space, opt), ConfigError);
  opt.budget = 100;
  EXPECT_THROW(identify(std::vector<TrajectoryLog>{}, space, opt), ConfigError);
}

TEST_F(IdentifyM1, RicherModelDoesNotInventImprovements) {
  const FrictionModel models[] = {FrictionModel::M1, FrictionModel::M4};
  IdentifyOptions opt;
  opt.seed = 2;
  SweepResult sweep = model_sweep(*ident_, *valid_, models, opt);
  ASSERT_EQ(sweep.rows.size(), 2u);
  EXPECT_NEAR(sweep.rows[1].validation_mae, sweep.rows[0].validation_mae, kNoiseFloor);
}

TEST_F(IdentifyM1, EmptySweep) {
  SweepResult sweep = model_sweep(*ident_, *valid_, {}, IdentifyOptions{});
  EXPECT_TRUE(sweep.rows.empty());
  EXPECT_TRUE(sweep.results.empty());
}

TEST_F(IdentifyM1, ReportCarriesScoresAndTrace) {
  ParamSpace space = ParamSpace::defaults(FrictionModel::M1);
  IdentifyOptions opt;
  opt.budget = 60;
  IdentResult r = identify(*ident_, space, opt);
  evaluate(r, *valid_, space);
  nlohmann::json doc = to_json(r);
  EXPECT_EQ(doc["format"], "servobench-ident-report");
  EXPECT_EQ(doc["model"], "M1");
  EXPECT_EQ(doc["parameters"]["K_v"].get<double>(), r.best[0]);
  EXPECT_EQ(doc["validation_mae"].get<double>(), *r.validation_mae);
  EXPECT_EQ(doc["trace"].size(), r.trace.size());
  EXPECT_EQ(doc["per_log"].size(), 8u);
}

}  // namespace
}  // namespace servobench
