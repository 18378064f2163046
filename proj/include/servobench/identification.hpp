#pragma once

// Black-box identification of friction (and optionally motor) parameters
// from trajectory logs: simulate every log with candidate parameters and
// minimise the mean absolute position error with CMA-ES.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "servobench/cmaes.hpp"
#include "servobench/dataset.hpp"
#include "servobench/errors.hpp"
#include "servobench/friction.hpp"
#include "servobench/io.hpp"
#include "servobench/pendulum.hpp"

namespace servobench {

/// Cost assigned to a log whose rollout became non-finite.
inline constexpr double kDivergencePenalty = 1e6;

enum class Scale { Linear, Log };

struct ParamSpec {
  std::string name;
  double lower = 0.0;
  double upper = 1.0;
  Scale scale = Scale::Linear;
};

/// Ordered box of identified quantities. Friction coefficients come first,
/// in the model's coefficient order, followed by any of k_t, R, J_m.
class ParamSpace {
 public:
  ParamSpace() = default;
  ParamSpace(FrictionModel model, std::vector<ParamSpec> specs)
      : model_(model), specs_(std::move(specs)) {
    validate();
  }

  /// Generous default boxes; motor constants are appended when
  /// `identify_motor` is set.
  static ParamSpace defaults(FrictionModel model, bool identify_motor = false) {
    std::vector<ParamSpec> specs;
    for (auto name : FrictionParams::coefficient_names(model)) {
      if (name == "v_s") {
        specs.push_back({"v_s", 1e-3, 10.0, Scale::Log});
      } else if (name == "alpha") {
        specs.push_back({"alpha", 0.1, 10.0, Scale::Log});
      } else {
        specs.push_back({std::string(name), 1e-6, 10.0, Scale::Log});
      }
    }
    if (identify_motor) {
      specs.push_back({"k_t", 0.1, 20.0, Scale::Linear});
      specs.push_back({"R", 0.05, 50.0, Scale::Log});
      specs.push_back({"J_m", 1e-6, 0.1, Scale::Log});
    }
    return ParamSpace(model, std::move(specs));
  }

  FrictionModel model() const { return model_; }
  std::size_t size() const { return specs_.size(); }
  const std::vector<ParamSpec>& specs() const { return specs_; }

  double from_unit(std::size_t i, double u) const {
    const ParamSpec& s = specs_[i];
    u = std::clamp(u, 0.0, 1.0);
    if (s.scale == Scale::Log) {
      double lo = std::log(s.lower), hi = std::log(s.upper);
      return std::clamp(std::exp(lo + u * (hi - lo)), s.lower, s.upper);
    }
    return s.lower + u * (s.upper - s.lower);
  }

  double to_unit(std::size_t i, double x) const {
    const ParamSpec& s = specs_[i];
    if (s.scale == Scale::Log) {
      return (std::log(x) - std::log(s.lower)) / (std::log(s.upper) - std::log(s.lower));
    }
    return (x - s.lower) / (s.upper - s.lower);
  }

  std::vector<double> decode(const Eigen::VectorXd& unit) const {
    std::vector<double> out(size());
    for (std::size_t i = 0; i < size(); ++i) out[i] = from_unit(i, unit[static_cast<Eigen::Index>(i)]);
    return out;
  }

  bool contains(std::span<const double> x) const {
    if (x.size() != size()) return false;
    for (std::size_t i = 0; i < size(); ++i) {
      if (!(x[i] >= specs_[i].lower && x[i] <= specs_[i].upper)) return false;
    }
    return true;
  }

  /// Friction parameters encoded in the first coefficients of x.
  FrictionParams friction(std::span<const double> x) const {
    check_length(x);
    std::size_t n = FrictionParams::coefficient_names(model_).size();
    return FrictionParams::from_values(model_, x.first(n));
  }

  /// Applies any identified motor constants to a log's actuator.
  ActuatorModel actuator(std::span<const double> x, ActuatorModel base) const {
    check_length(x);
    std::size_t n = FrictionParams::coefficient_names(model_).size();
    for (std::size_t i = n; i < size(); ++i) {
      const std::string& name = specs_[i].name;
      if (name == "k_t") base.motor.k_t = x[i];
      else if (name == "R") base.motor.R = x[i];
      else if (name == "J_m") base.motor.J_m = x[i];
    }
    return base;
  }

  bool identifies_motor() const {
    return size() > FrictionParams::coefficient_names(model_).size();
  }

 private:
  void check_length(std::span<const double> x) const {
    if (x.size() != size()) {
      throw ConfigError("parameter vector has " + std::to_string(x.size()) +
                        " entries, model " + std::string(to_string(model_)) +
                        " space expects " + std::to_string(size()));
    }
  }

  void validate() const {
    auto names = FrictionParams::coefficient_names(model_);
    if (specs_.size() < names.size()) {
      throw ConfigError("parameter space is missing friction coefficients");
    }
    for (std::size_t i = 0; i < specs_.size(); ++i) {
      const ParamSpec& s = specs_[i];
      if (i < names.size() && s.name != names[i]) {
        throw ConfigError("parameter space entry " + std::to_string(i) + " is '" + s.name +
                          "', expected '" + std::string(names[i]) + "'");
      }
      if (i >= names.size() && s.name != "k_t" && s.name != "R" && s.name != "J_m") {
        throw ConfigError("unknown identified quantity '" + s.name + "'");
      }
      if (!(s.lower < s.upper) || !std::isfinite(s.lower) || !std::isfinite(s.upper)) {
        throw ConfigError("bounds of '" + s.name + "' must satisfy lower < upper");
      }
      if (s.scale == Scale::Log && !(s.lower > 0.0)) {
        throw ConfigError("log-scaled '" + s.name + "' needs lower > 0");
      }
    }
  }

  FrictionModel model_ = FrictionModel::M1;
  std::vector<ParamSpec> specs_;
};

// ---------------------------------------------------------------------------
// Cost

struct LogError {
  double abs_error_sum = 0.0;
  std::size_t samples = 0;
  bool diverged = false;

  double mae() const { return diverged ? kDivergencePenalty : abs_error_sum / samples; }
};

/// Simulates one log from its first measured position at rest.
inline LogError log_error(const TrajectoryLog& log, const FrictionTerms& friction,
                          const ActuatorModel& actuator) {
  LogError e;
  const auto& measured = log.measured;
  bool ok = simulate(log.header.bench, actuator, friction, SimState{measured.front(), 0.0},
                     std::span<const std::optional<double>>(log.target),
                     [&](std::size_t k, const SimState& s, const StepTrace*) {
                       e.abs_error_sum += std::abs(s.theta - measured[k]);
                     });
  e.samples = log.size();
  e.diverged = !ok || !std::isfinite(e.abs_error_sum);
  return e;
}

/// Sample-weighted MAE over all logs (rad). Diverged logs count as
/// kDivergencePenalty for each of their samples.
inline double cost(std::span<const double> x, std::span<const TrajectoryLog> logs,
                   const ParamSpace& space) {
  if (logs.empty()) throw ConfigError("cost needs at least one log");
  FrictionParams friction = space.friction(x);
  FrictionTerms terms = friction.terms();
  double total = 0.0;
  std::size_t samples = 0;
  for (const auto& log : logs) {
    ActuatorModel act = space.actuator(x, log.header.actuator);
    LogError e = log_error(log, terms, act);
    total += e.diverged ? kDivergencePenalty * static_cast<double>(e.samples) : e.abs_error_sum;
    samples += e.samples;
  }
  return total / static_cast<double>(samples);
}

/// Overload checking the vector length against the model tag.
inline double cost(std::span<const double> x, std::span<const TrajectoryLog> logs,
                   FrictionModel model, bool identify_motor = false) {
  ParamSpace space = ParamSpace::defaults(model, identify_motor);
  if (x.size() != space.size()) {
    throw ConfigError("model " + std::string(to_string(model)) + " expects " +
                      std::to_string(space.size()) + " parameters, got " +
                      std::to_string(x.size()));
  }
  return cost(x, logs, space);
}

// ---------------------------------------------------------------------------
// Identification

enum class BudgetUnit { Evaluations, Generations };

struct IdentifyOptions {
  int budget = 4000;
  BudgetUnit unit = BudgetUnit::Evaluations;
  std::uint64_t seed = 0;
  int population = 0;       ///< 0: 4 + floor(3 ln n)
  double initial_sigma = 0.3;
  unsigned threads = 0;     ///< 0: hardware concurrency
  /// Restart with a doubled population when a run stalls (IPOP), until the
  /// budget is spent. The first run always uses the configured population.
  bool restarts = true;
  /// A run has stalled once the spread of its per-generation best costs over
  /// the last 10 + 30 n / lambda generations, together with the spread of the
  /// current generation, falls below this value.
  double tol_fun = 1e-12;
  /// Called after each generation with (generation, evaluations, best cost).
  std::function<void(int, int, double)> progress;
};

struct LogScore {
  std::string id;
  std::string set;  ///< "identification" or "validation"
  double mae = 0.0;
};

struct IdentResult {
  FrictionModel model = FrictionModel::M1;
  std::vector<std::string> names;
  std::vector<double> best;
  double identification_mae = 0.0;
  std::optional<double> validation_mae;
  std::vector<LogScore> per_log;
  int evaluations = 0;
  int generations = 0;
  std::vector<double> trace;  ///< best-so-far cost after each generation
  std::uint64_t seed = 0;

  FrictionParams friction() const {
    std::size_t n = FrictionParams::coefficient_names(model).size();
    return FrictionParams::from_values(model, std::span<const double>(best).first(n));
  }
};

namespace detail {

/// Evaluates all candidates; results land at their candidate index, so the
/// outcome does not depend on thread scheduling.
inline std::vector<double> evaluate_population(const std::vector<std::vector<double>>& xs,
                                               std::span<const TrajectoryLog> logs,
                                               const ParamSpace& space, unsigned threads) {
  std::vector<double> out(xs.size());
  if (threads <= 1 || xs.size() <= 1) {
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = cost(xs[i], logs, space);
    return out;
  }
  {
    std::vector<std::jthread> pool;
    const unsigned n = std::min<unsigned>(threads, static_cast<unsigned>(xs.size()));
    for (unsigned w = 0; w < n; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < xs.size(); i += n) out[i] = cost(xs[i], logs, space);
      });
    }
  }
  return out;
}

}  // namespace detail

/// Minimises cost() over `space` with CMA-ES. Only the logs passed here
/// are read; score validation logs separately with evaluate().
inline IdentResult identify(std::span<const TrajectoryLog> logs, const ParamSpace& space,
                            const IdentifyOptions& opt = {}) {
  if (logs.empty()) throw ConfigError("identification needs at least one log");
  for (const auto& l : logs) l.validate();
  const int dim = static_cast<int>(space.size());
  const int lambda = opt.population > 0 ? opt.population : default_population(dim);
  if (opt.budget < 1) throw ConfigError("identification budget must be positive");
  const long max_evals = opt.unit == BudgetUnit::Generations
                             ? static_cast<long>(opt.budget) * lambda
                             : static_cast<long>(opt.budget);
  if (max_evals < lambda) {
    throw ConfigError("budget (" + std::to_string(max_evals) +
                      " evaluations) is smaller than the population (" +
                      std::to_string(lambda) + ")");
  }
  unsigned threads = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());

  IdentResult res;
  res.model = space.model();
  for (const auto& s : space.specs()) res.names.push_back(s.name);
  res.seed = opt.seed;
  double best_cost = std::numeric_limits<double>::infinity();

  std::mt19937_64 restart_rng(opt.seed);
  for (int run = 0, pop = lambda; res.evaluations + pop <= max_evals; ++run, pop *= 2) {
    Eigen::VectorXd start = Eigen::VectorXd::Constant(dim, 0.5);
    if (run > 0) {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (int i = 0; i < dim; ++i) start[i] = u(restart_rng);
    }
    CmaEs es(start, opt.initial_sigma, restart_rng(), pop);
    const std::size_t window = 10 + static_cast<std::size_t>(std::ceil(30.0 * dim / pop));
    std::vector<double> run_best;

    while (res.evaluations + pop <= max_evals) {
      std::vector<Eigen::VectorXd> unit = es.ask();
      std::vector<std::vector<double>> xs;
      xs.reserve(unit.size());
      for (const auto& u : unit) xs.push_back(space.decode(u));
      std::vector<double> f = detail::evaluate_population(xs, logs, space, threads);
      for (std::size_t i = 0; i < f.size(); ++i) {
        if (!std::isfinite(f[i])) f[i] = kDivergencePenalty;
        if (f[i] < best_cost) {
          best_cost = f[i];
          res.best = xs[i];
        }
      }
      res.evaluations += pop;
      es.tell(unit, f);
      res.trace.push_back(best_cost);
      ++res.generations;
      if (opt.progress) opt.progress(res.generations, res.evaluations, best_cost);
      if (es.converged()) break;
      auto [gen_lo, gen_hi] = std::minmax_element(f.begin(), f.end());
      run_best.push_back(*gen_lo);
      if (opt.restarts && run_best.size() >= window) {
        auto recent = std::span(run_best).last(window);
        auto [lo, hi] = std::minmax_element(recent.begin(), recent.end());
        double spread = std::max(*hi, *gen_hi) - std::min(*lo, *gen_lo);
        if (spread < opt.tol_fun) break;
      }
    }
    if (!opt.restarts) break;
  }
  res.identification_mae = best_cost;
  for (const auto& l : logs) {
    ActuatorModel act = space.actuator(res.best, l.header.actuator);
    res.per_log.push_back(
        {l.header.id, "identification", log_error(l, res.friction().terms(), act).mae()});
  }
  return res;
}

/// Scores held-out logs with the identified parameters.
inline void evaluate(IdentResult& res, std::span<const TrajectoryLog> validation,
                     const ParamSpace& space) {
  if (validation.empty()) return;
  res.validation_mae = cost(res.best, validation, space);
  FrictionTerms terms = res.friction().terms();
  for (const auto& l : validation) {
    ActuatorModel act = space.actuator(res.best, l.header.actuator);
    res.per_log.push_back({l.header.id, "validation", log_error(l, terms, act).mae()});
  }
}

struct SweepRow {
  FrictionModel model;
  double identification_mae;
  double validation_mae;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<IdentResult> results;
};

/// Identifies every model on the same identification logs and scores each
/// on the same validation logs.
inline SweepResult model_sweep(std::span<const TrajectoryLog> identification,
                               std::span<const TrajectoryLog> validation,
                               std::span<const FrictionModel> models, const IdentifyOptions& opt,
                               bool identify_motor = false) {
  SweepResult out;
  for (FrictionModel m : models) {
    ParamSpace space = ParamSpace::defaults(m, identify_motor);
    IdentResult r = identify(identification, space, opt);
    evaluate(r, validation, space);
    out.rows.push_back({m, r.identification_mae, r.validation_mae.value_or(r.identification_mae)});
    out.results.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports

inline nlohmann::json to_json(const IdentResult& r) {
  using nlohmann::json;
  json params = io::to_json(r.friction());
  json motor = json::object();
  std::size_t n = FrictionParams::coefficient_names(r.model).size();
  for (std::size_t i = n; i < r.names.size(); ++i) motor[r.names[i]] = r.best[i];
  json per_log = json::array();
  for (const auto& s : r.per_log) per_log.push_back({{"id", s.id}, {"set", s.set}, {"mae", s.mae}});
  return json{{"format", "servobench-ident-report"},
              {"version", 1},
              {"model", std::string(to_string(r.model))},
              {"parameters", params},
              {"motor", motor},
              {"names", r.names},
              {"vector", r.best},
              {"identification_mae", r.identification_mae},
              {"validation_mae", r.validation_mae ? json(*r.validation_mae) : json(nullptr)},
              {"evaluations", r.evaluations},
              {"generations", r.generations},
              {"seed", r.seed},
              {"trace", r.trace},
              {"per_log", per_log}};
}

inline std::string serialize_report(const IdentResult& r) { return to_json(r).dump(2) + "\n"; }

}  // namespace servobench
