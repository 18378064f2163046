#pragma once

// Command-line front end: synth, identify, simulate and diagram.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
// Every subcommand accepts --config <file.json> whose keys mirror the long
// flag names; flags given on the command line win over file values and
// unknown keys are rejected.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "servobench/dataset.hpp"
#include "servobench/errors.hpp"
#include "servobench/friction.hpp"
#include "servobench/identification.hpp"
#include "servobench/io.hpp"
#include "servobench/pendulum.hpp"
#include "servobench/presets.hpp"

#ifndef SERVOBENCH_PRESETS_FILE
#define SERVOBENCH_PRESETS_FILE "data/presets.json"
#endif

namespace servobench::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct RunConfig {
  std::string command;
  std::string family = "dynamixel";
  std::vector<std::string> types{"all"};
  double noise = 0.002;
  std::uint64_t seed = 0;
  std::string out;
  std::vector<std::string> models{"M4"};
  std::string expect_model;  ///< simulate: required model tag of --params
  int budget = 4000;
  std::string budget_unit = "evaluations";
  std::string manifest;
  std::string params;
  std::string log;
  std::string presets = SERVOBENCH_PRESETS_FILE;
  std::vector<double> tau_m_range{-5.0, 5.0, 101.0};
  std::vector<double> velocity_levels{0.0};
  bool progress = false;
  bool identify_motor = false;
  unsigned threads = 0;
};

/// Thrown for malformed flags or config files; maps to exit code 1.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline std::string fmt(double v) { return io::detail::dump_number(v); }

inline std::vector<TrajectoryType> resolve_types(const std::vector<std::string>& names) {
  std::vector<TrajectoryType> out;
  for (const auto& n : names) {
    if (n == "all") {
      out.assign(kAllTrajectoryTypes.begin(), kAllTrajectoryTypes.end());
      return out;
    }
    out.push_back(parse_trajectory_type(n));
  }
  if (out.empty()) throw ConfigError("no trajectory types selected");
  return out;
}

inline std::vector<FrictionModel> resolve_models(const std::vector<std::string>& names) {
  std::vector<FrictionModel> out;
  for (const auto& n : names) {
    if (n == "all") {
      out.assign(kAllFrictionModels.begin(), kAllFrictionModels.end());
      return out;
    }
    out.push_back(parse_friction_model(n));
  }
  return out;
}

inline std::string json_to_arg(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number()) return v.dump();
  throw UsageError("config values must be strings, numbers, booleans or arrays of those");
}

/// Fills options that were not given on the command line from a JSON
/// object whose keys are long flag names without the leading dashes.
inline void apply_config_file(CLI::App& sub, const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = io::read_json(path);
  } catch (const DataError& e) {
    throw UsageError(std::string("config file: ") + e.what());
  }
  if (!doc.is_object()) throw UsageError("config file must hold a JSON object");
  for (const auto& [key, value] : doc.items()) {
    CLI::Option* opt = key == "config" ? nullptr : sub.get_option_no_throw("--" + key);
    if (!opt) {
      throw UsageError("unknown config key '" + key + "' for command '" + sub.get_name() + "'");
    }
    if (opt->count() > 0) continue;
    std::vector<std::string> args;
    if (value.is_array()) {
      for (const auto& v : value) args.push_back(json_to_arg(v));
    } else {
      args.push_back(json_to_arg(value));
    }
    try {
      opt->add_result(args);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw UsageError("config key '" + key + "': " + e.what());
    }
  }
}

inline void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw DataError("cannot create output directory " + dir.string());
  }
}

inline std::vector<TrajectoryLog> load_manifest_logs(const std::filesystem::path& manifest_path,
                                                     io::Manifest& manifest,
                                                     std::ostream& err) {
  manifest = io::manifest_from_json(io::read_json(manifest_path));
  const auto base = manifest_path.parent_path();
  std::vector<TrajectoryLog> logs;
  std::vector<std::string> failures;
  for (const auto& rel : manifest.logs) {
    try {
      logs.push_back(io::load_log(base / rel));
    } catch (const std::exception& e) {
      failures.push_back(rel + ": " + e.what());
    }
  }
  if (!failures.empty()) {
    for (const auto& f : failures) err << "error: " << f << '\n';
    throw DataError(std::to_string(failures.size()) + " log file(s) failed to parse");
  }
  return logs;
}

}  // namespace detail

// --- commands --------------------------------------------------------------

inline int cmd_synth(const RunConfig& cfg, std::ostream& out) {
  PresetFamily family = parse_preset_family(cfg.family);
  FamilySetup setup = load_family(family, cfg.presets);
  std::vector<TrajectoryType> types = detail::resolve_types(cfg.types);
  std::optional<FrictionParams> truth;
  if (!cfg.params.empty()) truth = io::load_params(cfg.params).friction;
  if (cfg.out.empty()) throw ConfigError("synth needs --out");

  std::vector<TrajectoryLog> logs = synthesize_dataset(setup, types, cfg.noise, cfg.seed,
                                                       truth ? &*truth : nullptr);
  const std::filesystem::path dir = cfg.out;
  detail::ensure_directory(dir);
  io::Manifest manifest{cfg.family, cfg.seed, cfg.noise, {}};
  for (const auto& log : logs) {
    std::string name = log.header.id + ".log.json";
    io::write_file(dir / name, io::serialize_log(log));
    manifest.logs.push_back(name);
  }
  io::write_file(dir / "manifest.json", io::to_json(manifest).dump(2) + "\n");
  out << "wrote " << logs.size() << " logs and " << (dir / "manifest.json").string() << '\n';
  return kOk;
}

inline int cmd_identify(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (cfg.manifest.empty()) throw ConfigError("identify needs --manifest");
  if (cfg.out.empty()) throw ConfigError("identify needs --out");
  std::vector<FrictionModel> models = detail::resolve_models(cfg.models);
  IdentifyOptions opt;
  opt.budget = cfg.budget;
  if (cfg.budget_unit == "evaluations") {
    opt.unit = BudgetUnit::Evaluations;
  } else if (cfg.budget_unit == "generations") {
    opt.unit = BudgetUnit::Generations;
  } else {
    throw ConfigError("--budget-unit must be 'evaluations' or 'generations'");
  }
  opt.seed = cfg.seed;
  opt.threads = cfg.threads;
  if (cfg.progress) {
    opt.progress = [&out](int gen, int evals, double best) {
      out << "generation " << gen << " evaluations " << evals << " best " << best << '\n'
          << std::flush;
    };
  }

  io::Manifest manifest;
  std::vector<TrajectoryLog> logs = detail::load_manifest_logs(cfg.manifest, manifest, err);
  DatasetSplit sp = split(std::span<const TrajectoryLog>(logs), cfg.seed);
  std::vector<TrajectoryLog> ident, valid;
  std::set<std::string> valid_ids(sp.validation.begin(), sp.validation.end());
  for (auto& l : logs) (valid_ids.count(l.header.id) ? valid : ident).push_back(std::move(l));

  const std::filesystem::path dir = cfg.out;
  detail::ensure_directory(dir);
  io::write_file(dir / "split.json",
                 nlohmann::json{{"seed", sp.seed},
                                {"identification", sp.identification},
                                {"validation", sp.validation}}
                         .dump(2) +
                     "\n");

  std::ostringstream table;
  table << "model\tidentification_mae\tvalidation_mae\n";
  for (FrictionModel m : models) {
    if (cfg.progress) out << "identifying " << to_string(m) << '\n';
    ParamSpace space = ParamSpace::defaults(m, cfg.identify_motor);
    IdentResult r = identify(ident, space, opt);
    evaluate(r, valid, space);
    io::write_file(dir / ("report_" + std::string(to_string(m)) + ".json"), serialize_report(r));
    table << to_string(m) << '\t' << detail::fmt(r.identification_mae) << '\t'
          << detail::fmt(r.validation_mae.value_or(NAN)) << '\n';
  }
  io::write_file(dir / "comparison.tsv", table.str());
  out << table.str();
  return kOk;
}

inline int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
  if (cfg.log.empty() || cfg.params.empty()) {
    throw ConfigError("simulate needs --log and --params");
  }
  if (cfg.out.empty()) throw ConfigError("simulate needs --out");
  TrajectoryLog log = io::load_log(cfg.log);
  io::ParamsFile params = io::load_params(cfg.params);
  if (!cfg.expect_model.empty() &&
      parse_friction_model(cfg.expect_model) != params.friction.model()) {
    throw DataError("params file holds model " + std::string(to_string(params.friction.model())) +
                    ", expected " + cfg.expect_model);
  }
  ActuatorModel actuator = params.actuator.value_or(log.header.actuator);
  Rollout r = rollout(log.header.bench, actuator, params.friction,
                      SimState{log.measured.front(), 0.0}, log.target);

  std::ostringstream series;
  series << "t\ttarget\tmeasured\tsimulated\terror\n";
  double sum = 0.0;
  for (std::size_t k = 0; k < log.size(); ++k) {
    double e = log.measured[k] - r.theta[k];
    sum += std::abs(e);
    series << detail::fmt(log.t[k]) << '\t' << (log.target[k] ? detail::fmt(*log.target[k]) : "nan")
           << '\t' << detail::fmt(log.measured[k]) << '\t' << detail::fmt(r.theta[k]) << '\t'
           << detail::fmt(e) << '\n';
  }
  io::write_file(cfg.out, series.str());
  out << "MAE " << detail::fmt(sum / static_cast<double>(log.size())) << '\n';
  return kOk;
}

inline std::string bound_token(const Bound& b) {
  switch (b.kind) {
    case BoundKind::Finite: return detail::fmt(b.value);
    case BoundKind::Unbounded: return "unbounded";
    case BoundKind::BeyondRange: return "beyond_range";
  }
  return "";
}

inline int cmd_diagram(const RunConfig& cfg, std::ostream& out) {
  if (cfg.params.empty()) throw ConfigError("diagram needs --params");
  if (cfg.out.empty()) throw ConfigError("diagram needs --out");
  if (cfg.tau_m_range.size() != 3) throw ConfigError("--tau-m-range takes LO HI COUNT");
  const double lo = cfg.tau_m_range[0], hi = cfg.tau_m_range[1];
  const double count = cfg.tau_m_range[2];
  if (!(count >= 1.0) || count != std::floor(count) || !(lo <= hi)) {
    throw ConfigError("--tau-m-range needs LO <= HI and an integer COUNT >= 1");
  }
  const auto n = static_cast<std::size_t>(count);
  std::vector<double> grid(n);
  for (std::size_t i = 0; i < n; ++i) {
    grid[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  FrictionParams friction = io::load_params(cfg.params).friction;
  std::vector<DiagramRow> rows = diagram(friction, grid, cfg.velocity_levels);
  std::ostringstream table;
  table << "tau_m\tvelocity\tdrive\tbackdrive\n";
  for (const auto& r : rows) {
    table << detail::fmt(r.tau_m) << '\t' << detail::fmt(r.velocity) << '\t'
          << bound_token(r.drive) << '\t' << bound_token(r.backdrive) << '\n';
  }
  io::write_file(cfg.out, table.str());
  out << "wrote " << rows.size() << " rows to " << cfg.out << '\n';
  return kOk;
}

// --- entry point -----------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  RunConfig cfg;
  CLI::App app{"Servo actuator friction toolkit: synthesize, identify, simulate, diagram"};
  app.name("servobench");
  app.require_subcommand(1);

  std::string config_file;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_file, "JSON file whose keys mirror the flag names");
    sub->add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
    sub->add_option("--out", cfg.out, "Output directory or file");
  };

  CLI::App* synth = app.add_subcommand("synth", "Write a synthetic dataset and its manifest");
  common(synth);
  synth->add_option("--family", cfg.family, "Preset family: dynamixel or erob")
      ->capture_default_str();
  synth->add_option("--types", cfg.types, "Trajectory types, or 'all'")->delimiter(',');
  synth->add_option("--noise", cfg.noise, "Measurement noise std (rad)")->capture_default_str();
  synth->add_option("--params", cfg.params, "Ground-truth friction file (default: preset)");
  synth->add_option("--presets", cfg.presets, "Preset file")->capture_default_str();

  CLI::App* ident = app.add_subcommand("identify", "Fit friction models to a dataset");
  common(ident);
  ident->add_option("--manifest", cfg.manifest, "Dataset manifest");
  ident->add_option("--model", cfg.models, "Model tag(s), or 'all'")->delimiter(',');
  ident->add_option("--budget", cfg.budget, "Optimizer budget")->capture_default_str();
  ident->add_option("--budget-unit", cfg.budget_unit, "evaluations or generations")
      ->capture_default_str();
  ident->add_option("--threads", cfg.threads, "Worker threads (0: all cores)");
  ident->add_flag("--identify-motor", cfg.identify_motor, "Also fit k_t, R and J_m");
  ident->add_flag("--progress", cfg.progress, "Print the best cost after every generation");

  CLI::App* sim = app.add_subcommand("simulate", "Replay a log with given parameters");
  common(sim);
  sim->add_option("--log", cfg.log, "Trajectory log");
  sim->add_option("--params", cfg.params, "Friction (and optional actuator) parameters");
  sim->add_option("--model", cfg.expect_model, "Expected model tag of the params file");

  CLI::App* diag = app.add_subcommand("diagram", "Tabulate drive/backdrive boundaries");
  common(diag);
  diag->add_option("--params", cfg.params, "Friction parameters");
  diag->add_option("--tau-m-range", cfg.tau_m_range, "LO HI COUNT")->expected(3)->delimiter(',');
  diag->add_option("--velocity-levels", cfg.velocity_levels, "Velocities (rad/s)")
      ->delimiter(',');

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      int code = app.exit(e, out, err);
      return code == 0 ? kOk : kUsage;
    }
    CLI::App* active = app.get_subcommands().front();
    if (!config_file.empty()) detail::apply_config_file(*active, config_file);
    cfg.command = active->get_name();
    if (active == synth) return cmd_synth(cfg, out);
    if (active == ident) return cmd_identify(cfg, out, err);
    if (active == sim) return cmd_simulate(cfg, out);
    return cmd_diagram(cfg, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const DomainError& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const nlohmann::json::exception& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  }
}

}  // namespace servobench::cli
