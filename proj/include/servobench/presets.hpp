#pragma once

// Family presets (bench grid, actuator, reference friction, excitation
// shapes) loaded from the versioned presets file, and dataset synthesis over
// a whole grid.

#include <cstdint>
#include <filesystem>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "servobench/dataset.hpp"
#include "servobench/errors.hpp"
#include "servobench/io.hpp"

namespace servobench {

struct FamilySetup {
  PresetFamily family = PresetFamily::Dynamixel;
  PresetGrid grid;
  double g = 9.81;
  double dt = 0.001;
  ActuatorModel actuator;  ///< k_p is overridden per grid point
  FrictionParams friction;
  TrajectoryParams trajectory;
};

namespace detail {

inline TrajectoryParams trajectory_from_json(const nlohmann::json& doc) {
  TrajectoryParams p;
  const std::pair<const char*, double TrajectoryParams::*> fields[] = {
      {"duration", &TrajectoryParams::duration},
      {"center", &TrajectoryParams::center},
      {"chirp_amplitude", &TrajectoryParams::chirp_amplitude},
      {"chirp_f0", &TrajectoryParams::chirp_f0},
      {"chirp_f1", &TrajectoryParams::chirp_f1},
      {"slow_amplitude", &TrajectoryParams::slow_amplitude},
      {"slow_frequency", &TrajectoryParams::slow_frequency},
      {"sub_amplitude", &TrajectoryParams::sub_amplitude},
      {"sub_frequency", &TrajectoryParams::sub_frequency},
      {"raise_amplitude", &TrajectoryParams::raise_amplitude},
      {"raise_time", &TrajectoryParams::raise_time},
      {"lift_amplitude", &TrajectoryParams::lift_amplitude},
      {"lift_time", &TrajectoryParams::lift_time},
      {"hold_time", &TrajectoryParams::hold_time},
  };
  std::set<std::string> allowed;
  for (const auto& [name, _] : fields) allowed.insert(name);
  io::detail::reject_unknown_keys(doc, allowed, "trajectory preset");
  for (const auto& [name, member] : fields) {
    if (doc.contains(name)) p.*member = io::detail::number(doc, name, "trajectory preset");
  }
  return p;
}

inline std::vector<double> number_list(const nlohmann::json& doc, const char* key) {
  if (!doc.contains(key) || !doc[key].is_array() || doc[key].empty()) {
    throw DataError(std::string("preset grid needs a non-empty '") + key + "' list");
  }
  std::vector<double> out;
  for (const auto& v : doc[key]) {
    if (!v.is_number()) throw DataError(std::string("preset grid '") + key + "' must be numeric");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace detail

inline FamilySetup family_from_json(PresetFamily family, const nlohmann::json& root) {
  if (root.value("format", "") != "servobench-presets") {
    throw DataError("not a servobench presets file");
  }
  const auto& fams = root.at("families");
  std::string key(to_string(family));
  if (!fams.contains(key)) throw DataError("presets file has no family '" + key + "'");
  const auto& doc = fams[key];
  io::detail::reject_unknown_keys(doc, {"grid", "bench", "actuator", "friction", "trajectory"},
                                  "family preset");
  FamilySetup s;
  s.family = family;
  const auto& grid = doc.at("grid");
  io::detail::reject_unknown_keys(grid, {"masses", "lengths", "gains"}, "preset grid");
  s.grid = {detail::number_list(grid, "masses"), detail::number_list(grid, "lengths"),
            detail::number_list(grid, "gains")};
  const auto& bench = doc.at("bench");
  io::detail::reject_unknown_keys(bench, {"g", "dt"}, "preset bench");
  s.g = io::detail::number(bench, "g", "preset bench");
  s.dt = io::detail::number(bench, "dt", "preset bench");
  nlohmann::json act = doc.at("actuator");
  if (!act.contains("k_p")) act["k_p"] = 0.0;
  s.actuator = io::actuator_from_json(act);
  s.friction = io::friction_from_json(doc.at("friction"));
  s.trajectory = detail::trajectory_from_json(doc.at("trajectory"));
  return s;
}

inline FamilySetup load_family(PresetFamily family, const std::filesystem::path& presets_file) {
  try {
    return family_from_json(family, io::read_json(presets_file));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(presets_file.string() + ": " + e.what());
  }
}

inline std::string format_grid_value(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

inline std::string log_id(PresetFamily family, const BenchPreset& p, TrajectoryType t) {
  return std::string(to_string(family)) + "_m" + format_grid_value(p.mass) + "_l" +
         format_grid_value(p.length) + "_kp" + format_grid_value(p.gain) + "_" +
         std::string(to_string(t));
}

/// Per-log noise seed derived from the dataset seed and the log index.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

/// One log per (grid point x trajectory type), grid-major. `truth`
/// overrides the family's reference friction when given.
inline std::vector<TrajectoryLog> synthesize_dataset(const FamilySetup& setup,
                                                     std::span<const TrajectoryType> types,
                                                     double noise, std::uint64_t seed,
                                                     const FrictionParams* truth = nullptr) {
  std::vector<TrajectoryLog> logs;
  std::uint64_t index = 0;
  const FrictionParams& friction = truth ? *truth : setup.friction;
  for (const BenchPreset& p : setup.grid.expand()) {
    for (TrajectoryType t : types) {
      LogHeader h;
      h.id = log_id(setup.family, p, t);
      h.trajectory = t;
      h.bench = {p.mass, p.length, setup.g, setup.dt};
      h.actuator = setup.actuator;
      h.actuator.law.gains.k_p = p.gain;
      TargetSeries targets = generate_targets(t, setup.trajectory, setup.dt);
      logs.push_back(synthesize_log(h, friction, targets, noise, derive_seed(seed, index++)));
    }
  }
  return logs;
}

}  // namespace servobench
