#pragma once

// Structured-text documents: friction parameter files, actuator sections,
// trajectory logs and dataset manifests. Numbers are written in shortest
// round-trip form, so parse(serialize(x)) is bit-exact.

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "servobench/actuator.hpp"
#include "servobench/dataset.hpp"
#include "servobench/errors.hpp"
#include "servobench/friction.hpp"
#include "servobench/pendulum.hpp"

namespace servobench::io {

using nlohmann::json;

inline constexpr int kLogFormatVersion = 1;
inline constexpr std::string_view kAngleConvention =
    "theta=0 at upward vertical; tau_e = m*g*l*sin(theta)";

namespace detail {

inline void reject_unknown_keys(const json& doc, const std::set<std::string>& allowed,
                                std::string_view what) {
  if (!doc.is_object()) throw DataError(std::string(what) + " must be an object");
  for (const auto& [key, _] : doc.items()) {
    if (!allowed.count(key)) {
      throw DataError("unknown key '" + key + "' in " + std::string(what));
    }
  }
}

inline double number(const json& doc, const std::string& key, std::string_view what) {
  auto it = doc.find(key);
  if (it == doc.end()) {
    throw DataError("missing key '" + key + "' in " + std::string(what));
  }
  if (!it->is_number()) {
    throw DataError("key '" + key + "' in " + std::string(what) + " must be a number");
  }
  return it->get<double>();
}

inline double number_or(const json& doc, const std::string& key, double fallback,
                         std::string_view what) {
  return doc.contains(key) ? number(doc, key, what) : fallback;
}

inline std::string dump_number(double v) { return json(v).dump(); }

}  // namespace detail

// --- friction parameters -------------------------------------------------

inline json to_json(const FrictionParams& p) {
  json doc = json::object();
  doc["model"] = std::string(to_string(p.model()));
  auto names = p.names();
  auto values = p.values();
  for (std::size_t i = 0; i < names.size(); ++i) {
    doc[std::string(names[i])] = values[i];
  }
  return doc;
}

/// `extra_keys` are tolerated (and ignored) at the top level, e.g. an
/// embedded "actuator" section.
inline FrictionParams friction_from_json(const json& doc,
                                         const std::set<std::string>& extra_keys = {}) {
  if (!doc.is_object()) throw DataError("friction parameters must be an object");
  auto tag = doc.find("model");
  if (tag == doc.end() || !tag->is_string()) {
    throw DataError("friction parameters need a string 'model' tag");
  }
  FrictionModel model;
  try {
    model = parse_friction_model(tag->get<std::string>());
  } catch (const ConfigError& e) {
    throw DataError(e.what());
  }
  auto names = FrictionParams::coefficient_names(model);
  std::set<std::string> allowed(extra_keys);
  allowed.insert("model");
  for (auto n : names) allowed.insert(std::string(n));
  detail::reject_unknown_keys(doc, allowed, "friction parameters");

  std::vector<double> values;
  for (auto n : names) values.push_back(detail::number(doc, std::string(n), "friction parameters"));
  FrictionParams p = FrictionParams::from_values(model, values);
  try {
    p.validate();
  } catch (const DomainError& e) {
    throw DataError(e.what());
  }
  return p;
}

// --- actuator --------------------------------------------------------------

inline json to_json(const ActuatorModel& a) {
  json doc = json::object();
  doc["law"] = std::string(to_string(a.law.kind));
  doc["k_p"] = a.law.gains.k_p;
  doc["k_i"] = a.law.gains.k_i;
  doc["k_d"] = a.law.gains.k_d;
  doc["integral_clamp"] = a.law.gains.integral_clamp;
  doc["control_period"] = a.law.period;
  doc["k_t"] = a.motor.k_t;
  doc["R"] = a.motor.R;
  doc["U_max"] = a.motor.U_max;
  doc["I_heat"] = a.motor.I_heat ? json(*a.motor.I_heat) : json(nullptr);
  doc["J_m"] = a.motor.J_m;
  return doc;
}

inline ActuatorModel actuator_from_json(const json& doc) {
  constexpr std::string_view what = "actuator section";
  detail::reject_unknown_keys(doc,
                              {"law", "k_p", "k_i", "k_d", "integral_clamp",
                               "control_period", "k_t", "R", "U_max", "I_heat", "J_m"},
                              what);
  ActuatorModel a;
  auto law = doc.find("law");
  if (law == doc.end() || !law->is_string()) {
    throw DataError("actuator section needs a string 'law'");
  }
  try {
    a.law.kind = parse_law_kind(law->get<std::string>());
  } catch (const ConfigError& e) {
    throw DataError(e.what());
  }
  a.law.gains.k_p = detail::number_or(doc, "k_p", 0.0, what);
  a.law.gains.k_i = detail::number_or(doc, "k_i", 0.0, what);
  a.law.gains.k_d = detail::number_or(doc, "k_d", 0.0, what);
  a.law.gains.integral_clamp = detail::number_or(doc, "integral_clamp", 0.0, what);
  a.law.period = detail::number_or(doc, "control_period", 0.0, what);
  a.motor.k_t = detail::number(doc, "k_t", what);
  a.motor.R = detail::number(doc, "R", what);
  a.motor.U_max = detail::number(doc, "U_max", what);
  if (auto ih = doc.find("I_heat"); ih != doc.end() && !ih->is_null()) {
    a.motor.I_heat = detail::number(doc, "I_heat", what);
  }
  a.motor.J_m = detail::number(doc, "J_m", what);
  try {
    a.validate();
  } catch (const DomainError& e) {
    throw DataError(e.what());
  }
  return a;
}

// --- bench -----------------------------------------------------------------

inline json to_json(const BenchConfig& b) {
  return json{{"m", b.m}, {"l", b.l}, {"g", b.g}, {"dt", b.dt}};
}

inline BenchConfig bench_from_json(const json& doc) {
  constexpr std::string_view what = "bench section";
  detail::reject_unknown_keys(doc, {"m", "l", "g", "dt"}, what);
  BenchConfig b{detail::number(doc, "m", what), detail::number(doc, "l", what),
                detail::number(doc, "g", what), detail::number(doc, "dt", what)};
  try {
    b.validate();
  } catch (const DomainError& e) {
    throw DataError(e.what());
  }
  return b;
}

// --- parameter files (friction + optional actuator override) ---------------

struct ParamsFile {
  FrictionParams friction;
  std::optional<ActuatorModel> actuator;
};

inline json to_json(const ParamsFile& f) {
  json doc = to_json(f.friction);
  if (f.actuator) doc["actuator"] = to_json(*f.actuator);
  return doc;
}

inline ParamsFile params_from_json(const json& doc) {
  ParamsFile f{friction_from_json(doc, {"actuator"}), std::nullopt};
  if (doc.contains("actuator")) f.actuator = actuator_from_json(doc.at("actuator"));
  return f;
}

// --- trajectory logs -------------------------------------------------------

inline json header_to_json(const LogHeader& h) {
  return json{{"id", h.id},
              {"trajectory", std::string(to_string(h.trajectory))},
              {"angle_convention", std::string(kAngleConvention)},
              {"bench", to_json(h.bench)},
              {"actuator", to_json(h.actuator)}};
}

inline LogHeader header_from_json(const json& doc) {
  detail::reject_unknown_keys(doc, {"id", "trajectory", "angle_convention", "bench", "actuator"},
                              "log header");
  LogHeader h;
  if (!doc.contains("id") || !doc["id"].is_string()) {
    throw DataError("log header needs a string 'id'");
  }
  h.id = doc["id"].get<std::string>();
  if (!doc.contains("trajectory") || !doc["trajectory"].is_string()) {
    throw DataError("log header needs a string 'trajectory'");
  }
  try {
    h.trajectory = parse_trajectory_type(doc["trajectory"].get<std::string>());
  } catch (const ConfigError& e) {
    throw DataError(e.what());
  }
  if (!doc.contains("bench")) throw DataError("log header needs a 'bench' section");
  if (!doc.contains("actuator")) throw DataError("log header needs an 'actuator' section");
  h.bench = bench_from_json(doc["bench"]);
  h.actuator = actuator_from_json(doc["actuator"]);
  return h;
}

/// One sample per line so logs diff cleanly.
inline std::string serialize_log(const TrajectoryLog& log) {
  std::ostringstream os;
  os << "{\n\"format\": \"servobench-log\",\n\"version\": " << kLogFormatVersion
     << ",\n\"header\": " << header_to_json(log.header).dump(1) << ",\n";
  if (log.ground_truth) {
    os << "\"ground_truth\": " << to_json(*log.ground_truth).dump() << ",\n";
  }
  os << "\"samples\": [\n";
  for (std::size_t k = 0; k < log.size(); ++k) {
    os << '[' << detail::dump_number(log.t[k]) << ", "
       << (log.target[k] ? detail::dump_number(*log.target[k]) : std::string("null"))
       << ", " << detail::dump_number(log.measured[k]) << ']'
       << (k + 1 < log.size() ? ",\n" : "\n");
  }
  os << "]\n}\n";
  return os.str();
}

inline TrajectoryLog parse_log(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("log is not valid JSON: ") + e.what());
  }
  detail::reject_unknown_keys(doc, {"format", "version", "header", "ground_truth", "samples"},
                              "log");
  if (doc.value("format", "") != "servobench-log") {
    throw DataError("not a servobench log (bad 'format')");
  }
  if (!doc.contains("version") || doc["version"] != kLogFormatVersion) {
    throw DataError("unsupported log version");
  }
  if (!doc.contains("header")) throw DataError("log has no header");
  TrajectoryLog log;
  log.header = header_from_json(doc["header"]);
  if (doc.contains("ground_truth")) log.ground_truth = friction_from_json(doc["ground_truth"]);

  const json& samples = doc.value("samples", json());
  if (!samples.is_array()) throw DataError("log 'samples' must be an array");
  log.t.reserve(samples.size());
  log.target.reserve(samples.size());
  log.measured.reserve(samples.size());
  for (const auto& s : samples) {
    if (!s.is_array() || s.size() != 3 || !s[0].is_number() || !s[2].is_number() ||
        !(s[1].is_number() || s[1].is_null())) {
      throw DataError("log '" + log.header.id +
                      "': each sample must be [t, target|null, measured]");
    }
    log.t.push_back(s[0].get<double>());
    log.target.push_back(s[1].is_null() ? std::nullopt
                                        : std::optional<double>(s[1].get<double>()));
    log.measured.push_back(s[2].get<double>());
  }
  log.validate();
  return log;
}

// --- files -----------------------------------------------------------------

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

inline json read_json(const std::filesystem::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

inline TrajectoryLog load_log(const std::filesystem::path& path) {
  try {
    return parse_log(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

inline ParamsFile load_params(const std::filesystem::path& path) {
  try {
    return params_from_json(read_json(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

// --- manifest --------------------------------------------------------------

struct Manifest {
  std::string family;
  std::uint64_t seed = 0;
  double noise = 0.0;
  std::vector<std::string> logs;  ///< paths relative to the manifest
};

inline json to_json(const Manifest& m) {
  return json{{"format", "servobench-manifest"}, {"version", 1},      {"family", m.family},
              {"seed", m.seed},                  {"noise", m.noise}, {"logs", m.logs}};
}

inline Manifest manifest_from_json(const json& doc) {
  detail::reject_unknown_keys(doc, {"format", "version", "family", "seed", "noise", "logs"},
                              "manifest");
  if (doc.value("format", "") != "servobench-manifest") {
    throw DataError("not a servobench manifest");
  }
  Manifest m;
  m.family = doc.value("family", "");
  m.seed = doc.value("seed", std::uint64_t{0});
  m.noise = doc.value("noise", 0.0);
  if (!doc.contains("logs") || !doc["logs"].is_array()) {
    throw DataError("manifest needs a 'logs' array");
  }
  for (const auto& l : doc["logs"]) {
    if (!l.is_string()) throw DataError("manifest log entries must be strings");
    m.logs.push_back(l.get<std::string>());
  }
  return m;
}

}  // namespace servobench::io
