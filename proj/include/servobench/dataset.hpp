#pragma once

// Trajectory logs, excitation profiles, synthetic log generation and the
// identification / validation split.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "servobench/actuator.hpp"
#include "servobench/errors.hpp"
#include "servobench/friction.hpp"
#include "servobench/pendulum.hpp"

namespace servobench {

enum class TrajectoryType {
  AcceleratedOscillations,
  SlowWithSubOscillations,
  RaiseLower,
  LiftDrop,
};

inline constexpr std::array<TrajectoryType, 4> kAllTrajectoryTypes{
    TrajectoryType::AcceleratedOscillations,
    TrajectoryType::SlowWithSubOscillations, TrajectoryType::RaiseLower,
    TrajectoryType::LiftDrop};

inline std::string_view to_string(TrajectoryType t) {
  switch (t) {
    case TrajectoryType::AcceleratedOscillations: return "accelerated-oscillations";
    case TrajectoryType::SlowWithSubOscillations: return "slow-with-sub-oscillations";
    case TrajectoryType::RaiseLower: return "raise-lower";
    case TrajectoryType::LiftDrop: return "lift-drop";
  }
  return "?";
}

inline TrajectoryType parse_trajectory_type(std::string_view s) {
  for (TrajectoryType t : kAllTrajectoryTypes) {
    if (to_string(t) == s) return t;
  }
  throw ConfigError("unknown trajectory type '" + std::string(s) + "'");
}

/// Shape parameters of the four excitation profiles. Angles are offsets from
/// `center` (rad), frequencies in Hz, times in s.
struct TrajectoryParams {
  double duration = 6.0;
  double center = 0.0;

  // Constant-amplitude chirp, frequency rising linearly f0 -> f1.
  double chirp_amplitude = 0.8;
  double chirp_f0 = 0.1;
  double chirp_f1 = 1.2;

  // Slow sinusoid plus a small fast one.
  double slow_amplitude = 1.0;
  double slow_frequency = 0.2;
  double sub_amplitude = 0.2;
  double sub_frequency = 2.0;

  // Linear raise over raise_time, then a slow linear return to center.
  double raise_amplitude = 1.4;
  double raise_time = 1.0;

  // Raise over lift_time, hold for hold_time, then release.
  double lift_amplitude = 1.4;
  double lift_time = 1.0;
  double hold_time = 1.0;

  void validate(TrajectoryType type) const {
    auto positive = [](double v, const char* what) {
      if (!std::isfinite(v) || !(v > 0.0)) {
        throw ConfigError(std::string(what) + " must be > 0");
      }
    };
    auto non_negative = [](double v, const char* what) {
      if (!std::isfinite(v) || v < 0.0) {
        throw ConfigError(std::string(what) + " must be >= 0");
      }
    };
    positive(duration, "duration");
    if (!std::isfinite(center)) throw ConfigError("center must be finite");
    switch (type) {
      case TrajectoryType::AcceleratedOscillations:
        non_negative(chirp_amplitude, "chirp amplitude");
        positive(chirp_f0, "chirp start frequency");
        positive(chirp_f1, "chirp end frequency");
        if (chirp_f1 < chirp_f0) {
          throw ConfigError("chirp end frequency must be >= start frequency");
        }
        break;
      case TrajectoryType::SlowWithSubOscillations:
        non_negative(slow_amplitude, "slow amplitude");
        non_negative(sub_amplitude, "sub amplitude");
        positive(slow_frequency, "slow frequency");
        positive(sub_frequency, "sub frequency");
        break;
      case TrajectoryType::RaiseLower:
        non_negative(raise_amplitude, "raise amplitude");
        positive(raise_time, "raise time");
        if (raise_time >= duration) {
          throw ConfigError("raise time must be shorter than the duration");
        }
        break;
      case TrajectoryType::LiftDrop:
        non_negative(lift_amplitude, "lift amplitude");
        positive(lift_time, "lift time");
        non_negative(hold_time, "hold time");
        if (lift_time + hold_time >= duration) {
          throw ConfigError("lift-drop needs a released tail: lift + hold "
                            "must be shorter than the duration");
        }
        break;
    }
  }
};

/// Target series; an empty entry means the actuator is released.
using TargetSeries = std::vector<std::optional<double>>;

inline std::size_t sample_count(double duration, double dt) {
  double n = std::round(duration / dt);
  if (n < 2.0) throw ConfigError("a series needs at least 2 samples");
  return static_cast<std::size_t>(n);
}

inline TargetSeries generate_targets(TrajectoryType type,
                                     const TrajectoryParams& p, double dt) {
  if (!std::isfinite(dt) || !(dt > 0.0)) throw ConfigError("dt must be > 0");
  p.validate(type);
  const std::size_t n = sample_count(p.duration, dt);
  constexpr double two_pi = 2.0 * std::numbers::pi;
  TargetSeries out(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * dt;
    double offset = 0.0;
    switch (type) {
      case TrajectoryType::AcceleratedOscillations: {
        double phase = p.chirp_f0 * t +
                       0.5 * (p.chirp_f1 - p.chirp_f0) / p.duration * t * t;
        offset = p.chirp_amplitude * std::sin(two_pi * phase);
        break;
      }
      case TrajectoryType::SlowWithSubOscillations:
        offset = p.slow_amplitude * std::sin(two_pi * p.slow_frequency * t) +
                 p.sub_amplitude * std::sin(two_pi * p.sub_frequency * t);
        break;
      case TrajectoryType::RaiseLower:
        if (t <= p.raise_time) {
          offset = p.raise_amplitude * t / p.raise_time;
        } else {
          double fall = p.duration - p.raise_time;
          offset = p.raise_amplitude * std::max(0.0, 1.0 - (t - p.raise_time) / fall);
        }
        break;
      case TrajectoryType::LiftDrop:
        if (t >= p.lift_time + p.hold_time) {
          continue;  // released
        }
        offset = p.lift_amplitude * std::min(1.0, t / p.lift_time);
        break;
    }
    out[k] = p.center + offset;
  }
  return out;
}

struct LogHeader {
  std::string id;
  TrajectoryType trajectory = TrajectoryType::AcceleratedOscillations;
  BenchConfig bench;
  ActuatorModel actuator;

  friend bool operator==(const LogHeader&, const LogHeader&) = default;
};

/// One recorded (or synthesized) trajectory, stored column-wise.
struct TrajectoryLog {
  LogHeader header;
  std::vector<double> t;
  TargetSeries target;
  std::vector<double> measured;
  std::optional<FrictionParams> ground_truth;

  std::size_t size() const { return t.size(); }

  /// Throws DataError on inconsistent columns, non-uniform timestamps or
  /// non-finite measurements. Never repairs.
  void validate() const {
    const std::string where = "log '" + header.id + "': ";
    if (t.size() != target.size() || t.size() != measured.size()) {
      throw DataError(where + "column lengths differ");
    }
    if (t.size() < 2) throw DataError(where + "needs at least 2 samples");
    try {
      header.bench.validate();
      header.actuator.validate();
      if (ground_truth) ground_truth->validate();
    } catch (const std::exception& e) {
      throw DataError(where + e.what());
    }
    const double dt = header.bench.dt;
    for (std::size_t k = 0; k < t.size(); ++k) {
      if (!std::isfinite(t[k])) throw DataError(where + "non-finite timestamp");
      if (!std::isfinite(measured[k])) {
        throw DataError(where + "non-finite measurement at sample " +
                        std::to_string(k));
      }
      if (target[k] && !std::isfinite(*target[k])) {
        throw DataError(where + "non-finite target at sample " + std::to_string(k));
      }
      if (k > 0) {
        double step = t[k] - t[k - 1];
        if (!(step > 0.0) || std::abs(step - dt) > 1e-6 * dt) {
          throw DataError(where + "timestamps not uniformly spaced by dt at sample " +
                          std::to_string(k));
        }
      }
    }
  }

  friend bool operator==(const TrajectoryLog&, const TrajectoryLog&) = default;
};

/// Simulates the bench from rest at the first target and records the
/// positions with additive Gaussian noise of standard deviation `noise`.
inline TrajectoryLog synthesize_log(const LogHeader& header,
                                    const FrictionParams& truth,
                                    const TargetSeries& targets, double noise,
                                    std::uint64_t seed) {
  if (!std::isfinite(noise) || noise < 0.0) {
    throw ConfigError("noise standard deviation must be >= 0");
  }
  if (targets.size() < 2) throw ConfigError("a log needs at least 2 samples");
  if (!targets.front()) {
    throw ConfigError("the first target must not be a release marker");
  }
  SimState initial{*targets.front(), 0.0};
  Rollout r = rollout(header.bench, header.actuator, truth, initial, targets);

  TrajectoryLog log;
  log.header = header;
  log.target = targets;
  log.measured = std::move(r.theta);
  log.t.resize(targets.size());
  for (std::size_t k = 0; k < targets.size(); ++k) {
    log.t[k] = static_cast<double>(k) * header.bench.dt;
  }
  if (noise > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, noise);
    for (double& m : log.measured) m += gauss(rng);
  }
  log.ground_truth = truth;
  return log;
}

// ---------------------------------------------------------------------------
// Bench configuration grids

enum class PresetFamily { Dynamixel, Erob };

inline std::string_view to_string(PresetFamily f) {
  return f == PresetFamily::Dynamixel ? "dynamixel" : "erob";
}

inline PresetFamily parse_preset_family(std::string_view s) {
  if (s == "dynamixel") return PresetFamily::Dynamixel;
  if (s == "erob") return PresetFamily::Erob;
  throw ConfigError("unknown preset family '" + std::string(s) + "'");
}

struct BenchPreset {
  double mass = 0.0;    ///< kg
  double length = 0.0;  ///< m
  double gain = 0.0;    ///< proportional gain

  friend bool operator==(const BenchPreset&, const BenchPreset&) = default;
};

struct PresetGrid {
  std::vector<double> masses;
  std::vector<double> lengths;
  std::vector<double> gains;

  /// Cartesian product, mass-major then length then gain.
  std::vector<BenchPreset> expand() const {
    std::vector<BenchPreset> out;
    for (double m : masses)
      for (double l : lengths)
        for (double g : gains) out.push_back({m, l, g});
    return out;
  }

  friend bool operator==(const PresetGrid&, const PresetGrid&) = default;
};

/// Mass / length / proportional-gain grids of the two actuator families.
inline PresetGrid table1_grid(PresetFamily family) {
  if (family == PresetFamily::Dynamixel) {
    return {{0.5, 1.0, 1.5}, {0.1, 0.15, 0.2}, {4.0, 8.0, 16.0, 32.0}};
  }
  return {{3.1, 8.2, 12.7, 14.6, 19.6}, {0.5}, {10.0, 25.0, 50.0, 100.0}};
}

inline std::vector<BenchPreset> table1_presets(PresetFamily family) {
  return table1_grid(family).expand();
}

// ---------------------------------------------------------------------------
// Identification / validation split

struct DatasetSplit {
  std::vector<std::string> identification;
  std::vector<std::string> validation;
  std::uint64_t seed = 0;
};

struct LogRef {
  std::string id;
  TrajectoryType trajectory;
};

inline constexpr double kValidationFraction = 0.25;

/// Seeded 75/25 split, stratified by trajectory type. The validation count
/// is round(25% of N); per-type quotas use floor(25% of n_type), and the
/// leftover slots go to the types with the largest remainders (ties broken
/// by a seeded shuffle). A type with >= 2 logs always keeps one log on each
/// side when the quotas allow it.
inline DatasetSplit split(std::span<const LogRef> logs, std::uint64_t seed) {
  if (logs.size() < 4) {
    throw ConfigError("splitting needs at least 4 logs, got " +
                      std::to_string(logs.size()));
  }
  {
    std::vector<std::string> ids;
    for (const auto& l : logs) ids.push_back(l.id);
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
      throw DataError("duplicate log id in dataset");
    }
  }
  std::mt19937_64 rng(seed);

  std::map<TrajectoryType, std::vector<std::string>> groups;
  for (const auto& l : logs) groups[l.trajectory].push_back(l.id);

  const std::size_t n = logs.size();
  const auto n_valid = static_cast<std::size_t>(
      std::llround(kValidationFraction * static_cast<double>(n)));

  struct Quota {
    TrajectoryType type;
    std::size_t count;
    double remainder;
    std::size_t size;
    std::uint64_t tiebreak;
  };
  std::vector<Quota> quotas;
  std::size_t assigned = 0;
  for (auto& [type, ids] : groups) {
    std::sort(ids.begin(), ids.end());
    std::shuffle(ids.begin(), ids.end(), rng);
    double exact = kValidationFraction * static_cast<double>(ids.size());
    auto base = static_cast<std::size_t>(std::floor(exact));
    quotas.push_back({type, base, exact - static_cast<double>(base), ids.size(), rng()});
    assigned += base;
  }
  // Hand out the remaining validation slots.
  std::vector<std::size_t> order(quotas.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    // Types that would otherwise have no validation log come first.
    bool a_empty = quotas[a].count == 0 && quotas[a].size >= 2;
    bool b_empty = quotas[b].count == 0 && quotas[b].size >= 2;
    if (a_empty != b_empty) return a_empty;
    if (quotas[a].remainder != quotas[b].remainder) {
      return quotas[a].remainder > quotas[b].remainder;
    }
    return quotas[a].tiebreak < quotas[b].tiebreak;
  });
  // First pass keeps one identification log per type; the second lifts that
  // restriction if the quota still cannot be met.
  for (bool keep_one : {true, false}) {
    bool progress = true;
    while (assigned < n_valid && progress) {
      progress = false;
      for (std::size_t i : order) {
        if (assigned == n_valid) break;
        Quota& q = quotas[i];
        std::size_t cap = keep_one ? q.size - 1 : q.size;
        if (q.count < cap) {
          ++q.count;
          ++assigned;
          progress = true;
        }
      }
    }
  }

  DatasetSplit out;
  out.seed = seed;
  for (const Quota& q : quotas) {
    const auto& ids = groups[q.type];
    for (std::size_t i = 0; i < ids.size(); ++i) {
      (i < q.count ? out.validation : out.identification).push_back(ids[i]);
    }
  }
  std::sort(out.identification.begin(), out.identification.end());
  std::sort(out.validation.begin(), out.validation.end());
  return out;
}

inline DatasetSplit split(std::span<const TrajectoryLog> logs, std::uint64_t seed) {
  std::vector<LogRef> refs;
  refs.reserve(logs.size());
  for (const auto& l : logs) refs.push_back({l.header.id, l.header.trajectory});
  return split(std::span<const LogRef>(refs), seed);
}

}  // namespace servobench
