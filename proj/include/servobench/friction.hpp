#pragma once

// Friction torque budget models for geared servo actuators, and the
// stop-torque resolution that turns a budget into an applied torque.
//
// Every model evaluates the maximum torque friction can exert at the current
// state (the "budget"). The budget is always split as
//
//   budget = K_v |omega| + static_part
//
// where static_part collects the Coulomb, load-dependent, Stribeck and
// quadratic terms. All six models are lowered onto one kernel
// (FrictionTerms) so that a richer model with its extra coefficients zeroed
// evaluates bit-identically to the simpler one.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "servobench/errors.hpp"

namespace servobench {

enum class FrictionModel { M1, M2, M3, M4, M5, M6 };

inline constexpr std::array<FrictionModel, 6> kAllFrictionModels{
    FrictionModel::M1, FrictionModel::M2, FrictionModel::M3,
    FrictionModel::M4, FrictionModel::M5, FrictionModel::M6};

inline std::string_view to_string(FrictionModel m) {
  static constexpr std::array<std::string_view, 6> names{"M1", "M2", "M3",
                                                         "M4", "M5", "M6"};
  return names[static_cast<std::size_t>(m)];
}

inline FrictionModel parse_friction_model(std::string_view tag) {
  for (FrictionModel m : kAllFrictionModels) {
    if (to_string(m) == tag) return m;
  }
  throw ConfigError("unknown friction model tag '" + std::string(tag) + "'");
}

template <typename T>
struct CoefficientField {
  std::string_view name;
  double T::*member;
};

/// M1: K_v |w| + K_c
struct CoulombViscous {
  static constexpr FrictionModel model = FrictionModel::M1;
  double k_v = 0.0;
  double k_c = 0.0;

  static constexpr std::array<CoefficientField<CoulombViscous>, 2> fields{{
      {"K_v", &CoulombViscous::k_v},
      {"K_c", &CoulombViscous::k_c},
  }};
};

/// M2: M1 + exp(-|w/v_s|^alpha) K_c^s
struct Stribeck {
  static constexpr FrictionModel model = FrictionModel::M2;
  double k_v = 0.0;
  double k_c = 0.0;
  double k_cs = 0.0;
  double v_s = 1.0;
  double alpha = 1.0;

  static constexpr std::array<CoefficientField<Stribeck>, 5> fields{{
      {"K_v", &Stribeck::k_v},
      {"K_c", &Stribeck::k_c},
      {"K_cs", &Stribeck::k_cs},
      {"v_s", &Stribeck::v_s},
      {"alpha", &Stribeck::alpha},
  }};
};

/// M3: M1 + K_l |tau_m - tau_e|
struct LoadDependent {
  static constexpr FrictionModel model = FrictionModel::M3;
  double k_v = 0.0;
  double k_c = 0.0;
  double k_l = 0.0;

  static constexpr std::array<CoefficientField<LoadDependent>, 3> fields{{
      {"K_v", &LoadDependent::k_v},
      {"K_c", &LoadDependent::k_c},
      {"K_l", &LoadDependent::k_l},
  }};
};

/// M4: M3 + exp(-|w/v_s|^alpha) [K_c^s + K_l^s |tau_m - tau_e|]
struct StribeckLoad {
  static constexpr FrictionModel model = FrictionModel::M4;
  double k_v = 0.0;
  double k_c = 0.0;
  double k_l = 0.0;
  double k_cs = 0.0;
  double k_ls = 0.0;
  double v_s = 1.0;
  double alpha = 1.0;

  static constexpr std::array<CoefficientField<StribeckLoad>, 7> fields{{
      {"K_v", &StribeckLoad::k_v},
      {"K_c", &StribeckLoad::k_c},
      {"K_l", &StribeckLoad::k_l},
      {"K_cs", &StribeckLoad::k_cs},
      {"K_ls", &StribeckLoad::k_ls},
      {"v_s", &StribeckLoad::v_s},
      {"alpha", &StribeckLoad::alpha},
  }};
};

/// M5: directional load dependence, |K_m tau_m - K_e tau_e| in place of
/// K_l |tau_m - tau_e|, for both the moving and the Stribeck terms.
struct Directional {
  static constexpr FrictionModel model = FrictionModel::M5;
  double k_v = 0.0;
  double k_c = 0.0;
  double k_m = 0.0;
  double k_e = 0.0;
  double k_cs = 0.0;
  double k_ms = 0.0;
  double k_es = 0.0;
  double v_s = 1.0;
  double alpha = 1.0;

  static constexpr std::array<CoefficientField<Directional>, 9> fields{{
      {"K_v", &Directional::k_v},
      {"K_c", &Directional::k_c},
      {"K_m", &Directional::k_m},
      {"K_e", &Directional::k_e},
      {"K_cs", &Directional::k_cs},
      {"K_ms", &Directional::k_ms},
      {"K_es", &Directional::k_es},
      {"v_s", &Directional::v_s},
      {"alpha", &Directional::alpha},
  }};
};

/// M6: M5 plus a quadratic term inside the Stribeck bracket. The quadratic
/// acts on the smaller of the two torques: K_e^q tau_e^2 when
/// |tau_m| >= |tau_e|, K_m^q tau_m^2 otherwise.
struct Quadratic {
  static constexpr FrictionModel model = FrictionModel::M6;
  double k_v = 0.0;
  double k_c = 0.0;
  double k_m = 0.0;
  double k_e = 0.0;
  double k_cs = 0.0;
  double k_ms = 0.0;
  double k_es = 0.0;
  double v_s = 1.0;
  double alpha = 1.0;
  double k_mq = 0.0;
  double k_eq = 0.0;

  static constexpr std::array<CoefficientField<Quadratic>, 11> fields{{
      {"K_v", &Quadratic::k_v},
      {"K_c", &Quadratic::k_c},
      {"K_m", &Quadratic::k_m},
      {"K_e", &Quadratic::k_e},
      {"K_cs", &Quadratic::k_cs},
      {"K_ms", &Quadratic::k_ms},
      {"K_es", &Quadratic::k_es},
      {"v_s", &Quadratic::v_s},
      {"alpha", &Quadratic::alpha},
      {"K_mq", &Quadratic::k_mq},
      {"K_eq", &Quadratic::k_eq},
  }};
};

/// Flattened coefficients shared by all six models.
struct FrictionTerms {
  double k_v = 0.0;
  double k_c = 0.0;
  double k_m = 0.0;
  double k_e = 0.0;
  bool stribeck = false;
  double k_cs = 0.0;
  double k_ms = 0.0;
  double k_es = 0.0;
  double v_s = 1.0;
  double alpha = 1.0;
  bool quadratic = false;
  double k_mq = 0.0;
  double k_eq = 0.0;
};

inline FrictionTerms lower(const CoulombViscous& p) {
  return {.k_v = p.k_v, .k_c = p.k_c};
}
inline FrictionTerms lower(const Stribeck& p) {
  return {.k_v = p.k_v,
          .k_c = p.k_c,
          .stribeck = true,
          .k_cs = p.k_cs,
          .v_s = p.v_s,
          .alpha = p.alpha};
}
inline FrictionTerms lower(const LoadDependent& p) {
  return {.k_v = p.k_v, .k_c = p.k_c, .k_m = p.k_l, .k_e = p.k_l};
}
inline FrictionTerms lower(const StribeckLoad& p) {
  return {.k_v = p.k_v,
          .k_c = p.k_c,
          .k_m = p.k_l,
          .k_e = p.k_l,
          .stribeck = true,
          .k_cs = p.k_cs,
          .k_ms = p.k_ls,
          .k_es = p.k_ls,
          .v_s = p.v_s,
          .alpha = p.alpha};
}
inline FrictionTerms lower(const Directional& p) {
  return {.k_v = p.k_v,
          .k_c = p.k_c,
          .k_m = p.k_m,
          .k_e = p.k_e,
          .stribeck = true,
          .k_cs = p.k_cs,
          .k_ms = p.k_ms,
          .k_es = p.k_es,
          .v_s = p.v_s,
          .alpha = p.alpha};
}
inline FrictionTerms lower(const Quadratic& p) {
  return {.k_v = p.k_v,
          .k_c = p.k_c,
          .k_m = p.k_m,
          .k_e = p.k_e,
          .stribeck = true,
          .k_cs = p.k_cs,
          .k_ms = p.k_ms,
          .k_es = p.k_es,
          .v_s = p.v_s,
          .alpha = p.alpha,
          .quadratic = true,
          .k_mq = p.k_mq,
          .k_eq = p.k_eq};
}

/// exp(-|w/v_s|^alpha), exactly 1 at w = 0.
inline double stribeck_factor(double omega, double v_s, double alpha) {
  if (omega == 0.0) return 1.0;
  return std::exp(-std::pow(std::abs(omega / v_s), alpha));
}

/// Budget without the viscous K_v|w| term. Inputs are assumed finite.
inline double static_budget(const FrictionTerms& t, double tau_m, double tau_e,
                            double omega) {
  double moving = t.k_c + std::abs(t.k_m * tau_m - t.k_e * tau_e);
  double resting = 0.0;
  if (t.stribeck) {
    double q = 0.0;
    if (t.quadratic) {
      // |tau_m| == |tau_e| takes the K_e^q branch.
      q = std::abs(tau_m) >= std::abs(tau_e) ? t.k_eq * tau_e * tau_e
                                              : t.k_mq * tau_m * tau_m;
    }
    resting = stribeck_factor(omega, t.v_s, t.alpha) *
              ((t.k_cs + std::abs(t.k_ms * tau_m - t.k_es * tau_e)) + q);
  }
  return moving + resting;
}

/// Full budget, unchecked. Hot path for the integrator.
inline double budget_unchecked(const FrictionTerms& t, double tau_m,
                               double tau_e, double omega) {
  return t.k_v * std::abs(omega) + static_budget(t, tau_m, tau_e, omega);
}

/// Asymptotic growth rate of the budget along tau_e -> +/-inf at fixed
/// tau_m; used to tell self-locking apart from a bounded static area that
/// merely extends past the search range.
inline double external_load_slope(const FrictionTerms& t, double omega) {
  double slope = t.k_e;
  if (t.stribeck) slope += stribeck_factor(omega, t.v_s, t.alpha) * t.k_es;
  return slope;
}

struct FrictionInputs {
  double tau_m = 0.0;
  double tau_e = 0.0;
  double omega = 0.0;
};

class FrictionParams {
 public:
  using Variant = std::variant<CoulombViscous, Stribeck, LoadDependent,
                               StribeckLoad, Directional, Quadratic>;

  FrictionParams() = default;
  template <typename T>
    requires std::is_constructible_v<Variant, T>
  FrictionParams(T p) : v_(std::move(p)) {}  // NOLINT(runtime/explicit)

  FrictionModel model() const {
    return std::visit([](const auto& p) { return p.model; }, v_);
  }
  const Variant& variant() const { return v_; }

  template <typename T>
  const T& as() const {
    return std::get<T>(v_);
  }

  /// Default-initialised parameters of the given model (all zeros,
  /// v_s = alpha = 1).
  static FrictionParams zero(FrictionModel m) {
    switch (m) {
      case FrictionModel::M1: return CoulombViscous{};
      case FrictionModel::M2: return Stribeck{};
      case FrictionModel::M3: return LoadDependent{};
      case FrictionModel::M4: return StribeckLoad{};
      case FrictionModel::M5: return Directional{};
      case FrictionModel::M6: return Quadratic{};
    }
    throw ConfigError("invalid friction model");
  }

  static std::vector<std::string_view> coefficient_names(FrictionModel m) {
    return zero(m).names();
  }

  std::vector<std::string_view> names() const {
    return std::visit(
        [](const auto& p) {
          std::vector<std::string_view> out;
          for (const auto& f : p.fields) out.push_back(f.name);
          return out;
        },
        v_);
  }

  std::vector<double> values() const {
    return std::visit(
        [](const auto& p) {
          std::vector<double> out;
          for (const auto& f : p.fields) out.push_back(p.*(f.member));
          return out;
        },
        v_);
  }

  /// Coefficients in the order of coefficient_names(m).
  static FrictionParams from_values(FrictionModel m,
                                    std::span<const double> values) {
    FrictionParams out = zero(m);
    std::visit(
        [&](auto& p) {
          if (values.size() != p.fields.size()) {
            throw ConfigError("model " + std::string(to_string(m)) +
                              " takes " + std::to_string(p.fields.size()) +
                              " coefficients, got " +
                              std::to_string(values.size()));
          }
          for (std::size_t i = 0; i < values.size(); ++i) {
            p.*(p.fields[i].member) = values[i];
          }
        },
        out.v_);
    return out;
  }

  std::optional<double> get(std::string_view name) const {
    return std::visit(
        [&](const auto& p) -> std::optional<double> {
          for (const auto& f : p.fields) {
            if (f.name == name) return p.*(f.member);
          }
          return std::nullopt;
        },
        v_);
  }

  /// Returns false when the model has no coefficient of that name.
  bool set(std::string_view name, double value) {
    return std::visit(
        [&](auto& p) {
          for (const auto& f : p.fields) {
            if (f.name == name) {
              p.*(f.member) = value;
              return true;
            }
          }
          return false;
        },
        v_);
  }

  FrictionTerms terms() const {
    return std::visit([](const auto& p) { return lower(p); }, v_);
  }

  /// Throws DomainError unless every coefficient is finite and >= 0, and
  /// v_s, alpha > 0 where present.
  void validate() const {
    std::visit(
        [](const auto& p) {
          for (const auto& f : p.fields) {
            double v = p.*(f.member);
            if (!std::isfinite(v) || v < 0.0) {
              throw DomainError("friction coefficient " + std::string(f.name) +
                                " must be finite and >= 0");
            }
            if ((f.name == "v_s" || f.name == "alpha") && !(v > 0.0)) {
              throw DomainError("friction coefficient " + std::string(f.name) +
                                " must be > 0");
            }
          }
        },
        v_);
  }

  friend bool operator==(const FrictionParams& a, const FrictionParams& b) {
    return a.model() == b.model() && a.values() == b.values();
  }

 private:
  Variant v_ = CoulombViscous{};
};

/// Friction torque budget (N.m) for the given model and state.
inline double friction_budget(const FrictionParams& params,
                              const FrictionInputs& in) {
  detail::require_finite(in.tau_m, "tau_m");
  detail::require_finite(in.tau_e, "tau_e");
  detail::require_finite(in.omega, "omega");
  return budget_unchecked(params.terms(), in.tau_m, in.tau_e, in.omega);
}

/// Friction torque that would bring the joint to rest in one step.
inline double stop_torque(double inertia, double dt, double omega,
                          double tau_m, double tau_e) {
  if (!(inertia > 0.0)) throw DomainError("inertia must be > 0");
  if (!(dt > 0.0)) throw DomainError("timestep must be > 0");
  detail::require_finite(inertia, "inertia");
  detail::require_finite(dt, "dt");
  detail::require_finite(omega, "omega");
  detail::require_finite(tau_m, "tau_m");
  detail::require_finite(tau_e, "tau_e");
  return -(inertia / dt * omega + tau_m + tau_e);
}

/// Stop torque clipped to [-budget, budget].
inline double applied_friction(double stop, double budget) {
  detail::require_finite(stop, "stop torque");
  detail::require_finite(budget, "friction budget");
  if (budget < 0.0) throw DomainError("friction budget must be >= 0");
  return std::clamp(stop, -budget, budget);
}

}  // namespace servobench
