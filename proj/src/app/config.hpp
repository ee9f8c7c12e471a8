#pragma once

// JSON configuration for systems (one field or one potential) and for
// parametric families. Every validation failure names the offending member
// by JSON pointer.

#include <json.hpp>
#include <optional>
#include <string>

#include "degree.hpp"
#include "error.hpp"
#include "expr.hpp"
#include "field.hpp"
#include "flow.hpp"
#include "lyapunov.hpp"
#include "stability.hpp"

namespace stabkit::app {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

class ConfigError : public Error {
 public:
  ConfigError(std::string pointer, const std::string& message)
      : Error(ErrorCode::Config, (pointer.empty() ? std::string("/") : pointer) + ": " + message),
        pointer_(std::move(pointer)) {}
  const std::string& pointer() const noexcept { return pointer_; }

 private:
  std::string pointer_;
};

// Typed accessors; `ptr` is the pointer of `j` inside the document.
double get_number(const json& j, const std::string& ptr);
std::size_t get_count(const json& j, const std::string& ptr, bool allow_zero = false);
Vec get_vector(const json& j, const std::string& ptr, std::size_t expected = 0);
IntegratorSpec parse_integrator(const json& j, const std::string& ptr);

struct SystemConfig {
  json raw;
  std::string name;
  std::size_t dim = 0;
  std::optional<VectorExpr> field;
  std::optional<ScalarExpr> potential;
  std::optional<ScalarExpr> lyapunov;  // optional chart function for fields
  ParamMap params;
  std::optional<Vec> equilibrium_guess;
  std::optional<Vec> box_lo, box_hi;
  IntegratorSpec integrator;

  bool is_potential() const { return potential.has_value(); }
  // The field itself, or -grad V for a potential.
  Field flow_field() const;
  Potential potential_fn() const;  // requires is_potential()
  std::optional<Potential> lyapunov_fn() const;
  // Newton from the guess (origin when absent): a zero of the field, or the
  // minimum of the potential.
  Vec equilibrium() const;
};

SystemConfig parse_system(const json& j, const std::string& ptr = "");

struct FamilyConfig {
  json raw;
  std::string name;
  std::size_t dim = 0;
  std::string parameter = "t";
  VectorExpr family;
  ParamMap params;
  std::optional<VectorExpr> probe;       // obstruction curve in the parameter
  std::optional<VectorExpr> equilibria;  // curve of equilibria x_t
  double t_lo = 0.0, t_hi = 1.0;
  IntegratorSpec integrator;

  Field member(double t) const;
  FieldFamily field_family() const;
  CircleFamily circle_family() const;
  CircleProbe probe_fn() const;           // requires probe
  EquilibriumCurve equilibrium_curve() const;  // requires equilibria
};

FamilyConfig parse_family(const json& j, const std::string& ptr = "");

}  // namespace stabkit::app
