#include "config.hpp"

#include <cmath>
#include <set>

#include "error.hpp"

namespace stabkit::app {

namespace {

std::string child(const std::string& ptr, const std::string& key) {
  std::string escaped;
  for (char c : key) {
    if (c == '~')
      escaped += "~0";
    else if (c == '/')
      escaped += "~1";
    else
      escaped += c;
  }
  return ptr + "/" + escaped;
}
std::string child(const std::string& ptr, std::size_t i) { return ptr + "/" + std::to_string(i); }

void require_object(const json& j, const std::string& ptr) {
  if (!j.is_object()) throw ConfigError(ptr, "expected an object");
}

void reject_unknown(const json& j, const std::string& ptr, const std::set<std::string>& allowed) {
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) throw ConfigError(child(ptr, key), "unknown member");
}

void check_schema(const json& j, const std::string& ptr) {
  if (!j.contains("schema")) throw ConfigError(child(ptr, "schema"), "missing schema version");
  const json& s = j.at("schema");
  if (!s.is_number_integer() || s.get<long long>() != kSchemaVersion)
    throw ConfigError(child(ptr, "schema"), "unsupported schema version (expected 1)");
}

std::string get_string(const json& j, const std::string& ptr) {
  if (!j.is_string()) throw ConfigError(ptr, "expected a string");
  return j.get<std::string>();
}

std::vector<std::string> get_strings(const json& j, const std::string& ptr) {
  if (!j.is_array()) throw ConfigError(ptr, "expected an array of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(get_string(j[i], child(ptr, i)));
  return out;
}

ParamMap parse_params(const json& j, const std::string& ptr) {
  require_object(j, ptr);
  ParamMap out;
  for (const auto& [key, value] : j.items()) out[key] = get_number(value, child(ptr, key));
  return out;
}

std::vector<std::string> names_of(const ParamMap& m, const std::string& extra = {}) {
  std::vector<std::string> names;
  if (!extra.empty()) names.push_back(extra);
  for (const auto& [k, _] : m)
    if (k != extra) names.push_back(k);
  return names;
}

std::string parse_failure(const Error& e) {
  if (const auto* pe = dynamic_cast<const ParseError*>(&e))
    return std::string(error_code_name(e.code())) + " at byte " + std::to_string(pe->offset()) + ": " + pe->detail();
  return std::string(error_code_name(e.code())) + ": " + e.what();
}

ScalarExpr scalar_expr(const json& j, const std::string& ptr, std::size_t dim, const std::vector<std::string>& params) {
  std::string src = get_string(j, ptr);
  try {
    return ScalarExpr::parse(src, dim, params);
  } catch (const Error& e) {
    throw ConfigError(ptr, parse_failure(e));
  }
}

VectorExpr vector_expr(const json& j, const std::string& ptr, std::size_t dim, const std::vector<std::string>& params) {
  std::vector<std::string> srcs = get_strings(j, ptr);
  if (srcs.size() != dim)
    throw ConfigError(ptr, "expected " + std::to_string(dim) + " components, got " + std::to_string(srcs.size()));
  for (std::size_t i = 0; i < srcs.size(); ++i) scalar_expr(j[i], child(ptr, i), dim, params);
  return VectorExpr::parse(srcs, dim, params);
}

std::string identifier(const json& j, const std::string& ptr) {
  std::string s = get_string(j, ptr);
  bool ok = !s.empty() && (std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_');
  for (char c : s) ok = ok && (std::isalnum(static_cast<unsigned char>(c)) || c == '_');
  if (!ok) throw ConfigError(ptr, "expected an identifier");
  return s;
}

}  // namespace

double get_number(const json& j, const std::string& ptr) {
  if (!j.is_number()) throw ConfigError(ptr, "expected a number");
  double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(ptr, "expected a finite number");
  return v;
}

std::size_t get_count(const json& j, const std::string& ptr, bool allow_zero) {
  if (!j.is_number_integer() || j.get<long long>() < (allow_zero ? 0 : 1))
    throw ConfigError(ptr, allow_zero ? "expected a nonnegative integer" : "expected a positive integer");
  return static_cast<std::size_t>(j.get<long long>());
}

Vec get_vector(const json& j, const std::string& ptr, std::size_t expected) {
  if (!j.is_array()) throw ConfigError(ptr, "expected an array of numbers");
  if (expected && j.size() != expected)
    throw ConfigError(ptr, "expected " + std::to_string(expected) + " entries, got " + std::to_string(j.size()));
  Vec out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(get_number(j[i], child(ptr, i)));
  return out;
}

IntegratorSpec parse_integrator(const json& j, const std::string& ptr) {
  require_object(j, ptr);
  reject_unknown(j, ptr, {"rel_tol", "abs_tol", "max_step", "max_time", "max_steps", "escape_norm"});
  IntegratorSpec s;
  auto num = [&](const char* key, double& out) {
    if (j.contains(key)) out = get_number(j.at(key), child(ptr, key));
  };
  num("rel_tol", s.rel_tol);
  num("abs_tol", s.abs_tol);
  num("max_step", s.max_step);
  num("max_time", s.max_time);
  num("escape_norm", s.escape_norm);
  if (j.contains("max_steps")) s.max_steps = get_count(j.at("max_steps"), child(ptr, "max_steps"));
  try {
    s.validate();
  } catch (const Error& e) {
    throw ConfigError(ptr, e.what());
  }
  return s;
}

SystemConfig parse_system(const json& j, const std::string& ptr) {
  require_object(j, ptr);
  reject_unknown(j, ptr,
                 {"schema", "name", "dimension", "field", "potential", "lyapunov", "params", "equilibrium_guess",
                  "integrator", "sample_box"});
  check_schema(j, ptr);
  SystemConfig c;
  c.raw = j;
  if (j.contains("name")) c.name = get_string(j.at("name"), child(ptr, "name"));
  if (!j.contains("dimension")) throw ConfigError(child(ptr, "dimension"), "missing dimension");
  c.dim = get_count(j.at("dimension"), child(ptr, "dimension"));
  if (c.dim > 64) throw ConfigError(child(ptr, "dimension"), "dimension above 64 is not supported");
  if (j.contains("params")) c.params = parse_params(j.at("params"), child(ptr, "params"));
  std::vector<std::string> pnames = names_of(c.params);

  bool has_field = j.contains("field"), has_potential = j.contains("potential");
  if (has_field == has_potential) throw ConfigError(ptr, "exactly one of field and potential is required");
  if (has_field) c.field = vector_expr(j.at("field"), child(ptr, "field"), c.dim, pnames);
  if (has_potential) c.potential = scalar_expr(j.at("potential"), child(ptr, "potential"), c.dim, pnames);
  if (j.contains("lyapunov")) c.lyapunov = scalar_expr(j.at("lyapunov"), child(ptr, "lyapunov"), c.dim, pnames);
  if (j.contains("equilibrium_guess"))
    c.equilibrium_guess = get_vector(j.at("equilibrium_guess"), child(ptr, "equilibrium_guess"), c.dim);
  if (j.contains("integrator")) c.integrator = parse_integrator(j.at("integrator"), child(ptr, "integrator"));
  if (j.contains("sample_box")) {
    std::string bp = child(ptr, "sample_box");
    const json& b = j.at("sample_box");
    require_object(b, bp);
    reject_unknown(b, bp, {"lo", "hi"});
    if (!b.contains("lo") || !b.contains("hi")) throw ConfigError(bp, "sample_box needs lo and hi");
    c.box_lo = get_vector(b.at("lo"), child(bp, "lo"), c.dim);
    c.box_hi = get_vector(b.at("hi"), child(bp, "hi"), c.dim);
    for (std::size_t i = 0; i < c.dim; ++i)
      if (!((*c.box_lo)[i] < (*c.box_hi)[i])) throw ConfigError(child(child(bp, "hi"), i), "must exceed lo");
  }
  return c;
}

Field SystemConfig::flow_field() const {
  if (field) return make_field(*field, params);
  return gradient_field(potential_fn(), -1.0);
}

Potential SystemConfig::potential_fn() const {
  if (!potential) throw Error(ErrorCode::Precondition, "this command needs a potential system");
  return make_potential(*potential, params);
}

std::optional<Potential> SystemConfig::lyapunov_fn() const {
  if (!lyapunov) return std::nullopt;
  return make_potential(*lyapunov, params);
}

Vec SystemConfig::equilibrium() const {
  Vec guess = equilibrium_guess.value_or(Vec(dim, 0.0));
  if (potential) return find_minimum(potential_fn(), guess);
  return find_equilibrium(flow_field(), guess);
}

FamilyConfig parse_family(const json& j, const std::string& ptr) {
  require_object(j, ptr);
  reject_unknown(j, ptr,
                 {"schema", "name", "dimension", "parameter", "family", "params", "probe", "equilibria",
                  "parameter_range", "integrator"});
  check_schema(j, ptr);
  FamilyConfig c;
  c.raw = j;
  if (j.contains("name")) c.name = get_string(j.at("name"), child(ptr, "name"));
  if (!j.contains("dimension")) throw ConfigError(child(ptr, "dimension"), "missing dimension");
  c.dim = get_count(j.at("dimension"), child(ptr, "dimension"));
  if (c.dim > 62) throw ConfigError(child(ptr, "dimension"), "dimension above 62 is not supported");
  if (j.contains("parameter")) c.parameter = identifier(j.at("parameter"), child(ptr, "parameter"));
  if (j.contains("params")) c.params = parse_params(j.at("params"), child(ptr, "params"));
  if (c.params.count(c.parameter))
    throw ConfigError(child(child(ptr, "params"), c.parameter), "collides with the family parameter");
  std::vector<std::string> pnames = names_of(c.params, c.parameter);
  if (!j.contains("family")) throw ConfigError(child(ptr, "family"), "missing family");
  c.family = vector_expr(j.at("family"), child(ptr, "family"), c.dim, pnames);
  if (j.contains("probe")) c.probe = vector_expr(j.at("probe"), child(ptr, "probe"), c.dim, pnames);
  if (j.contains("equilibria"))
    c.equilibria = vector_expr(j.at("equilibria"), child(ptr, "equilibria"), c.dim, pnames);
  if (j.contains("parameter_range")) {
    Vec r = get_vector(j.at("parameter_range"), child(ptr, "parameter_range"), 2);
    if (!(r[0] <= r[1])) throw ConfigError(child(ptr, "parameter_range"), "expected [lo, hi] with lo <= hi");
    c.t_lo = r[0];
    c.t_hi = r[1];
  }
  if (j.contains("integrator")) c.integrator = parse_integrator(j.at("integrator"), child(ptr, "integrator"));
  return c;
}

Field FamilyConfig::member(double t) const {
  ParamMap p = params;
  p[parameter] = t;
  return make_field(family, p);
}

FieldFamily FamilyConfig::field_family() const {
  return [self = *this](double t) { return self.member(t); };
}

CircleFamily FamilyConfig::circle_family() const {
  return [self = *this](double theta, std::span<const double> z) { return self.member(theta)(z); };
}

CircleProbe FamilyConfig::probe_fn() const {
  if (!probe) throw ConfigError("/probe", "this command needs a probe curve");
  return [expr = *probe, self = *this](double theta) {
    ParamMap p = self.params;
    p[self.parameter] = theta;
    return expr.eval(Vec(self.dim, 0.0), expr.bind(p));
  };
}

EquilibriumCurve FamilyConfig::equilibrium_curve() const {
  if (!equilibria) throw ConfigError("/equilibria", "this command needs the curve of equilibria");
  return [expr = *equilibria, self = *this](double t) {
    ParamMap p = self.params;
    p[self.parameter] = t;
    return expr.eval(Vec(self.dim, 0.0), expr.bind(p));
  };
}

}  // namespace stabkit::app
