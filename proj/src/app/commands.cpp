#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "config.hpp"
#include "conjugacy.hpp"
#include "degree.hpp"
#include "error.hpp"
#include "homotopy.hpp"
#include "lyapunov.hpp"
#include "parallel.hpp"
#include "sampling.hpp"
#include "stability.hpp"

#ifndef STABKIT_VERSION
#define STABKIT_VERSION "0.0.0"
#endif

namespace stabkit::app {

const char* tool_version() { return STABKIT_VERSION; }

namespace {

// Reads "options" members, recording every resolved value (defaults
// included) so the report can echo exactly what ran.
class Options {
 public:
  Options(const json& request, std::string ptr) : ptr_(std::move(ptr)) {
    if (request.contains("options")) {
      src_ = request.at("options");
      if (!src_.is_object()) throw ConfigError(ptr_, "expected an object");
    } else {
      src_ = json::object();
    }
  }

  double num(const std::string& key, double def) {
    double v = has(key) ? get_number(src_.at(key), at(key)) : def;
    resolved_[key] = v;
    return v;
  }
  double positive(const std::string& key, double def) {
    double v = num(key, def);
    if (!(v > 0.0)) throw ConfigError(at(key), "must be positive");
    return v;
  }
  std::size_t count(const std::string& key, std::size_t def, bool allow_zero = false) {
    std::size_t v = has(key) ? get_count(src_.at(key), at(key), allow_zero) : def;
    resolved_[key] = v;
    return v;
  }
  bool flag(const std::string& key, bool def) {
    bool v = def;
    if (has(key)) {
      if (!src_.at(key).is_boolean()) throw ConfigError(at(key), "expected true or false");
      v = src_.at(key).get<bool>();
    }
    resolved_[key] = v;
    return v;
  }
  std::string str(const std::string& key, const std::string& def, const std::set<std::string>& allowed) {
    std::string v = def;
    if (has(key)) {
      if (!src_.at(key).is_string()) throw ConfigError(at(key), "expected a string");
      v = src_.at(key).get<std::string>();
    }
    if (!allowed.count(v)) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      throw ConfigError(at(key), "expected one of " + list);
    }
    resolved_[key] = v;
    return v;
  }
  Vec vec(const std::string& key, const Vec& def, std::size_t n = 0) {
    Vec v = has(key) ? get_vector(src_.at(key), at(key), n) : def;
    resolved_[key] = v;
    return v;
  }
  bool has(const std::string& key) {
    seen_.insert(key);
    return src_.contains(key);
  }
  std::string at(const std::string& key) const { return ptr_ + "/" + key; }

  // Rejects members no command step asked for.
  void finish() const {
    for (const auto& [key, _] : src_.items())
      if (!seen_.count(key)) throw ConfigError(at(key), "unknown option for this command");
  }
  const json& resolved() const { return resolved_; }

 private:
  std::string ptr_;
  json src_;
  json resolved_ = json::object();
  std::set<std::string> seen_;
};

struct Context {
  const json& request;
  std::string command;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  Options opts;
  json inputs = json::object();
  json results = json::object();
  std::string csv;
};


const json& member(const json& request, const std::string& key) {
  if (!request.contains(key)) throw ConfigError("/" + key, "this command needs a " + key + " config");
  return request.at(key);
}

SystemConfig system_of(Context& c, const std::string& key = "system") {
  SystemConfig s = parse_system(member(c.request, key), "/" + key);
  c.inputs[key] = s.raw;
  return s;
}

FamilyConfig family_of(Context& c) {
  FamilyConfig f = parse_family(member(c.request, "family"), "/family");
  c.inputs["family"] = f.raw;
  return f;
}

std::string fmt(double v) {
  if (!std::isfinite(v)) return "nan";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string csv_header(std::size_t n, const std::string& prefix) {
  std::string h;
  for (std::size_t i = 1; i <= n; ++i) h += "," + prefix + std::to_string(i);
  return h;
}

std::vector<Vec> points_of(Context& c, std::size_t dim) {
  std::vector<Vec> pts;
  if (!c.request.contains("points")) return pts;
  const json& p = c.request.at("points");
  if (!p.is_array()) throw ConfigError("/points", "expected an array of points");
  for (std::size_t i = 0; i < p.size(); ++i) pts.push_back(get_vector(p[i], "/points/" + std::to_string(i), dim));
  c.inputs["points"] = p;
  return pts;
}

LyapunovFn lyapunov_of(const SystemConfig& s, const Field& f, const Vec& x_eq, double horizon) {
  if (s.is_potential()) return LyapunovFn::from_potential(s.potential_fn(), x_eq);
  if (auto l = s.lyapunov_fn()) return LyapunovFn::from_potential(*l, x_eq);
  return LyapunovFn::massera(f, x_eq, horizon, s.integrator);
}

json certificate_json(const Certificate& c, std::size_t max_failures) {
  json fails = json::array();
  for (std::size_t i = 0; i < std::min(max_failures, c.failures.size()); ++i)
    fails.push_back({{"point", c.failures[i].point}, {"reason", c.failures[i].reason}});
  return {{"decrease_margin", c.decrease_margin},
          {"properness_proxy", c.properness_proxy},
          {"worst_point", c.worst_point},
          {"samples", c.samples},
          {"r_in", c.r_in},
          {"r_out", c.r_out},
          {"margin_floor", c.margin_floor},
          {"pass", c.pass},
          {"failures_total", c.failures.size()},
          {"failures", fails}};
}

json star_json(const StarCheck& s) {
  return {{"pass", s.pass},
          {"rays", s.rays},
          {"failed_rays", s.failed_rays},
          {"witness", s.witness},
          {"detail", s.detail}};
}

json residual_json(const ResidualStats& r, std::size_t max_errors) {
  json errs = json::array();
  for (std::size_t i = 0; i < std::min(max_errors, r.errors.size()); ++i) errs.push_back(r.errors[i]);
  return {{"max", r.max},       {"mean", r.mean},       {"count", r.count},
          {"worst_x", r.worst_x}, {"worst_t", r.worst_t}, {"errors_total", r.errors.size()},
          {"errors", errs}};
}

json degree_json(const DegreeResult& d) {
  return {{"value", d.value},
          {"raw", d.raw},
          {"residual", d.residual},
          {"method", degree_method_name(d.method)},
          {"mesh", d.mesh}};
}

// ---------------------------------------------------------------- commands

Verdict cmd_check_gas(Context& c) {
  SystemConfig s = system_of(c);
  Field f = s.flow_field();
  Vec x_eq = s.equilibrium();
  GasOptions g;
  g.samples = c.opts.count("samples", 200);
  g.horizon = c.opts.positive("horizon", 30.0);
  g.tol = c.opts.positive("tol", 1e-6);
  g.with_certificate = c.opts.flag("certificate", false);
  g.massera_horizon = c.opts.positive("massera_horizon", 10.0);
  g.certificate.samples = c.opts.count("certificate_samples", 2000);
  g.certificate.r_in = c.opts.positive("r_in", 0.1);
  g.certificate.r_out = c.opts.positive("r_out", 5.0);
  double half = c.opts.positive("box", 5.0);
  std::size_t max_w = c.opts.count("max_witnesses", 50, true);
  c.opts.finish();
  if (s.box_lo) {
    g.box_lo = *s.box_lo;
    g.box_hi = *s.box_hi;
  } else {
    for (double v : x_eq) {
      g.box_lo.push_back(v - half);
      g.box_hi.push_back(v + half);
    }
  }
  g.seed = c.seed;
  g.threads = c.threads;
  g.spec = s.integrator;

  GasEvidence ev = check_gas(f, x_eq, g);
  json ws = json::array();
  for (std::size_t i = 0; i < std::min(max_w, ev.witnesses.size()); ++i) {
    const GasWitness& w = ev.witnesses[i];
    ws.push_back({{"index", w.index},
                  {"kind", witness_kind_name(w.kind)},
                  {"falsifying", witness_falsifies(w.kind)},
                  {"start", w.start},
                  {"final_state", w.final_state},
                  {"initial_dist", w.initial_dist},
                  {"final_dist", w.final_dist},
                  {"detail", w.detail}});
  }
  c.results = {{"equilibrium", x_eq},
               {"box_lo", g.box_lo},
               {"box_hi", g.box_hi},
               {"n_trajectories", ev.n_trajectories},
               {"converged", ev.converged},
               {"max_final_dist", ev.max_final_dist},
               {"witnesses_total", ev.witnesses.size()},
               {"witnesses", ws},
               {"certificate", ev.certificate ? certificate_json(*ev.certificate, 20) : json(nullptr)},
               {"certificate_error", ev.certificate_error},
               {"reason", ev.reason},
               {"verdict", gas_verdict_name(ev.verdict)}};
  switch (ev.verdict) {
    case GasVerdict::Supported: return Verdict::Pass;
    case GasVerdict::Falsified: return Verdict::Fail;
    case GasVerdict::Inconclusive: return Verdict::Inconclusive;
  }
  return Verdict::Inconclusive;
}

Verdict cmd_lyapunov(Context& c) {
  SystemConfig s = system_of(c);
  Field f = s.flow_field();
  Vec x_eq = s.equilibrium();
  double horizon = c.opts.positive("horizon", 10.0);
  CertificateOptions co;
  co.samples = c.opts.count("samples", 2000);
  co.r_in = c.opts.positive("r_in", 0.1);
  co.r_out = c.opts.positive("r_out", 5.0);
  co.seed = c.seed;
  co.threads = c.threads;
  std::size_t identity_samples = c.opts.count("identity_samples", 100, true);
  bool grid = c.opts.has("grid_n");
  std::size_t grid_n = 0;
  Vec lo, hi;
  if (grid) {
    grid_n = c.opts.count("grid_n", 21);
    if (grid_n < 2) throw ConfigError(c.opts.at("grid_n"), "needs at least 2 points per axis");
    Vec dlo(x_eq), dhi(x_eq);
    for (double& v : dlo) v -= 2.0;
    for (double& v : dhi) v += 2.0;
    lo = c.opts.vec("grid_lo", dlo, s.dim);
    hi = c.opts.vec("grid_hi", dhi, s.dim);
    double total = std::pow(static_cast<double>(grid_n), static_cast<double>(s.dim));
    if (total > 1e6) throw ConfigError(c.opts.at("grid_n"), "grid would exceed 1e6 points");
  }
  std::size_t max_f = c.opts.count("max_failures", 20, true);
  c.opts.finish();

  LyapunovFn v = s.is_potential() ? LyapunovFn::from_potential(s.potential_fn(), x_eq)
                                  : LyapunovFn::massera(f, x_eq, horizon, s.integrator);
  Certificate cert = verify_certificate(v, f, co);
  c.results = {{"construction", s.is_potential() ? "potential" : "massera"},
               {"equilibrium", x_eq},
               {"certificate", certificate_json(cert, max_f)}};
  if (!s.is_potential()) {
    // <grad V, F>(x) = |phi_T(x) - x_eq|^2 - |x - x_eq|^2 for the Massera integral
    std::vector<double> res(identity_samples, 0.0);
    std::vector<std::string> errs(identity_samples);
    parallel_for(identity_samples, c.threads, [&](std::size_t i) {
      auto rng = sample_rng(c.seed, kStreamProperty, i);
      Vec x = sample_annulus(rng, x_eq, co.r_in, co.r_out);
      try {
        auto [val, grad] = v.eval(x);
        double lhs = dot(grad, f(x));
        Vec y = flow(f, x, horizon, s.integrator);
        double rhs = dist(y, x_eq) * dist(y, x_eq) - dist(x, x_eq) * dist(x, x_eq);
        res[i] = std::abs(lhs - rhs) / (1.0 + std::abs(rhs));
      } catch (const Error& e) {
        errs[i] = e.what();
      }
    });
    double worst = 0.0;
    std::size_t n_err = 0;
    for (std::size_t i = 0; i < identity_samples; ++i) {
      if (!errs[i].empty())
        ++n_err;
      else
        worst = std::max(worst, res[i]);
    }
    c.results["identity_residual"] = {{"samples", identity_samples}, {"max", worst}, {"errors", n_err}};
  }
  if (grid) {
    std::ostringstream os;
    os << csv_header(s.dim, "x").substr(1) << ",V,dV\n";
    std::size_t total = 1;
    for (std::size_t i = 0; i < s.dim; ++i) total *= grid_n;
    std::vector<std::string> rows(total);
    parallel_for(total, c.threads, [&](std::size_t k) {
      Vec x(s.dim);
      std::size_t idx = k;
      for (std::size_t i = 0; i < s.dim; ++i) {
        x[i] = lo[i] + (hi[i] - lo[i]) * static_cast<double>(idx % grid_n) / static_cast<double>(grid_n - 1);
        idx /= grid_n;
      }
      std::string row;
      for (double xi : x) row += fmt(xi) + ",";
      try {
        auto [val, grad] = v.eval(x);
        row += fmt(val) + "," + fmt(dot(grad, f(x)));
      } catch (const Error&) {
        row += "nan,nan";
      }
      rows[k] = row + "\n";
    });
    for (const auto& r : rows) os << r;
    c.csv = os.str();
  }
  return cert.pass ? Verdict::Pass : Verdict::Fail;
}

Verdict cmd_homotopy(Context& c) {
  std::string kind = c.opts.str("kind", "sontag",
                                {"sontag", "complete", "to-gradient", "alexander", "continuation", "translate",
                                 "appendix-morse", "appendix-hyp", "straight-line"});
  SystemConfig s = system_of(c);
  bool verify = c.opts.flag("verify", false);
  AdmissibilityOptions ao;
  ao.r_in = c.opts.positive("r_in", 0.1);
  ao.r_out = c.opts.positive("r_out", 5.0);
  ao.t_points = c.opts.count("t_points", 21);
  ao.samples = c.opts.count("samples", 1000);
  ao.seed = c.seed;
  ao.threads = c.threads;
  double tol = c.opts.positive("tol", 1e-6);
  std::size_t endpoint_samples = c.opts.count("endpoint_samples", 200);
  std::size_t trace_points = c.opts.count("trace_points", 0, true);
  std::size_t max_f = c.opts.count("max_failures", 50, true);
  if (ao.t_points < 2) throw ConfigError(c.opts.at("t_points"), "needs at least 2 time points");

  const IntegratorSpec& spec = s.integrator;
  Vec zero(s.dim, 0.0);
  HomotopyFamily h;
  std::optional<ContinuationResult> cont;
  if (kind == "sontag") {
    h = sontag_family(s.flow_field(), spec);
  } else if (kind == "complete") {
    double phi = c.opts.num("phi", 1.0);
    h = complete_rescale_family(s.flow_field(), phi);
  } else if (kind == "to-gradient") {
    double horizon = c.opts.positive("horizon", 10.0);
    Field f = s.flow_field();
    h = to_gradient_family(f, lyapunov_of(s, f, s.equilibrium(), horizon));
  } else if (kind == "alexander") {
    SystemConfig t = system_of(c, "target");
    h = alexander_family(s.potential_fn(), t.potential_fn(), spec);
  } else if (kind == "continuation") {
    double horizon = c.opts.positive("horizon", 10.0);
    SystemConfig t = system_of(c, "target");
    Field f = s.flow_field(), g = t.flow_field();
    cont = continuation_homotopy(f, g, lyapunov_of(s, f, s.equilibrium(), horizon),
                                 lyapunov_of(t, g, t.equilibrium(), horizon), ao);
    h = cont->family;
  } else if (kind == "translate") {
    Vec y = c.opts.vec("translate_to", zero, s.dim);
    Vec guess = s.equilibrium_guess.value_or(zero);
    h = s.is_potential() ? translate_family(s.potential_fn(), y, guess) : translate_family(s.flow_field(), y, guess);
  } else if (kind == "appendix-morse") {
    h = appendix_morse_family(s.potential_fn());
  } else if (kind == "appendix-hyp") {
    h = appendix_hyp_family(s.flow_field());
  } else {
    SystemConfig t = system_of(c, "target");
    h = straight_line(s.flow_field(), t.flow_field());
  }
  c.opts.finish();

  c.results = {{"kind", kind},
               {"family", homotopy_kind_name(h.kind)},
               {"description", h.description},
               {"dimension", h.dim},
               {"scalar", h.is_scalar()}};
  auto adm_json = [&](const AdmissibilityReport& r) {
    json fails = json::array();
    for (std::size_t i = 0; i < std::min(max_f, r.failures.size()); ++i)
      fails.push_back({{"t", r.failures[i].t}, {"x", r.failures[i].x}, {"reason", r.failures[i].reason}});
    return json{{"t_grid", r.t_grid},
                {"zero_gap", r.zero_gap},
                {"decrease_margin", r.decrease_margin},
                {"checked_decrease", r.checked_decrease},
                {"pass", r.pass},
                {"failures_total", r.failures.size()},
                {"failures", fails}};
  };
  Verdict verdict = Verdict::Pass;
  if (cont) {
    json stages = json::array();
    for (const auto& st : cont->stage) stages.push_back(adm_json(st));
    c.results["stages"] = stages;
    c.results["continuation_pass"] = cont->pass;
    if (!cont->pass) verdict = Verdict::Fail;
  }
  if (verify) {
    AdmissibilityReport r = check_admissibility(h, ao);
    EndpointCheck e = verify_endpoints(h, endpoint_samples, c.seed, ao.r_in, std::min(ao.r_out, 3.0));
    c.results["admissibility"] = adm_json(r);
    c.results["endpoints"] = {{"start_error", e.start_error}, {"end_error", e.end_error}, {"tol", tol}};
    if (!(r.pass && e.start_error <= tol && e.end_error <= tol)) verdict = Verdict::Fail;
  }
  if (trace_points > 0) {
    std::ostringstream os;
    os << "t" << csv_header(h.dim, "x") << (h.is_scalar() ? ",H" : csv_header(h.dim, "H")) << "\n";
    std::vector<Vec> xs(trace_points);
    for (std::size_t i = 0; i < trace_points; ++i) {
      auto rng = sample_rng(c.seed, kStreamProperty, i);
      xs[i] = sample_annulus(rng, zero, ao.r_in, ao.r_out);
    }
    std::vector<std::string> rows(ao.t_points * trace_points);
    parallel_for(rows.size(), c.threads, [&](std::size_t k) {
      std::size_t ti = k / trace_points, xi = k % trace_points;
      double t = static_cast<double>(ti) / static_cast<double>(ao.t_points - 1);
      std::string row = fmt(t);
      for (double v : xs[xi]) row += "," + fmt(v);
      try {
        if (h.is_scalar()) {
          row += "," + fmt(h.value(t, xs[xi]));
        } else {
          for (double v : h(t, xs[xi])) row += "," + fmt(v);
        }
      } catch (const Error&) {
        for (std::size_t j = 0; j < (h.is_scalar() ? 1 : h.dim); ++j) row += ",nan";
      }
      rows[k] = row + "\n";
    });
    for (const auto& r : rows) os << r;
    c.csv = os.str();
  }
  return verdict;
}

json map_points(Context& c, const ConjugacyMap& h, const std::vector<Vec>& pts) {
  json out = json::array();
  std::ostringstream os;
  os << csv_header(h.dim, "x").substr(1) << csv_header(h.dim, "h") << "\n";
  for (const Vec& x : pts) {
    try {
      Vec y = h(x);
      out.push_back({{"x", x}, {"h", y}});
      std::string row;
      for (double v : x) row += fmt(v) + ",";
      for (double v : y) row += fmt(v) + ",";
      row.pop_back();
      os << row << "\n";
    } catch (const Error& e) {
      out.push_back({{"x", x}, {"error", std::string(error_code_name(e.code())) + ": " + e.what()}});
    }
  }
  if (!pts.empty()) c.csv = os.str();
  return out;
}

Verdict cmd_linearize(Context& c, bool morse) {
  SystemConfig s = system_of(c);
  if (morse && !s.is_potential()) throw ConfigError("/system/potential", "morse needs a potential system");
  Field f = s.flow_field();
  Vec x_eq = s.equilibrium();
  double horizon = morse ? 0.0 : c.opts.positive("horizon", 10.0);
  double level = c.opts.positive("level", 1.0);
  StarCheckOptions so;
  so.rays = c.opts.count("rays", 500);
  so.seed = c.seed;
  so.threads = c.threads;
  bool check = c.opts.flag("check", false);
  ResidualOptions ro;
  ro.samples = c.opts.count("samples", 500);
  if (!morse) ro.t_set = c.opts.vec("t_set", {0.5, 1.0, 2.0});
  ro.r_in = c.opts.positive("r_in", 0.1);
  ro.r_out = c.opts.positive("r_out", morse ? 3.0 : 5.0);
  ro.seed = c.seed;
  ro.threads = c.threads;
  ro.spec = s.integrator;
  double tol = c.opts.positive("tol", morse ? 1e-6 : 1e-4);
  std::size_t max_e = c.opts.count("max_errors", 20, true);
  std::vector<Vec> pts = points_of(c, s.dim);
  c.opts.finish();

  LyapunovFn v = morse ? LyapunovFn::from_potential(s.potential_fn(), x_eq) : lyapunov_of(s, f, x_eq, horizon);
  LevelSetChart chart = LevelSetChart::build(v, level, so);
  c.results = {{"equilibrium", x_eq},
               {"chart", morse || s.is_potential() ? "potential" : (s.lyapunov ? "lyapunov" : "massera")},
               {"level", level},
               {"star", star_json(chart.star())}};
  if (!chart.star().pass) return Verdict::Fail;
  ConjugacyMap h = morse ? make_morse(s.potential_fn(), chart, s.integrator)
                         : make_hartman_grobman(f, chart, s.integrator);
  if (!pts.empty()) c.results["mapped"] = map_points(c, h, pts);
  if (!check) return Verdict::Pass;
  ResidualStats r = morse ? verify_squared_norm(s.potential_fn(), h, ro) : verify_conjugacy(f, h, ro);
  json rj = residual_json(r, max_e);
  rj["tol"] = tol;
  c.results["residual"] = rj;
  return r.errors.empty() && r.max <= tol ? Verdict::Pass : Verdict::Fail;
}

Verdict cmd_degree(Context& c) {
  SystemConfig s = system_of(c);
  Vec center = c.opts.vec("center", s.equilibrium_guess.value_or(Vec(s.dim, 0.0)), s.dim);
  double radius = c.opts.positive("radius", 1.0);
  std::size_t resolution = c.opts.count("resolution", 3, true);
  if (resolution > 8) throw ConfigError(c.opts.at("resolution"), "resolution above 8 is not supported");
  c.opts.finish();
  DegreeResult d = brouwer_degree(s.flow_field(), center, radius, static_cast<unsigned>(resolution), c.threads);
  c.results = degree_json(d);
  c.results["center"] = center;
  c.results["radius"] = radius;
  return Verdict::Pass;
}

Verdict cmd_obstruct(Context& c) {
  FamilyConfig fam = family_of(c);
  std::size_t resolution = c.opts.count("resolution", 3, true);
  if (resolution > 12) throw ConfigError(c.opts.at("resolution"), "resolution above 12 is not supported");
  c.opts.finish();
  ObstructionResult r = family_obstruction_s1(fam.circle_family(), fam.probe_fn(), static_cast<unsigned>(resolution));
  c.results = degree_json(r.winding);
  c.results["reference"] = r.reference;
  c.results["verdict"] = r.obstructed ? "OBSTRUCTED" : "NOT-OBSTRUCTED";
  c.results["note"] = r.note;
  return r.obstructed ? Verdict::Fail : Verdict::Pass;
}

Verdict cmd_family_check(Context& c) {
  FamilyConfig fam = family_of(c);
  FamilyAttractionOptions fo;
  fo.t_lo = fam.t_lo;
  fo.t_hi = fam.t_hi;
  fo.samples = c.opts.count("samples", 200);
  fo.box = c.opts.positive("box", 0.3);
  fo.min_offset = c.opts.positive("min_offset", 1e-5);
  fo.horizon = c.opts.positive("horizon", 200.0);
  fo.rate_factor = c.opts.positive("rate_factor", 25.0);
  fo.tol = c.opts.positive("tol", 1e-3);
  fo.curve_points = c.opts.count("curve_points", 2048);
  fo.seed = c.seed;
  fo.threads = c.threads;
  fo.spec = fam.integrator;
  Vec local_t = c.opts.vec("local_t", {0.25, 0.5, 1.0});
  std::size_t local_samples = c.opts.count("local_samples", 50);
  std::size_t max_w = c.opts.count("max_witnesses", 50, true);
  c.opts.finish();

  FieldFamily h = fam.field_family();
  EquilibriumCurve z = fam.equilibrium_curve();
  FamilyAttractionReport r = check_family_attraction(h, z, fo);
  json ws = json::array();
  for (std::size_t i = 0; i < std::min(max_w, r.witnesses.size()); ++i) {
    const FamilyWitness& w = r.witnesses[i];
    ws.push_back({{"index", w.index},
                  {"t", w.t},
                  {"start", w.start},
                  {"horizon", w.horizon},
                  {"limit", w.limit},
                  {"rest", w.rest},
                  {"initial_dist", w.initial_dist},
                  {"final_dist", w.final_dist},
                  {"escaped", w.escaped},
                  {"detail", w.detail}});
  }
  json locals = json::array();
  bool pointwise = true;
  for (double t : local_t) {
    if (t < fam.t_lo || t > fam.t_hi) throw ConfigError(c.opts.at("local_t"), "local check time outside parameter_range");
    FrozenLocalCheck lc = frozen_local_check(h, t, z(t), local_samples, c.seed, c.threads);
    pointwise = pointwise && lc.pass;
    locals.push_back({{"t", t},
                      {"x_t", lc.x_t},
                      {"max_real_eigenvalue", lc.max_real_eigenvalue},
                      {"hurwitz", lc.hurwitz},
                      {"gas_verdict", lc.hurwitz ? gas_verdict_name(lc.gas.verdict) : "skipped"},
                      {"converged", lc.gas.converged},
                      {"pass", lc.pass}});
  }
  c.results = {{"parameter_range", {fam.t_lo, fam.t_hi}},
               {"samples", r.samples},
               {"attracted", r.attracted},
               {"unresolved", r.unresolved},
               {"witnesses_total", r.witnesses.size()},
               {"witnesses", ws},
               {"local_checks", locals},
               {"pointwise_stable", pointwise},
               {"verdict", attraction_verdict_name(r.verdict)}};
  return r.verdict == AttractionVerdict::NotAttracting ? Verdict::Fail : Verdict::Pass;
}

using Handler = std::function<Verdict(Context&)>;

const std::map<std::string, Handler>& handlers() {
  static const std::map<std::string, Handler> table{
      {"check-gas", cmd_check_gas},
      {"lyapunov", cmd_lyapunov},
      {"homotopy", cmd_homotopy},
      {"linearize", [](Context& c) { return cmd_linearize(c, false); }},
      {"morse", [](Context& c) { return cmd_linearize(c, true); }},
      {"degree", cmd_degree},
      {"obstruct", cmd_obstruct},
      {"family-check", cmd_family_check},
  };
  return table;
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "unknown";
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"check-gas", "lyapunov", "homotopy",  "linearize",
                                              "morse",     "degree",   "obstruct", "family-check"};
  return names;
}

CommandOutput run_command(const json& request) {
  if (!request.is_object()) throw ConfigError("", "request must be an object");
  for (const auto& [key, _] : request.items()) {
    static const std::set<std::string> allowed{"command", "seed", "threads", "system", "target",
                                               "family",  "options", "points"};
    if (!allowed.count(key)) throw ConfigError("/" + key, "unknown request member");
  }
  if (!request.contains("command") || !request.at("command").is_string())
    throw ConfigError("/command", "expected the command name");
  std::string name = request.at("command").get<std::string>();
  auto it = handlers().find(name);
  if (it == handlers().end()) throw ConfigError("/command", "unknown command '" + name + "'");

  std::uint64_t seed = 0;
  if (request.contains("seed")) {
    const json& s = request.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
      throw ConfigError("/seed", "expected a nonnegative integer");
    seed = s.get<std::uint64_t>();
  }
  unsigned threads = 1;
  if (request.contains("threads")) threads = static_cast<unsigned>(get_count(request.at("threads"), "/threads"));

  Context c{request, name, seed, threads, Options(request, "/options"), json::object(), json::object(), {}};
  Verdict v = it->second(c);
  c.inputs["options"] = c.opts.resolved();

  CommandOutput out;
  out.verdict = v;
  out.csv = std::move(c.csv);
  out.report = {{"schema", kSchemaVersion}, {"command", name},     {"tool_version", tool_version()},
                {"seed", seed},             {"inputs", c.inputs}, {"results", c.results},
                {"verdict", verdict_name(v)}};
  return out;
}

}  // namespace stabkit::app
