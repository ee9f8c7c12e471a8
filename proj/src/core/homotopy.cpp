#include "homotopy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

#include "error.hpp"
#include "parallel.hpp"
#include "sampling.hpp"

namespace stabkit {

namespace {

void require_unit_time(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw Error(ErrorCode::InvalidArgument, "homotopy time must lie in [0, 1]");
}

std::string point_str(std::span<const double> x) {
  std::ostringstream os;
  os.precision(17);
  os << "(";
  for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ")";
  return os.str();
}

double sigma(double u) { return u > 0.0 ? std::exp(-1.0 / u) : 0.0; }

Field neg_gradient(const LyapunovFn& v) {
  Field f;
  f.dim = v.dim();
  f.eval = [v](std::span<const double> x, std::span<double> out) {
    Vec g = v.eval(x).second;
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = -g[i];
  };
  return f;
}

// Probe points used to compare family endpoints.
std::vector<Vec> probe_points(std::size_t n, std::size_t count, std::uint64_t seed, double r_in, double r_out) {
  std::vector<Vec> pts(count);
  Vec origin(n, 0.0);
  for (std::size_t i = 0; i < count; ++i) {
    auto rng = sample_rng(seed, kStreamProperty, i);
    pts[i] = sample_annulus(rng, origin, r_in, r_out);
  }
  return pts;
}

// (phi_h(x) - x) / h, integrated directly as w' = F(x + h w) on u in [0, 1] so
// that the quotient keeps full relative accuracy for small h.
Vec difference_quotient(const Field& f, std::span<const double> x, double h, const IntegratorSpec& spec) {
  const std::size_t n = x.size();
  Vec base(x.begin(), x.end());
  OdeRhs rhs = [&, p = Vec(n)](double, std::span<const double> w, std::span<double> dw) mutable {
    for (std::size_t i = 0; i < n; ++i) p[i] = base[i] + h * w[i];
    f.eval(p, dw);
  };
  Vec w0(n, 0.0);
  return integrate_ode(rhs, w0, 1.0, spec, {}, false).final_state();
}

}  // namespace

const char* homotopy_kind_name(HomotopyKind k) {
  switch (k) {
    case HomotopyKind::StraightLine: return "straight_line";
    case HomotopyKind::ToGradient: return "to_gradient";
    case HomotopyKind::CompleteRescale: return "complete_rescale";
    case HomotopyKind::Sontag: return "sontag";
    case HomotopyKind::Alexander: return "alexander";
    case HomotopyKind::Continuation: return "continuation";
    case HomotopyKind::Translate: return "translate";
    case HomotopyKind::AppendixMorse: return "appendix_morse";
    case HomotopyKind::AppendixHyp: return "appendix_hyp";
    case HomotopyKind::HurwitzLine: return "hurwitz_line";
    case HomotopyKind::PdsLine: return "pds_line";
    case HomotopyKind::Concat: return "concat";
  }
  return "unknown";
}

Vec HomotopyFamily::operator()(double t, std::span<const double> x) const {
  if (!vec) throw Error(ErrorCode::InvalidArgument, "family of potentials has no vector value");
  require_unit_time(t);
  Vec out(dim);
  vec(t, x, out);
  return out;
}

double HomotopyFamily::value(double t, std::span<const double> x) const {
  if (!scalar) throw Error(ErrorCode::InvalidArgument, "family of fields has no scalar value");
  require_unit_time(t);
  return scalar(t, x);
}

Field HomotopyFamily::at(double t) const {
  if (!vec) throw Error(ErrorCode::InvalidArgument, "family of potentials has no frozen field");
  require_unit_time(t);
  Field f;
  f.dim = dim;
  f.eval = [fn = vec, t](std::span<const double> x, std::span<double> out) { fn(t, x, out); };
  return f;
}

double smooth_step(double t) {
  double a = sigma(3.0 * t - 1.0);
  double b = sigma(2.0 - 3.0 * t);
  if (a == 0.0) return 0.0;
  if (b == 0.0) return 1.0;
  return a / (a + b);
}

HomotopyFamily constant_family(const Field& f) {
  HomotopyFamily h;
  h.kind = HomotopyKind::StraightLine;
  h.dim = f.dim;
  h.vec = [e = f.eval](double, std::span<const double> x, std::span<double> out) { e(x, out); };
  h.start = h.end = f.eval;
  h.description = "constant";
  return h;
}

HomotopyFamily straight_line(const Field& from, const Field& to) {
  if (from.dim != to.dim) throw Error(ErrorCode::Dimension, "straight line between fields of different dimension");
  HomotopyFamily h;
  h.kind = HomotopyKind::StraightLine;
  h.dim = from.dim;
  const std::size_t n = from.dim;
  h.vec = [a = from.eval, b = to.eval, n](double t, std::span<const double> x, std::span<double> out) {
    Vec fb(n);
    a(x, out);
    b(x, fb);
    for (std::size_t i = 0; i < n; ++i) out[i] = (1.0 - t) * out[i] + t * fb[i];
  };
  h.start = from.eval;
  h.end = to.eval;
  h.description = "straight line";
  return h;
}

HomotopyFamily concat_smooth(const HomotopyFamily& a, const HomotopyFamily& b) {
  if (a.dim != b.dim) throw Error(ErrorCode::Dimension, "concatenated families differ in dimension");
  if (a.is_scalar() != b.is_scalar()) throw Error(ErrorCode::InvalidArgument, "cannot join a field family with a potential family");

  for (const Vec& x : probe_points(a.dim, 32, 0, 0.1, 3.0)) {
    double gap = 0.0, scale = 0.0;
    if (a.is_scalar()) {
      double u = a.scalar(1.0, x), w = b.scalar(0.0, x);
      gap = std::abs(u - w);
      scale = std::abs(u);
    } else {
      Vec u(a.dim), w(a.dim);
      a.vec(1.0, x, u);
      b.vec(0.0, x, w);
      gap = dist(u, w);
      scale = norm(u);
    }
    if (!(gap <= 1e-9 * (1.0 + scale)))
      throw Error(ErrorCode::EndpointMismatch,
                  "end of the first family differs from the start of the second at " + point_str(x));
  }

  HomotopyFamily h;
  h.kind = HomotopyKind::Concat;
  h.dim = a.dim;
  if (a.is_scalar()) {
    h.scalar = [fa = a.scalar, fb = b.scalar](double t, std::span<const double> x) {
      return t <= 0.5 ? fa(smooth_step(2.0 * t), x) : fb(smooth_step(2.0 * t - 1.0), x);
    };
    h.start_scalar = a.start_scalar;
    h.end_scalar = b.end_scalar;
  } else {
    h.vec = [fa = a.vec, fb = b.vec](double t, std::span<const double> x, std::span<double> out) {
      if (t <= 0.5)
        fa(smooth_step(2.0 * t), x, out);
      else
        fb(smooth_step(2.0 * t - 1.0), x, out);
    };
    h.start = a.start;
    h.end = b.end;
  }
  h.description = "concat(" + a.description + ", " + b.description + ")";
  return h;
}

Field complete_rescale(const Field& f, double t, double phi) {
  require_unit_time(t);
  if (!(phi >= 0.0)) throw Error(ErrorCode::InvalidArgument, "rescale weight phi must be nonnegative");
  Field r;
  r.dim = f.dim;
  r.eval = [e = f.eval, k = t * phi](std::span<const double> x, std::span<double> out) {
    e(x, out);
    double s = 1.0 / (1.0 + k * dot(out, out));
    for (double& c : out) c *= s;
  };
  return r;
}

HomotopyFamily complete_rescale_family(const Field& f, double phi) {
  if (!(phi >= 0.0)) throw Error(ErrorCode::InvalidArgument, "rescale weight phi must be nonnegative");
  HomotopyFamily h;
  h.kind = HomotopyKind::CompleteRescale;
  h.dim = f.dim;
  h.vec = [e = f.eval, phi](double t, std::span<const double> x, std::span<double> out) {
    e(x, out);
    double s = 1.0 / (1.0 + t * phi * dot(out, out));
    for (double& c : out) c *= s;
  };
  h.start = f.eval;
  h.end = complete_rescale(f, 1.0, phi).eval;
  h.description = "complete rescale";
  return h;
}

Field to_gradient(const Field& f, const LyapunovFn& y, double t) {
  require_unit_time(t);
  return to_gradient_family(f, y).at(t);
}

HomotopyFamily to_gradient_family(const Field& f, const LyapunovFn& y) {
  if (f.dim != y.dim()) throw Error(ErrorCode::Dimension, "field and Lyapunov function dimensions differ");
  HomotopyFamily h;
  h.kind = HomotopyKind::ToGradient;
  h.dim = f.dim;
  h.vec = [e = f.eval, y](double t, std::span<const double> x, std::span<double> out) {
    e(x, out);
    Vec g = y.eval(x).second;
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = -t * g[i] + (1.0 - t) * out[i];
  };
  h.start = f.eval;
  h.end = neg_gradient(y).eval;
  h.description = "to gradient";
  return h;
}

HalvingData sontag_halving(const Field& f, std::span<const double> x, const IntegratorSpec& spec) {
  double r2 = dot(x, x);
  if (r2 == 0.0) throw Error(ErrorCode::InvalidArgument, "the nullhomotopy is undefined at the equilibrium x = 0");
  ScalarFn g = [](std::span<const double> y) { return dot(y, y); };
  EventHit hit;
  try {
    hit = flow_to_event(f, x, g, r2 / 4.0, +1, spec);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoCrossing) throw;
    throw Error(ErrorCode::NoCrossing,
                "norm does not halve within max_time from " + point_str(x) + " (evidence against asymptotic stability)");
  }
  HalvingData d;
  d.tau = hit.time;
  d.endpoint = difference_quotient(f, x, d.tau, spec);
  return d;
}

Vec sontag_nullhomotopy(const Field& f, double t, std::span<const double> x, const IntegratorSpec& spec) {
  require_unit_time(t);
  if (dot(x, x) == 0.0) throw Error(ErrorCode::InvalidArgument, "the nullhomotopy is undefined at the equilibrium x = 0");
  const std::size_t n = x.size();
  if (t <= 0.5) {
    double s = smooth_step(2.0 * t);
    if (s < 1e-6) return f(x);
    HalvingData d = sontag_halving(f, x, spec);
    if (s == 1.0) return d.endpoint;
    return difference_quotient(f, x, s * d.tau, spec);
  }
  HalvingData d = sontag_halving(f, x, spec);
  double p = smooth_step(2.0 * t - 1.0);
  Vec out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = (1.0 - p) * d.endpoint[i] - p * x[i];
  return out;
}

HomotopyFamily sontag_family(const Field& f, const IntegratorSpec& spec) {
  HomotopyFamily h;
  h.kind = HomotopyKind::Sontag;
  h.dim = f.dim;
  h.vec = [f, spec](double t, std::span<const double> x, std::span<double> out) {
    Vec v = sontag_nullhomotopy(f, t, x, spec);
    std::copy(v.begin(), v.end(), out.begin());
  };
  h.start = f.eval;
  h.end = [](std::span<const double> x, std::span<double> out) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = -x[i];
  };
  h.description = "sontag nullhomotopy";
  return h;
}

double alexander_homotopy(const Potential& v, const Potential& j, double t, std::span<const double> x,
                          const IntegratorSpec& spec) {
  require_unit_time(t);
  double vx = v(x);
  if (t == 0.0) return vx;
  double s = (t - 1.0) * vx;
  if (s == 0.0) return j(x) / t;
  Vec y = transport(v, x, s, spec);
  return j(y) / t;
}

HomotopyFamily alexander_family(const Potential& v, const Potential& j, const IntegratorSpec& spec) {
  if (v.dim != j.dim) throw Error(ErrorCode::Dimension, "potentials differ in dimension");
  HomotopyFamily h;
  h.kind = HomotopyKind::Alexander;
  h.dim = v.dim;
  h.scalar = [v, j, spec](double t, std::span<const double> x) { return alexander_homotopy(v, j, t, x, spec); };
  h.start_scalar = v.value;
  h.end_scalar = j.value;
  h.description = "alexander";
  return h;
}

AdmissibilityReport check_admissibility(const HomotopyFamily& h, const AdmissibilityOptions& opts,
                                        const LyapunovFn* v_ref) {
  if (opts.t_points < 2) throw Error(ErrorCode::InvalidArgument, "admissibility needs at least two grid times");
  if (opts.samples == 0) throw Error(ErrorCode::InvalidArgument, "admissibility needs at least one sample");
  if (!(opts.r_in > 0.0) || !(opts.r_out > opts.r_in))
    throw Error(ErrorCode::InvalidArgument, "annulus must satisfy 0 < r_in < r_out");
  if (v_ref && h.is_scalar()) throw Error(ErrorCode::InvalidArgument, "decrease is only checked for field families");
  if (v_ref && v_ref->dim() != h.dim) throw Error(ErrorCode::Dimension, "reference function dimension differs");

  const std::size_t n = h.dim, m = opts.samples, nt = opts.t_points;
  Vec center = opts.center.empty() ? Vec(n, 0.0) : opts.center;
  if (center.size() != n) throw Error(ErrorCode::Dimension, "annulus center dimension differs");

  std::vector<Vec> xs(m);
  for (std::size_t i = 0; i < m; ++i) {
    auto rng = sample_rng(opts.seed, kStreamAdmissibility, i);
    xs[i] = sample_annulus(rng, center, opts.r_in, opts.r_out);
  }

  // Reference gradients do not depend on t.
  std::vector<Vec> grads;
  std::vector<std::string> grad_err;
  if (v_ref) {
    grads.resize(m);
    grad_err.resize(m);
    parallel_for(m, opts.threads, [&](std::size_t i) {
      try {
        grads[i] = v_ref->eval(xs[i]).second;
      } catch (const Error& e) {
        grad_err[i] = std::string(error_code_name(e.code())) + ": " + e.what();
      }
    });
  }

  struct Cell {
    double gap = std::numeric_limits<double>::infinity();
    double ratio = std::numeric_limits<double>::infinity();
    std::string error;
  };
  std::vector<double> ts(nt);
  for (std::size_t k = 0; k < nt; ++k) ts[k] = static_cast<double>(k) / static_cast<double>(nt - 1);
  std::vector<Cell> cells(nt * m);
  parallel_for(nt * m, opts.threads, [&](std::size_t idx) {
    std::size_t k = idx / m, i = idx % m;
    Cell& c = cells[idx];
    const Vec& x = xs[i];
    try {
      if (h.is_scalar()) {
        double hs = 1e-6 * (1.0 + norm(x));
        double acc = 0.0;
        Vec xp = x;
        for (std::size_t d = 0; d < n; ++d) {
          xp[d] = x[d] + hs;
          double up = h.scalar(ts[k], xp);
          xp[d] = x[d] - hs;
          double dn = h.scalar(ts[k], xp);
          xp[d] = x[d];
          double gd = (up - dn) / (2.0 * hs);
          acc += gd * gd;
        }
        c.gap = std::sqrt(acc);
      } else {
        Vec hx(n);
        h.vec(ts[k], x, hx);
        c.gap = norm(hx);
        if (v_ref) {
          if (!grad_err[i].empty())
            c.error = grad_err[i];
          else
            c.ratio = decrease_ratio(grads[i], hx, x);
        }
      }
    } catch (const Error& e) {
      c.error = std::string(error_code_name(e.code())) + ": " + e.what();
    }
  });

  AdmissibilityReport r;
  r.t_grid = ts;
  r.checked_decrease = v_ref != nullptr;
  r.zero_gap.assign(nt, std::numeric_limits<double>::infinity());
  if (v_ref) r.decrease_margin.assign(nt, std::numeric_limits<double>::infinity());
  r.pass = true;
  for (std::size_t k = 0; k < nt; ++k) {
    std::size_t witnesses = 0;
    auto witness = [&](const Vec& x, std::string reason) {
      r.pass = false;
      if (witnesses++ < opts.witnesses_per_t) r.failures.push_back({ts[k], x, std::move(reason)});
    };
    for (std::size_t i = 0; i < m; ++i) {
      const Cell& c = cells[k * m + i];
      if (!c.error.empty()) {
        r.zero_gap[k] = std::min(r.zero_gap[k], 0.0);
        witness(xs[i], c.error);
        continue;
      }
      r.zero_gap[k] = std::min(r.zero_gap[k], c.gap);
      if (!(c.gap > 0.0)) witness(xs[i], "H_t vanishes away from the equilibrium");
      if (v_ref) {
        r.decrease_margin[k] = std::min(r.decrease_margin[k], c.ratio);
        if (!(c.ratio > opts.margin_floor)) witness(xs[i], "reference function does not decrease");
      }
    }
  }
  return r;
}

EndpointCheck verify_endpoints(const HomotopyFamily& h, std::size_t samples, std::uint64_t seed, double r_in,
                               double r_out) {
  EndpointCheck out;
  for (const Vec& x : probe_points(h.dim, samples, seed, r_in, r_out)) {
    double scale = 1.0 + norm(x);
    if (h.is_scalar()) {
      if (h.start_scalar) out.start_error = std::max(out.start_error, std::abs(h.scalar(0.0, x) - h.start_scalar(x)) / scale);
      if (h.end_scalar) out.end_error = std::max(out.end_error, std::abs(h.scalar(1.0, x) - h.end_scalar(x)) / scale);
    } else {
      Vec a(h.dim), b(h.dim);
      if (h.start) {
        h.vec(0.0, x, a);
        h.start(x, b);
        out.start_error = std::max(out.start_error, dist(a, b) / scale);
      }
      if (h.end) {
        h.vec(1.0, x, a);
        h.end(x, b);
        out.end_error = std::max(out.end_error, dist(a, b) / scale);
      }
    }
  }
  return out;
}

ContinuationResult continuation_homotopy(const Field& f, const Field& g, const LyapunovFn& vf, const LyapunovFn& vg,
                                         const AdmissibilityOptions& opts) {
  if (f.dim != g.dim || vf.dim() != f.dim || vg.dim() != f.dim)
    throw Error(ErrorCode::Dimension, "continuation inputs differ in dimension");
  Field nf = neg_gradient(vf), ng = neg_gradient(vg);

  HomotopyFamily first = straight_line(f, nf);
  first.description = "F to -grad V_F";

  HomotopyFamily bridge;
  bridge.kind = HomotopyKind::StraightLine;
  bridge.dim = f.dim;
  bridge.vec = [vf, vg](double s, std::span<const double> x, std::span<double> out) {
    Vec a = vf.eval(x).second, b = vg.eval(x).second;
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = -((1.0 - s) * a[i] + s * b[i]);
  };
  bridge.start = nf.eval;
  bridge.end = ng.eval;
  bridge.description = "gradient bridge";

  HomotopyFamily last = straight_line(ng, g);
  last.description = "-grad V_G to G";

  ContinuationResult res;
  res.family = concat_smooth(concat_smooth(first, bridge), last);
  res.family.kind = HomotopyKind::Continuation;
  res.stage[0] = check_admissibility(first, opts, &vf);
  res.stage[1] = check_admissibility(bridge, opts, nullptr);
  res.stage[2] = check_admissibility(last, opts, &vg);
  res.pass = res.stage[0].pass && res.stage[1].pass && res.stage[2].pass;
  return res;
}

namespace {

Vec shift_of(std::span<const double> xstar, std::span<const double> y, double t) {
  Vec d(xstar.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = (xstar[i] - y[i]) * t;
  return d;
}

Field shifted(const Field& f, Vec d) {
  Field r;
  r.dim = f.dim;
  r.eval = [e = f.eval, d](std::span<const double> x, std::span<double> out) {
    Vec p(x.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = x[i] + d[i];
    e(p, out);
  };
  if (f.jacobian)
    r.jacobian = [j = f.jacobian, d](std::span<const double> x, std::span<double> out) {
      Vec p(x.size());
      for (std::size_t i = 0; i < p.size(); ++i) p[i] = x[i] + d[i];
      j(p, out);
    };
  return r;
}

Potential shifted(const Potential& v, Vec d) {
  auto at = [d](std::span<const double> x) {
    Vec p(x.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = x[i] + d[i];
    return p;
  };
  Potential r;
  r.dim = v.dim;
  r.value = [fn = v.value, at](std::span<const double> x) { return fn(at(x)); };
  r.gradient = [fn = v.gradient, at](std::span<const double> x, std::span<double> out) { fn(at(x), out); };
  if (v.hessian) r.hessian = [fn = v.hessian, at](std::span<const double> x, std::span<double> out) { fn(at(x), out); };
  return r;
}

void check_sizes(std::size_t n, std::span<const double> y, std::span<const double> guess) {
  if (y.size() != n || guess.size() != n) throw Error(ErrorCode::Dimension, "target or guess dimension differs");
}

}  // namespace

Field translate_retraction(const Field& f, std::span<const double> y, double t, std::span<const double> guess) {
  require_unit_time(t);
  check_sizes(f.dim, y, guess);
  return shifted(f, shift_of(find_equilibrium(f, guess), y, t));
}

Potential translate_retraction(const Potential& v, std::span<const double> y, double t,
                               std::span<const double> guess) {
  require_unit_time(t);
  check_sizes(v.dim, y, guess);
  return shifted(v, shift_of(find_minimum(v, guess), y, t));
}

HomotopyFamily translate_family(const Field& f, std::span<const double> y, std::span<const double> guess) {
  check_sizes(f.dim, y, guess);
  Vec d = shift_of(find_equilibrium(f, guess), y, 1.0);
  HomotopyFamily h;
  h.kind = HomotopyKind::Translate;
  h.dim = f.dim;
  h.vec = [e = f.eval, d](double t, std::span<const double> x, std::span<double> out) {
    Vec p(x.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = x[i] + d[i] * t;
    e(p, out);
  };
  h.start = f.eval;
  h.end = shifted(f, d).eval;
  h.description = "translate";
  return h;
}

HomotopyFamily translate_family(const Potential& v, std::span<const double> y, std::span<const double> guess) {
  check_sizes(v.dim, y, guess);
  Vec d = shift_of(find_minimum(v, guess), y, 1.0);
  HomotopyFamily h;
  h.kind = HomotopyKind::Translate;
  h.dim = v.dim;
  h.scalar = [fn = v.value, d](double t, std::span<const double> x) {
    Vec p(x.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = x[i] + d[i] * t;
    return fn(p);
  };
  h.start_scalar = v.value;
  h.end_scalar = shifted(v, d).value;
  h.description = "translate";
  return h;
}

namespace {

constexpr double kLimitSwitch = 1e-6;

}  // namespace

Potential appendix_morse(const Potential& v, double t) {
  require_unit_time(t);
  if (!v.hessian) throw Error(ErrorCode::Precondition, "the Morse retraction needs the Hessian");
  const std::size_t n = v.dim;
  Potential r;
  r.dim = n;
  if (t >= 1.0 - kLimitSwitch) {
    Vec origin(n, 0.0), h0(n * n);
    v.hessian(origin, h0);
    r.value = [h0, n](std::span<const double> x) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) acc += x[i] * h0[i * n + k] * x[k];
      return 0.5 * acc;
    };
    r.gradient = [h0, n](std::span<const double> x, std::span<double> out) {
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < n; ++k) acc += h0[i * n + k] * x[k];
        out[i] = acc;
      }
    };
    r.hessian = [h0](std::span<const double>, std::span<double> out) { std::copy(h0.begin(), h0.end(), out.begin()); };
    return r;
  }
  const double c = 1.0 - t;
  auto scaled = [c](std::span<const double> x) {
    Vec p(x.begin(), x.end());
    for (double& u : p) u *= c;
    return p;
  };
  r.value = [fn = v.value, scaled, c](std::span<const double> x) { return fn(scaled(x)) / (c * c); };
  r.gradient = [fn = v.gradient, scaled, c](std::span<const double> x, std::span<double> out) {
    fn(scaled(x), out);
    for (double& u : out) u /= c;
  };
  r.hessian = [fn = v.hessian, scaled](std::span<const double> x, std::span<double> out) { fn(scaled(x), out); };
  return r;
}

HomotopyFamily appendix_morse_family(const Potential& v) {
  Potential limit = appendix_morse(v, 1.0);
  HomotopyFamily h;
  h.kind = HomotopyKind::AppendixMorse;
  h.dim = v.dim;
  h.scalar = [fn = v.value, lim = limit.value](double t, std::span<const double> x) {
    if (t >= 1.0 - kLimitSwitch) return lim(x);
    const double c = 1.0 - t;
    Vec p(x.begin(), x.end());
    for (double& u : p) u *= c;
    return fn(p) / (c * c);
  };
  h.start_scalar = v.value;
  h.end_scalar = limit.value;
  h.description = "appendix morse retraction";
  return h;
}

Field appendix_hyp(const Field& f, double t) {
  require_unit_time(t);
  if (!f.jacobian) throw Error(ErrorCode::Precondition, "the linearizing retraction needs the Jacobian");
  const std::size_t n = f.dim;
  Field r;
  r.dim = n;
  if (t >= 1.0 - kLimitSwitch) {
    Vec origin(n, 0.0), j0(n * n);
    f.jacobian(origin, j0);
    r.eval = [j0, n](std::span<const double> x, std::span<double> out) {
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < n; ++k) acc += j0[i * n + k] * x[k];
        out[i] = acc;
      }
    };
    r.jacobian = [j0](std::span<const double>, std::span<double> out) { std::copy(j0.begin(), j0.end(), out.begin()); };
    return r;
  }
  const double c = 1.0 - t;
  r.eval = [e = f.eval, c](std::span<const double> x, std::span<double> out) {
    Vec p(x.begin(), x.end());
    for (double& u : p) u *= c;
    e(p, out);
    for (double& u : out) u /= c;
  };
  r.jacobian = [j = f.jacobian, c](std::span<const double> x, std::span<double> out) {
    Vec p(x.begin(), x.end());
    for (double& u : p) u *= c;
    j(p, out);
  };
  return r;
}

HomotopyFamily appendix_hyp_family(const Field& f) {
  Field limit = appendix_hyp(f, 1.0);
  HomotopyFamily h;
  h.kind = HomotopyKind::AppendixHyp;
  h.dim = f.dim;
  h.vec = [e = f.eval, lim = limit.eval](double t, std::span<const double> x, std::span<double> out) {
    if (t >= 1.0 - kLimitSwitch) return lim(x, out);
    const double c = 1.0 - t;
    Vec p(x.begin(), x.end());
    for (double& u : p) u *= c;
    e(p, out);
    for (double& u : out) u /= c;
  };
  h.start = f.eval;
  h.end = limit.eval;
  h.description = "appendix linearizing retraction";
  return h;
}

bool is_hurwitz(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols() || a.rows() == 0) return false;
  Eigen::EigenSolver<Eigen::MatrixXd> es(a, false);
  return (es.eigenvalues().real().array() < -1e-10).all();
}

bool is_pds(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols() || a.rows() == 0) return false;
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() > 1e-12;
}

Eigen::MatrixXd matrix_contraction(const Eigen::MatrixXd& a, double t, MatrixClass cls) {
  require_unit_time(t);
  const auto n = a.rows();
  Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  if (cls == MatrixClass::Hurwitz) {
    if (!is_hurwitz(a)) throw Error(ErrorCode::Precondition, "matrix is not Hurwitz");
    return (1.0 - t) * a - t * id;
  }
  if (!is_pds(a)) throw Error(ErrorCode::Precondition, "matrix is not symmetric positive definite");
  return (1.0 - t) * a + t * id;
}

HomotopyFamily matrix_family(const Eigen::MatrixXd& a, MatrixClass cls) {
  matrix_contraction(a, 0.0, cls);  // class check
  const std::size_t n = static_cast<std::size_t>(a.rows());
  const double sign = cls == MatrixClass::Hurwitz ? -1.0 : 1.0;
  auto apply = [a, sign, n](double t, std::span<const double> x, std::span<double> out) {
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) acc += a(static_cast<long>(i), static_cast<long>(k)) * x[k];
      out[i] = (1.0 - t) * acc + sign * t * x[i];
    }
  };
  HomotopyFamily h;
  h.dim = n;
  if (cls == MatrixClass::Hurwitz) {
    h.kind = HomotopyKind::HurwitzLine;
    h.vec = apply;
    h.start = [apply](std::span<const double> x, std::span<double> out) { apply(0.0, x, out); };
    h.end = [](std::span<const double> x, std::span<double> out) {
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = -x[i];
    };
    h.description = "hurwitz line";
  } else {
    h.kind = HomotopyKind::PdsLine;
    h.scalar = [apply, n](double t, std::span<const double> x) {
      Vec mx(n);
      apply(t, x, mx);
      return dot(x, mx);
    };
    h.start_scalar = [s = h.scalar](std::span<const double> x) { return s(0.0, x); };
    h.end_scalar = [](std::span<const double> x) { return dot(x, x); };
    h.description = "pds line";
  }
  return h;
}

}  // namespace stabkit
