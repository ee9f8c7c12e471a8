#include "conjugacy.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "error.hpp"
#include "parallel.hpp"
#include "sampling.hpp"

namespace stabkit {

namespace {

bool at_center(std::span<const double> x, std::span<const double> c) { return dist(x, c) == 0.0; }

// Number of crossings of {V = level} along x_eq + r d, r > 0; -1 when the ray
// never reaches the level.
long count_crossings(const LyapunovFn& v, double level, std::span<const double> d, const StarCheckOptions& opts) {
  const Vec& c = v.equilibrium();
  const std::size_t n = c.size();
  Vec p(n);
  auto phi = [&](double r) {
    for (std::size_t i = 0; i < n; ++i) p[i] = c[i] + r * d[i];
    return v.value(p) - level;
  };
  double r_hi = 1.0;
  while (phi(r_hi) <= 0.0) {
    r_hi *= 2.0;
    if (r_hi > opts.max_radius) return -1;
  }
  long crossings = 0;
  double prev = phi(0.0);
  if (prev >= 0.0) return 0;  // the level must enclose x_eq
  for (std::size_t k = 1; k <= opts.grid; ++k) {
    double cur = phi(r_hi * static_cast<double>(k) / static_cast<double>(opts.grid));
    if ((prev < 0.0) != (cur < 0.0)) ++crossings;
    prev = cur;
  }
  // beyond the bracket the level must not be re-entered on the checked scale
  for (double r = 2.0 * r_hi; r <= 8.0 * r_hi; r *= 2.0) {
    double cur = phi(r);
    if ((prev < 0.0) != (cur < 0.0)) ++crossings;
    prev = cur;
  }
  return crossings;
}

}  // namespace

LevelSetChart LevelSetChart::build(LyapunovFn v, double level, const StarCheckOptions& opts) {
  if (!(level > 0.0)) throw Error(ErrorCode::InvalidArgument, "chart level must be positive");
  if (opts.rays == 0 || opts.grid < 2) throw Error(ErrorCode::InvalidArgument, "ray test needs rays and a radial grid");
  LevelSetChart chart;
  chart.v_ = std::move(v);
  chart.level_ = level;

  const std::size_t n = chart.v_.dim();
  std::vector<long> counts(opts.rays);
  std::vector<Vec> dirs(opts.rays);
  std::vector<std::string> errs(opts.rays);
  parallel_for(opts.rays, opts.threads, [&](std::size_t i) {
    auto rng = sample_rng(opts.seed, kStreamRays, i);
    dirs[i] = sample_direction(rng, n);
    try {
      counts[i] = count_crossings(chart.v_, level, dirs[i], opts);
    } catch (const Error& e) {
      counts[i] = -2;
      errs[i] = e.what();
    }
  });

  StarCheck& s = chart.star_;
  s.rays = opts.rays;
  for (std::size_t i = 0; i < opts.rays; ++i) {
    if (counts[i] == 1) continue;
    if (s.failed_rays++ == 0) {
      s.witness = dirs[i];
      std::ostringstream os;
      if (counts[i] == -1)
        os << "ray never reaches the level within radius " << opts.max_radius;
      else if (counts[i] == -2)
        os << "evaluation failed along a ray: " << errs[i];
      else
        os << "ray crosses the level " << counts[i] << " times";
      s.detail = os.str();
    }
  }
  s.pass = s.failed_rays == 0;
  return chart;
}

Vec LevelSetChart::project(std::span<const double> u) const {
  const Vec& c = equilibrium();
  Vec d(u.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = u[i] - c[i];
  double r = norm(d);
  if (r == 0.0) throw Error(ErrorCode::InvalidArgument, "cannot project the equilibrium onto the sphere");
  for (double& x : d) x /= r;
  return d;
}

void LevelSetChart::require_star() const {
  if (!star_.pass) throw Error(ErrorCode::Precondition, "level set is not star-shaped: " + star_.detail);
}

TauRho tau_rho(const Field& f, const LevelSetChart& chart, std::span<const double> x, const IntegratorSpec& spec) {
  chart.require_star();
  if (x.size() != chart.dim() || f.dim != chart.dim()) throw Error(ErrorCode::Dimension, "point or field dimension differs from the chart");
  if (at_center(x, chart.equilibrium())) throw Error(ErrorCode::InvalidArgument, "tau is undefined at the equilibrium");
  const LyapunovFn& v = chart.lyapunov();
  double vx = v.value(x);
  if (vx == chart.level()) return {0.0, Vec(x.begin(), x.end())};
  ScalarFn g = [&v](std::span<const double> y) { return v.value(y); };
  EventHit hit = flow_to_event(f, x, g, chart.level(), vx > chart.level() ? +1 : -1, spec);
  return {hit.time, std::move(hit.state)};
}

Vec hartman_grobman(const Field& f, const LevelSetChart& chart, std::span<const double> x, const IntegratorSpec& spec) {
  chart.require_star();
  if (at_center(x, chart.equilibrium())) return Vec(x.size(), 0.0);
  TauRho tr = tau_rho(f, chart, x, spec);
  Vec h = chart.project(tr.rho);
  double s = std::exp(tr.tau);
  for (double& c : h) c *= s;
  return h;
}

Vec morse_transform(const Potential& v, const LevelSetChart& chart, std::span<const double> x,
                    const IntegratorSpec& spec) {
  chart.require_star();
  if (x.size() != chart.dim()) throw Error(ErrorCode::Dimension, "point dimension differs from the chart");
  if (at_center(x, chart.equilibrium())) return Vec(x.size(), 0.0);
  double vx = v(x);
  if (!(vx > 0.0)) throw Error(ErrorCode::Domain, "potential must be positive away from its minimum");
  Vec landing = transport(v, x, chart.level() - vx, spec);
  Vec h = chart.project(landing);
  double s = std::sqrt(vx);
  for (double& c : h) c *= s;
  return h;
}

ConjugacyMap make_hartman_grobman(const Field& f, const LevelSetChart& chart, const IntegratorSpec& spec) {
  chart.require_star();
  ConjugacyMap m;
  m.kind = ConjugacyKind::HartmanGrobman;
  m.dim = chart.dim();
  m.center = chart.equilibrium();
  m.eval = [f, chart, spec](std::span<const double> x) { return hartman_grobman(f, chart, x, spec); };
  return m;
}

ConjugacyMap make_morse(const Potential& v, const LevelSetChart& chart, const IntegratorSpec& spec) {
  chart.require_star();
  ConjugacyMap m;
  m.kind = ConjugacyKind::Morse;
  m.dim = chart.dim();
  m.center = chart.equilibrium();
  m.eval = [v, chart, spec](std::span<const double> x) { return morse_transform(v, chart, x, spec); };
  return m;
}

namespace {

struct SampleResult {
  double max = 0.0;
  double sum = 0.0;
  std::size_t count = 0;
  double worst_t = 0.0;
  std::string error;
};

ResidualStats reduce(const std::vector<Vec>& xs, const std::vector<SampleResult>& res) {
  ResidualStats s;
  double sum = 0.0;
  for (std::size_t i = 0; i < res.size(); ++i) {
    if (!res[i].error.empty()) {
      s.errors.push_back(res[i].error);
      continue;
    }
    sum += res[i].sum;
    s.count += res[i].count;
    if (s.worst_x.empty() || res[i].max > s.max) {
      s.max = res[i].max;
      s.worst_x = xs[i];
      s.worst_t = res[i].worst_t;
    }
  }
  s.mean = s.count ? sum / static_cast<double>(s.count) : 0.0;
  return s;
}

std::vector<Vec> residual_samples(const ConjugacyMap& h, const ResidualOptions& opts) {
  if (opts.samples == 0) throw Error(ErrorCode::InvalidArgument, "need at least one sample");
  if (!(opts.r_in > 0.0) || !(opts.r_out > opts.r_in))
    throw Error(ErrorCode::InvalidArgument, "annulus must satisfy 0 < r_in < r_out");
  Vec center = h.center.empty() ? Vec(h.dim, 0.0) : h.center;
  std::vector<Vec> xs(opts.samples);
  for (std::size_t i = 0; i < opts.samples; ++i) {
    auto rng = sample_rng(opts.seed, kStreamConjugacy, i);
    xs[i] = sample_annulus(rng, center, opts.r_in, opts.r_out);
  }
  return xs;
}

std::string describe(const Error& e, std::span<const double> x) {
  std::ostringstream os;
  os.precision(17);
  os << error_code_name(e.code()) << " at (";
  for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << "): " << e.what();
  return os.str();
}

}  // namespace

ResidualStats verify_conjugacy(const Field& f, const ConjugacyMap& h, const ResidualOptions& opts) {
  std::vector<Vec> xs = residual_samples(h, opts);
  std::vector<SampleResult> res(xs.size());
  parallel_for(xs.size(), opts.threads, [&](std::size_t i) {
    const Vec& x = xs[i];
    SampleResult& r = res[i];
    try {
      Vec hx = h(x);
      double scale = 1e-12 + norm(hx);
      for (double t : opts.t_set) {
        Vec y = flow(f, x, t, opts.spec);
        Vec hy = h(y);
        double e = std::exp(-t), acc = 0.0;
        for (std::size_t k = 0; k < hx.size(); ++k) acc += (hy[k] - e * hx[k]) * (hy[k] - e * hx[k]);
        double rel = std::sqrt(acc) / scale;
        if (r.count == 0 || rel > r.max) {
          r.max = rel;
          r.worst_t = t;
        }
        r.sum += rel;
        ++r.count;
      }
    } catch (const Error& e) {
      r.error = describe(e, x);
    }
  });
  return reduce(xs, res);
}

ResidualStats verify_squared_norm(const Potential& v, const ConjugacyMap& h, const ResidualOptions& opts) {
  std::vector<Vec> xs = residual_samples(h, opts);
  std::vector<SampleResult> res(xs.size());
  parallel_for(xs.size(), opts.threads, [&](std::size_t i) {
    const Vec& x = xs[i];
    SampleResult& r = res[i];
    try {
      Vec hx = h(x);
      double vx = v(x);
      double rel = std::abs(vx - dot(hx, hx)) / (1.0 + std::abs(vx));
      r.max = rel;
      r.sum = rel;
      r.count = 1;
    } catch (const Error& e) {
      r.error = describe(e, x);
    }
  });
  return reduce(xs, res);
}

}  // namespace stabkit
