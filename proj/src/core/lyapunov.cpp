#include "lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "error.hpp"
#include "parallel.hpp"
#include "sampling.hpp"

namespace stabkit {

namespace {

std::string point_str(std::span<const double> x) {
  std::ostringstream os;
  os.precision(17);
  os << "(";
  for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ")";
  return os.str();
}

}  // namespace

LyapunovFn LyapunovFn::from_potential(Potential v, Vec equilibrium) {
  if (v.dim != equilibrium.size()) throw Error(ErrorCode::Dimension, "equilibrium dimension mismatch");
  LyapunovFn l;
  l.kind_ = LyapunovKind::Explicit;
  l.equilibrium_ = std::move(equilibrium);
  l.potential_ = std::make_shared<const Potential>(std::move(v));
  return l;
}

LyapunovFn LyapunovFn::massera(Field f, Vec equilibrium, double horizon, IntegratorSpec spec) {
  if (f.dim != equilibrium.size()) throw Error(ErrorCode::Dimension, "equilibrium dimension mismatch");
  if (!(horizon > 0.0)) throw Error(ErrorCode::Precondition, "Massera horizon T must be positive");
  if (!f.has_jacobian()) throw Error(ErrorCode::Precondition, "Massera construction needs the field Jacobian");
  Vec fe = f(equilibrium);
  if (norm(fe) > 1e-9)
    throw Error(ErrorCode::Precondition, "x_eq is not an equilibrium: |F(x_eq)| = " + std::to_string(norm(fe)));
  spec.validate();
  if (horizon > spec.max_time) throw Error(ErrorCode::Precondition, "horizon exceeds max_time");
  LyapunovFn l;
  l.kind_ = LyapunovKind::Massera;
  l.equilibrium_ = std::move(equilibrium);
  l.horizon_ = horizon;
  l.field_ = std::make_shared<const Field>(std::move(f));
  l.spec_ = spec;
  // Integrating in deviation coordinates makes V(x_eq) vanish up to the
  // equilibrium residual; subtract whatever is left.
  l.offset_ = l.value(l.equilibrium_);
  return l;
}

double LyapunovFn::value(std::span<const double> x) const {
  if (x.size() != dim()) throw Error(ErrorCode::Dimension, "point dimension mismatch");
  if (kind_ == LyapunovKind::Explicit) return (*potential_)(x);

  const std::size_t n = dim();
  const Field& f = *field_;
  const Vec& xe = equilibrium_;
  OdeRhs rhs = [&, p = Vec(n)](double, std::span<const double> y, std::span<double> dy) mutable {
    for (std::size_t i = 0; i < n; ++i) p[i] = xe[i] + y[i];
    f.eval(p, dy.first(n));
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += y[i] * y[i];
    dy[n] = s;
  };
  Vec y0(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) y0[i] = x[i] - xe[i];
  Trajectory tr = integrate_ode(rhs, y0, horizon_, spec_, {}, false);
  return tr.final_state()[n] - offset_;
}

std::pair<double, Vec> LyapunovFn::eval(std::span<const double> x) const {
  if (x.size() != dim()) throw Error(ErrorCode::Dimension, "point dimension mismatch");
  const std::size_t n = dim();
  if (kind_ == LyapunovKind::Explicit) {
    Vec g(n);
    potential_->gradient(x, g);
    return {(*potential_)(x), std::move(g)};
  }

  // Layout: z = x - x_eq (n) | q (1) | M (n*n, row-major) | g (n)
  const Field& f = *field_;
  const Vec& xe = equilibrium_;
  const std::size_t iq = n, im = n + 1, ig = n + 1 + n * n;
  OdeRhs rhs = [&, jac = Vec(n * n), p = Vec(n)](double, std::span<const double> y,
                                                  std::span<double> dy) mutable {
    for (std::size_t i = 0; i < n; ++i) p[i] = xe[i] + y[i];
    f.eval(p, dy.first(n));
    f.jacobian(p, jac);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += y[i] * y[i];
    dy[iq] = s;
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        double acc = 0.0;
        for (std::size_t k = 0; k < n; ++k) acc += jac[r * n + k] * y[im + k * n + c];
        dy[im + r * n + c] = acc;
      }
    }
    for (std::size_t c = 0; c < n; ++c) {
      double acc = 0.0;
      for (std::size_t r = 0; r < n; ++r) acc += y[im + r * n + c] * y[r];
      dy[ig + c] = 2.0 * acc;
    }
  };
  Vec y0(ig + n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    y0[i] = x[i] - xe[i];
    y0[im + i * n + i] = 1.0;
  }
  Trajectory tr = integrate_ode(rhs, y0, horizon_, spec_, {}, false);
  const Vec& yT = tr.final_state();
  return {yT[iq] - offset_, Vec(yT.begin() + static_cast<long>(ig), yT.end())};
}

Potential LyapunovFn::as_potential() const {
  if (kind_ == LyapunovKind::Explicit) return *potential_;
  Potential p;
  p.dim = dim();
  LyapunovFn self = *this;
  p.value = [self](std::span<const double> x) { return self.value(x); };
  p.gradient = [self](std::span<const double> x, std::span<double> out) {
    Vec g = self.eval(x).second;
    std::copy(g.begin(), g.end(), out.begin());
  };
  return p;
}

double decrease_ratio(std::span<const double> grad, std::span<const double> f, std::span<const double> x) {
  double ng = norm(grad);
  if (!(ng >= kGradientFloor))
    throw Error(ErrorCode::GradientSingular, "gradient-singularity at " + point_str(x));
  double nf = norm(f);
  if (nf == 0.0) return 0.0;
  return -dot(grad, f) / (ng * nf);
}

Certificate verify_certificate(const LyapunovFn& v, const Field& f, const CertificateOptions& opts) {
  if (!(opts.r_in > 0.0) || !(opts.r_out > opts.r_in))
    throw Error(ErrorCode::InvalidArgument, "annulus must satisfy 0 < r_in < r_out");
  if (opts.samples == 0) throw Error(ErrorCode::InvalidArgument, "need at least one sample");
  if (f.dim != v.dim()) throw Error(ErrorCode::Dimension, "field and Lyapunov function dimensions differ");

  const Vec& xe = v.equilibrium();
  const std::size_t m = opts.samples;
  const std::size_t ms = opts.sphere_samples ? opts.sphere_samples : std::min<std::size_t>(m, 512);

  struct Slot {
    double ratio = std::numeric_limits<double>::infinity();
    Vec x;
    std::string failure;
  };
  std::vector<Slot> slots(m);
  parallel_for(m, opts.threads, [&](std::size_t i) {
    auto rng = sample_rng(opts.seed, kStreamCertificate, i);
    Slot& s = slots[i];
    s.x = sample_annulus(rng, xe, opts.r_in, opts.r_out);
    try {
      auto [val, grad] = v.eval(s.x);
      s.ratio = decrease_ratio(grad, f(s.x), s.x);
    } catch (const Error& e) {
      s.failure = std::string(error_code_name(e.code())) + ": " + e.what();
    }
  });

  std::vector<double> inner(ms), outer(ms);
  std::vector<std::string> sphere_fail(2 * ms);
  parallel_for(2 * ms, opts.threads, [&](std::size_t k) {
    bool is_outer = k >= ms;
    std::size_t i = is_outer ? k - ms : k;
    auto rng = sample_rng(opts.seed, is_outer ? kStreamOuterSphere : kStreamInnerSphere, i);
    Vec x = sample_sphere(rng, xe, is_outer ? opts.r_out : opts.r_in);
    try {
      (is_outer ? outer : inner)[i] = v.value(x);
    } catch (const Error& e) {
      sphere_fail[k] = std::string(error_code_name(e.code())) + " at " + point_str(x) + ": " + e.what();
    }
  });

  Certificate c;
  c.samples = m;
  c.r_in = opts.r_in;
  c.r_out = opts.r_out;
  c.margin_floor = opts.margin_floor;
  c.decrease_margin = std::numeric_limits<double>::infinity();
  for (const Slot& s : slots) {
    if (!s.failure.empty()) {
      c.failures.push_back({s.x, s.failure});
      continue;
    }
    if (s.ratio < c.decrease_margin) {
      c.decrease_margin = s.ratio;
      c.worst_point = s.x;
    }
  }
  for (const auto& msg : sphere_fail)
    if (!msg.empty()) c.failures.push_back({{}, msg});
  if (c.failures.size() == m) c.decrease_margin = -std::numeric_limits<double>::infinity();
  c.properness_proxy = *std::min_element(outer.begin(), outer.end()) - *std::max_element(inner.begin(), inner.end());
  c.pass = c.failures.empty() && c.decrease_margin > opts.margin_floor && c.properness_proxy > 0.0;
  return c;
}

namespace {

Vec newton(const std::function<void(std::span<const double>, std::span<double>)>& fn,
           const std::function<void(std::span<const double>, std::span<double>)>& jac, std::span<const double> guess,
           const NewtonOptions& opts) {
  const std::size_t n = guess.size();
  Vec x(guess.begin(), guess.end()), fx(n), trial(n), ft(n), jbuf(n * n);
  fn(x, fx);
  double res = norm(fx);
  for (std::size_t it = 0; it < opts.max_iterations; ++it) {
    jac(x, jbuf);
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> J(jbuf.data(),
                                                                                                 static_cast<long>(n),
                                                                                                 static_cast<long>(n));
    Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
    lu.setThreshold(1e-14);
    if (!lu.isInvertible()) {
      if (res <= opts.tolerance) return x;
      throw Error(ErrorCode::NonConvergence, "Newton stalled: singular Jacobian at " + point_str(x));
    }
    Eigen::VectorXd step = lu.solve(-Eigen::Map<const Eigen::VectorXd>(fx.data(), static_cast<long>(n)));
    // A small residual alone is not enough near a degenerate root, where F is
    // flat; also wait for the Newton correction itself to become negligible.
    if (res <= opts.tolerance && step.norm() <= opts.tolerance * (1.0 + norm(x))) return x;
    double lambda = 1.0;
    bool improved = false;
    for (int h = 0; h < 40; ++h, lambda *= 0.5) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = x[i] + lambda * step[static_cast<long>(i)];
      try {
        fn(trial, ft);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::Domain) throw;
        continue;
      }
      double rt = norm(ft);
      if (rt < res) {
        x.swap(trial);
        fx.swap(ft);
        res = rt;
        improved = true;
        break;
      }
    }
    if (!improved && res <= opts.tolerance) return x;
    if (!improved) throw Error(ErrorCode::NonConvergence, "Newton line search stalled at " + point_str(x));
  }
  if (res <= opts.tolerance) return x;
  std::ostringstream os;
  os << "Newton did not converge in " << opts.max_iterations << " iterations (|F| = " << res << ")";
  throw Error(ErrorCode::NonConvergence, os.str());
}

}  // namespace

Vec find_equilibrium(const Field& f, std::span<const double> guess, const NewtonOptions& opts) {
  if (guess.size() != f.dim) throw Error(ErrorCode::Dimension, "guess dimension mismatch");
  if (!f.has_jacobian()) throw Error(ErrorCode::Precondition, "equilibrium search needs the field Jacobian");
  return newton(f.eval, f.jacobian, guess, opts);
}

Vec find_minimum(const Potential& v, std::span<const double> guess, const NewtonOptions& opts) {
  if (guess.size() != v.dim) throw Error(ErrorCode::Dimension, "guess dimension mismatch");
  if (!v.hessian) throw Error(ErrorCode::Precondition, "minimum search needs the Hessian");
  return newton(v.gradient, v.hessian, guess, opts);
}

}  // namespace stabkit
