#include "stability.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "error.hpp"
#include "parallel.hpp"
#include "sampling.hpp"

namespace stabkit {

const char* gas_verdict_name(GasVerdict v) {
  switch (v) {
    case GasVerdict::Supported: return "supported";
    case GasVerdict::Falsified: return "falsified";
    case GasVerdict::Inconclusive: return "inconclusive";
  }
  return "unknown";
}

const char* witness_kind_name(WitnessKind k) {
  switch (k) {
    case WitnessKind::Escape: return "escape";
    case WitnessKind::NoProgress: return "no_progress";
    case WitnessKind::ForeignEquilibrium: return "foreign_equilibrium";
    case WitnessKind::Stalled: return "stalled";
    case WitnessKind::Failed: return "failed";
  }
  return "unknown";
}

bool witness_falsifies(WitnessKind k) {
  return k == WitnessKind::Escape || k == WitnessKind::NoProgress || k == WitnessKind::ForeignEquilibrium;
}

const char* attraction_verdict_name(AttractionVerdict v) {
  return v == AttractionVerdict::NotAttracting ? "not-attracting" : "attracting-evidence";
}

namespace {

struct Outcome {
  bool converged = false;
  GasWitness witness;
};

// Integrates one start and classifies the end state.
Outcome classify(const Field& f, std::span<const double> x_eq, const Vec& x0, const GasOptions& opts) {
  Outcome o;
  GasWitness& w = o.witness;
  w.start = x0;
  w.initial_dist = dist(x0, x_eq);
  try {
    w.final_state = flow(f, x0, opts.horizon, opts.spec);
  } catch (const FlowError& e) {
    w.final_state = e.state();
    w.final_dist = std::numeric_limits<double>::infinity();
    w.kind = e.code() == ErrorCode::FiniteEscape ? WitnessKind::Escape : WitnessKind::Failed;
    w.detail = std::string(error_code_name(e.code())) + ": " + e.what();
    return o;
  } catch (const Error& e) {
    w.final_dist = std::numeric_limits<double>::infinity();
    w.kind = WitnessKind::Failed;
    w.detail = std::string(error_code_name(e.code())) + ": " + e.what();
    return o;
  }
  w.final_dist = dist(w.final_state, x_eq);
  if (w.final_dist <= opts.tol) {
    o.converged = true;
    return o;
  }
  // a trajectory parked on another zero of F refutes global attraction
  Vec fy = f(w.final_state);
  if (f.has_jacobian() && norm(fy) <= 1e-6 * (1.0 + norm(w.final_state))) {
    try {
      Vec root = find_equilibrium(f, w.final_state);
      double sep = dist(root, x_eq);
      if (sep > opts.tol + 1e-6 * (1.0 + norm(x_eq)) && dist(root, w.final_state) <= 0.1 * sep) {
        std::ostringstream os;
        os.precision(17);
        os << "settled near another equilibrium at (";
        for (std::size_t i = 0; i < root.size(); ++i) os << (i ? ", " : "") << root[i];
        os << ")";
        w.kind = WitnessKind::ForeignEquilibrium;
        w.detail = os.str();
        return o;
      }
    } catch (const Error&) {
      // no nearby zero; fall through to stalled
    }
  }
  if (w.final_dist >= (1.0 - 1e-6) * w.initial_dist) {
    w.kind = WitnessKind::NoProgress;
    w.detail = "distance to the equilibrium did not decrease over the horizon";
    return o;
  }
  w.kind = WitnessKind::Stalled;
  w.detail = "still approaching the equilibrium at the horizon";
  return o;
}

void resolve_box(std::span<const double> x_eq, const GasOptions& opts, Vec& lo, Vec& hi) {
  const std::size_t n = x_eq.size();
  if (opts.box_lo.empty() && opts.box_hi.empty()) {
    lo.resize(n);
    hi.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      lo[i] = x_eq[i] - 5.0;
      hi[i] = x_eq[i] + 5.0;
    }
    return;
  }
  if (opts.box_lo.size() != n || opts.box_hi.size() != n)
    throw Error(ErrorCode::Dimension, "sample box dimension differs from the equilibrium");
  for (std::size_t i = 0; i < n; ++i)
    if (!(opts.box_lo[i] < opts.box_hi[i])) throw Error(ErrorCode::InvalidArgument, "sample box must have lo < hi");
  lo = opts.box_lo;
  hi = opts.box_hi;
}

}  // namespace

GasEvidence check_gas(const Field& f, std::span<const double> x_eq, const GasOptions& opts) {
  if (x_eq.size() != f.dim) throw Error(ErrorCode::Dimension, "equilibrium dimension differs from the field");
  if (opts.samples == 0) throw Error(ErrorCode::InvalidArgument, "need at least one sample");
  if (!(opts.horizon > 0.0) || !(opts.tol > 0.0))
    throw Error(ErrorCode::InvalidArgument, "horizon and tolerance must be positive");
  opts.spec.validate();
  if (norm(f(x_eq)) > 1e-9) throw Error(ErrorCode::Precondition, "F does not vanish at the equilibrium");
  Vec lo, hi;
  resolve_box(x_eq, opts, lo, hi);

  std::vector<Outcome> out(opts.samples);
  parallel_for(opts.samples, opts.threads, [&](std::size_t i) {
    auto rng = sample_rng(opts.seed, kStreamGas, i);
    out[i] = classify(f, x_eq, sample_box(rng, lo, hi), opts);
    out[i].witness.index = i;
  });

  GasEvidence ev;
  ev.n_trajectories = opts.samples;
  std::size_t falsifying = 0, first = 0;
  for (auto& o : out) {
    if (std::isfinite(o.witness.final_dist)) ev.max_final_dist = std::max(ev.max_final_dist, o.witness.final_dist);
    if (o.converged) {
      ++ev.converged;
      continue;
    }
    if (witness_falsifies(o.witness.kind) && falsifying++ == 0) first = ev.witnesses.size();
    ev.witnesses.push_back(std::move(o.witness));
  }

  if (opts.with_certificate) {
    try {
      LyapunovFn v = LyapunovFn::massera(f, Vec(x_eq.begin(), x_eq.end()), opts.massera_horizon, opts.spec);
      CertificateOptions co = opts.certificate;
      co.seed = opts.seed;
      co.threads = opts.threads;
      ev.certificate = verify_certificate(v, f, co);
    } catch (const Error& e) {
      ev.certificate_error = std::string(error_code_name(e.code())) + ": " + e.what();
    }
  }

  std::ostringstream os;
  if (falsifying > 0) {
    const GasWitness& w = ev.witnesses[first];
    ev.verdict = GasVerdict::Falsified;
    os << falsifying << " of " << ev.n_trajectories << " trajectories refute attraction; first witness (sample "
       << w.index << ") is " << witness_kind_name(w.kind);
  } else if (ev.converged < ev.n_trajectories) {
    ev.verdict = GasVerdict::Inconclusive;
    os << ev.n_trajectories - ev.converged << " trajectories neither converged nor refuted attraction";
  } else if (opts.with_certificate && !(ev.certificate && ev.certificate->pass)) {
    ev.verdict = GasVerdict::Inconclusive;
    os << "all trajectories converged but the Lyapunov certificate did not pass";
    if (!ev.certificate_error.empty()) os << " (" << ev.certificate_error << ")";
  } else {
    ev.verdict = GasVerdict::Supported;
    os << "all " << ev.n_trajectories << " trajectories converged";
    if (opts.with_certificate) os << " and the Lyapunov certificate passed";
  }
  ev.reason = os.str();
  return ev;
}

bool replay_gas_witness(const Field& f, std::span<const double> x_eq, const GasWitness& w, const GasOptions& opts) {
  Outcome o = classify(f, x_eq, w.start, opts);
  return !o.converged && o.witness.kind == w.kind;
}

double distance_to_curve(const std::vector<double>& z_t, const std::vector<Vec>& z_x, double t,
                         std::span<const double> x) {
  const std::size_t n = x.size();
  double best = std::numeric_limits<double>::infinity();
  if (z_t.size() == 1) {
    double acc = (t - z_t[0]) * (t - z_t[0]);
    for (std::size_t i = 0; i < n; ++i) acc += (x[i] - z_x[0][i]) * (x[i] - z_x[0][i]);
    return std::sqrt(acc);
  }
  for (std::size_t k = 0; k + 1 < z_t.size(); ++k) {
    // closest point on the segment in (t, x) space
    double dt = z_t[k + 1] - z_t[k];
    double num = (t - z_t[k]) * dt, den = dt * dt;
    for (std::size_t i = 0; i < n; ++i) {
      double dx = z_x[k + 1][i] - z_x[k][i];
      num += (x[i] - z_x[k][i]) * dx;
      den += dx * dx;
    }
    double s = den > 0.0 ? std::clamp(num / den, 0.0, 1.0) : 0.0;
    double e = t - (z_t[k] + s * dt);
    double acc = e * e;
    for (std::size_t i = 0; i < n; ++i) {
      double c = x[i] - (z_x[k][i] + s * (z_x[k + 1][i] - z_x[k][i]));
      acc += c * c;
    }
    best = std::min(best, acc);
  }
  return std::sqrt(best);
}

namespace {

double max_real_eigenvalue(const Field& f, std::span<const double> x) {
  const std::size_t n = f.dim;
  Vec jac(n * n);
  f.jacobian(x, jac);
  Eigen::MatrixXd a = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      jac.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  return a.eigenvalues().real().maxCoeff();
}

double sample_horizon(const Field& f, std::span<const double> x_t, const FamilyAttractionOptions& opts) {
  double cap = 0.9 * opts.spec.max_time;
  double h = opts.horizon;
  if (f.has_jacobian()) {
    double lam = max_real_eigenvalue(f, x_t);
    h = lam < 0.0 ? std::max(h, opts.rate_factor / -lam) : cap;
  }
  return std::min(h, cap);
}

enum class FrozenOutcome { Attracted, Witness, Unresolved };

FrozenOutcome run_frozen(const FieldFamily& h, const FamilyAttractionReport& r, FamilyWitness& w,
                         const FamilyAttractionOptions& opts) {
  Field f = h(w.t);
  w.initial_dist = distance_to_curve(r.z_t, r.z_x, w.t, w.start);
  try {
    w.limit = flow(f, w.start, w.horizon, opts.spec);
  } catch (const FlowError& e) {
    w.limit = e.state();
    w.final_dist = std::numeric_limits<double>::infinity();
    w.escaped = e.code() == ErrorCode::FiniteEscape;
    w.detail = std::string(error_code_name(e.code())) + ": " + e.what();
    return w.escaped ? FrozenOutcome::Witness : FrozenOutcome::Unresolved;
  }
  w.final_dist = distance_to_curve(r.z_t, r.z_x, w.t, w.limit);
  if (w.final_dist <= opts.tol) return FrozenOutcome::Attracted;
  if (!f.has_jacobian()) return FrozenOutcome::Unresolved;
  try {
    Vec root = find_equilibrium(f, w.limit);
    double off = distance_to_curve(r.z_t, r.z_x, w.t, root);
    if (off > opts.tol && dist(root, w.limit) <= 0.1 * off && max_real_eigenvalue(f, root) < -1e-10) {
      w.rest = std::move(root);
      w.detail = "settled on an attracting equilibrium of the frozen field away from the curve";
      return FrozenOutcome::Witness;
    }
  } catch (const Error&) {
  }
  return FrozenOutcome::Unresolved;
}

}  // namespace

FamilyAttractionReport check_family_attraction(const FieldFamily& h, const EquilibriumCurve& z,
                                               const FamilyAttractionOptions& opts) {
  if (!(opts.t_lo <= opts.t_hi)) throw Error(ErrorCode::InvalidArgument, "need t_lo <= t_hi");
  if (!(opts.box > 0.0) || !(opts.min_offset > 0.0) || !(opts.min_offset <= opts.box))
    throw Error(ErrorCode::InvalidArgument, "need 0 < min_offset <= box");
  if (opts.samples == 0 || !(opts.horizon > 0.0) || !(opts.tol > 0.0) || !(opts.rate_factor > 0.0))
    throw Error(ErrorCode::InvalidArgument, "samples, horizon, rate_factor and tol must be positive");
  if (opts.curve_points < 1) throw Error(ErrorCode::InvalidArgument, "curve needs at least one point");
  opts.spec.validate();

  FamilyAttractionReport r;
  const std::size_t m = opts.t_hi > opts.t_lo ? opts.curve_points : 0;
  for (std::size_t k = 0; k <= m; ++k) {
    double t = m ? opts.t_lo + (opts.t_hi - opts.t_lo) * static_cast<double>(k) / static_cast<double>(m) : opts.t_lo;
    r.z_t.push_back(t);
    r.z_x.push_back(z(t));
  }
  const std::size_t n = r.z_x.front().size();
  if (n == 0 || n > 62) throw Error(ErrorCode::Dimension, "equilibrium curve has unsupported dimension");

  std::vector<FamilyWitness> all(opts.samples);
  std::vector<FrozenOutcome> outcome(opts.samples);
  const double log_lo = std::log(opts.min_offset), log_hi = std::log(opts.box);
  parallel_for(opts.samples, opts.threads, [&](std::size_t i) {
    auto rng = sample_rng(opts.seed, kStreamFamily, i);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    FamilyWitness& w = all[i];
    w.index = i;
    w.t = opts.t_lo + (opts.t_hi - opts.t_lo) * uni(rng);
    Vec x_t = z(w.t);
    if (x_t.size() != n) throw Error(ErrorCode::Dimension, "equilibrium curve changes dimension");
    w.start = x_t;
    // orthant from the low bits of the index so both signs are always covered
    std::uint64_t orthant = static_cast<std::uint64_t>(i) % (std::uint64_t{1} << n);
    for (std::size_t j = 0; j < n; ++j) {
      double mag = std::exp(log_lo + (log_hi - log_lo) * uni(rng));
      w.start[j] += ((orthant >> j) & 1u) ? -mag : mag;
    }
    w.horizon = sample_horizon(h(w.t), x_t, opts);
    outcome[i] = run_frozen(h, r, w, opts);
  });

  r.samples = opts.samples;
  for (std::size_t i = 0; i < opts.samples; ++i) {
    switch (outcome[i]) {
      case FrozenOutcome::Witness: r.witnesses.push_back(std::move(all[i])); break;
      case FrozenOutcome::Attracted: ++r.attracted; break;
      case FrozenOutcome::Unresolved: ++r.unresolved; break;
    }
  }
  r.verdict = r.witnesses.empty() ? AttractionVerdict::AttractingEvidence : AttractionVerdict::NotAttracting;
  return r;
}

bool replay_family_witness(const FieldFamily& h, const FamilyAttractionReport& report, const FamilyWitness& w,
                           const FamilyAttractionOptions& opts) {
  FamilyWitness again;
  again.t = w.t;
  again.start = w.start;
  again.horizon = w.horizon;
  return run_frozen(h, report, again, opts) == FrozenOutcome::Witness;
}

FrozenLocalCheck frozen_local_check(const FieldFamily& h, double t, std::span<const double> x_t, std::size_t samples,
                                    std::uint64_t seed, unsigned threads) {
  FrozenLocalCheck c;
  c.t = t;
  c.x_t.assign(x_t.begin(), x_t.end());
  Field f = h(t);
  if (!f.has_jacobian()) throw Error(ErrorCode::Precondition, "local check needs a Jacobian");
  const std::size_t n = f.dim;
  if (x_t.size() != n) throw Error(ErrorCode::Dimension, "equilibrium dimension differs from the field");
  c.max_real_eigenvalue = max_real_eigenvalue(f, x_t);
  c.hurwitz = c.max_real_eigenvalue < -1e-10;

  GasOptions g;
  g.samples = samples;
  g.seed = seed;
  g.threads = threads;
  double half = norm(x_t) > 0.0 ? 0.5 * norm(x_t) : 0.5;
  g.box_lo.resize(n);
  g.box_hi.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double w = x_t[i] != 0.0 ? 0.5 * std::abs(x_t[i]) : half;
    g.box_lo[i] = x_t[i] - w;
    g.box_hi[i] = x_t[i] + w;
  }
  // long enough for the slowest linear mode to shrink by e^-25
  double rate = c.hurwitz ? -c.max_real_eigenvalue : 1.0;
  g.horizon = std::clamp(25.0 / rate, 30.0, 0.9 * g.spec.max_time);
  if (!c.hurwitz) return c;
  c.gas = check_gas(f, x_t, g);
  c.pass = c.gas.verdict == GasVerdict::Supported;
  return c;
}

}  // namespace stabkit
