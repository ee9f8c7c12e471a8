#include "flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "error.hpp"

namespace stabkit {

namespace {

// Dormand-Prince 5(4) tableau with Hairer's dense-output coefficients.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784, a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

constexpr double kSafe = 0.9, kFacMin = 0.2, kFacMax = 10.0, kBeta = 0.04;
constexpr double kExpo = 0.2 - kBeta * 0.75;

bool is_recoverable(ErrorCode c) { return c == ErrorCode::Domain || c == ErrorCode::GradientSingular; }

std::string describe_state(double t, std::span<const double> y) {
  std::ostringstream os;
  os.precision(6);
  os << " at t=" << t << ", |x|=" << norm(y);
  return os.str();
}

class Dopri5 {
 public:
  Dopri5(const OdeRhs& rhs, std::span<const double> y0, const IntegratorSpec& spec)
      : rhs_(rhs), spec_(spec), n_(y0.size()), y_(y0.begin(), y0.end()), y1_(n_), ytmp_(n_), err_(n_), k1_(n_),
        k2_(n_), k3_(n_), k4_(n_), k5_(n_), k6_(n_), k7_(n_) {
    rhs_(0.0, y_, k1_);
    check_finite(k1_, "non-finite vector field at the initial state");
  }

  double t() const { return t_; }
  const Vec& y() const { return y_; }
  const DenseSegment& segment() const { return seg_; }
  std::size_t steps() const { return steps_; }
  std::size_t rejected() const { return rejected_; }

  // Takes one accepted step towards t_limit without passing it.
  void step(double t_limit) {
    const double dir = t_limit >= t_ ? 1.0 : -1.0;
    if (h_ == 0.0) h_ = dir * initial_step(dir);
    bool last_rejected = false;
    for (;;) {
      if (steps_ + rejected_ >= spec_.max_steps)
        throw FlowError(ErrorCode::StepsExhausted, "step budget exhausted" + describe_state(t_, y_), t_, y_);
      double hmax = spec_.max_step > 0.0 ? spec_.max_step : std::numeric_limits<double>::infinity();
      double h = dir * std::min(std::abs(h_), hmax);
      bool clipped = false;
      if (std::abs(h) >= std::abs(t_limit - t_)) {
        h = t_limit - t_;
        clipped = true;
      }
      if (std::abs(h) <= 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t_))) {
        // Blow-up faster than the time grid can resolve: the escape threshold
        // lies beyond the last representable step.
        double nrm = norm(y_);
        if (nrm >= std::sqrt(spec_.escape_norm) && dir * dot(y_, k1_) > 0.0)
          throw FlowError(ErrorCode::FiniteEscape,
                          "finite escape: unbounded growth within unresolvable time" + describe_state(t_, y_), t_, y_);
        throw FlowError(ErrorCode::StepUnderflow, "step size underflow near a singularity" + describe_state(t_, y_),
                        t_, y_);
      }

      double err = 0.0;
      bool ok = attempt(h, err);
      if (ok && err <= 1.0) {
        double fac11 = std::pow(std::max(err, 1e-300), kExpo);
        double fac = fac11 / std::pow(facold_, kBeta);
        fac = std::clamp(fac / kSafe, 1.0 / kFacMax, 1.0 / kFacMin);
        double hnew = h / fac;
        if (last_rejected) hnew = dir * std::min(std::abs(hnew), std::abs(h));
        facold_ = std::max(err, 1e-4);
        accept(h, clipped ? t_limit : t_ + h);
        // A clipped final step says nothing about the natural step size.
        if (!clipped || std::abs(hnew) < std::abs(h_)) h_ = hnew;
        return;
      }
      ++rejected_;
      last_rejected = true;
      if (!ok) {
        h_ = h * 0.25;
      } else {
        double fac11 = std::pow(err, kExpo);
        h_ = h / std::min(1.0 / kFacMin, fac11 / kSafe);
      }
    }
  }

 private:
  void check_finite(std::span<const double> v, const char* what) const {
    for (double c : v)
      if (!std::isfinite(c)) throw FlowError(ErrorCode::Domain, std::string(what) + describe_state(t_, y_), t_, y_);
  }

  double initial_step(double dir) {
    auto sk = [&](std::size_t i) { return spec_.abs_tol + spec_.rel_tol * std::abs(y_[i]); };
    double dnf = 0.0, dny = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      dnf += (k1_[i] / sk(i)) * (k1_[i] / sk(i));
      dny += (y_[i] / sk(i)) * (y_[i] / sk(i));
    }
    double h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : 0.01 * std::sqrt(dny / dnf);
    if (spec_.max_step > 0.0) h = std::min(h, spec_.max_step);
    for (std::size_t i = 0; i < n_; ++i) ytmp_[i] = y_[i] + dir * h * k1_[i];
    double der2 = 0.0;
    try {
      rhs_(t_ + dir * h, ytmp_, k2_);
      for (std::size_t i = 0; i < n_; ++i) der2 += ((k2_[i] - k1_[i]) / sk(i)) * ((k2_[i] - k1_[i]) / sk(i));
      der2 = std::sqrt(der2) / h;
    } catch (const Error& e) {
      if (!is_recoverable(e.code())) throw;
      return 1e-6 * h;
    }
    if (!std::isfinite(der2)) return 1e-6 * h;
    double der12 = std::max(std::abs(der2), std::sqrt(dnf));
    double h1 = der12 <= 1e-15 ? std::max(1e-6, h * 1e-3) : std::pow(0.01 / der12, 0.2);
    h = std::min(100.0 * h, h1);
    if (spec_.max_step > 0.0) h = std::min(h, spec_.max_step);
    return h;
  }

  // Computes y1_ and k2..k7 for a step of size h; false if a stage was not
  // evaluable (domain violation or non-finite value), which shrinks the step.
  bool attempt(double h, double& err) {
    try {
      for (std::size_t i = 0; i < n_; ++i) ytmp_[i] = y_[i] + h * a21 * k1_[i];
      rhs_(t_ + c2 * h, ytmp_, k2_);
      for (std::size_t i = 0; i < n_; ++i) ytmp_[i] = y_[i] + h * (a31 * k1_[i] + a32 * k2_[i]);
      rhs_(t_ + c3 * h, ytmp_, k3_);
      for (std::size_t i = 0; i < n_; ++i) ytmp_[i] = y_[i] + h * (a41 * k1_[i] + a42 * k2_[i] + a43 * k3_[i]);
      rhs_(t_ + c4 * h, ytmp_, k4_);
      for (std::size_t i = 0; i < n_; ++i)
        ytmp_[i] = y_[i] + h * (a51 * k1_[i] + a52 * k2_[i] + a53 * k3_[i] + a54 * k4_[i]);
      rhs_(t_ + c5 * h, ytmp_, k5_);
      for (std::size_t i = 0; i < n_; ++i)
        ytmp_[i] = y_[i] + h * (a61 * k1_[i] + a62 * k2_[i] + a63 * k3_[i] + a64 * k4_[i] + a65 * k5_[i]);
      rhs_(t_ + h, ytmp_, k6_);
      for (std::size_t i = 0; i < n_; ++i)
        y1_[i] = y_[i] + h * (a71 * k1_[i] + a73 * k3_[i] + a74 * k4_[i] + a75 * k5_[i] + a76 * k6_[i]);
      rhs_(t_ + h, y1_, k7_);
    } catch (const Error& e) {
      if (!is_recoverable(e.code())) throw;
      return false;
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      double e = h * (e1 * k1_[i] + e3 * k3_[i] + e4 * k4_[i] + e5 * k5_[i] + e6 * k6_[i] + e7 * k7_[i]);
      double sk = spec_.abs_tol + spec_.rel_tol * std::max(std::abs(y_[i]), std::abs(y1_[i]));
      sum += (e / sk) * (e / sk);
    }
    err = std::sqrt(sum / static_cast<double>(n_));
    return std::isfinite(err);
  }

  void accept(double h, double t_new) {
    seg_.t0 = t_;
    seg_.h = h;
    seg_.coeff.resize(5 * n_);
    for (std::size_t i = 0; i < n_; ++i) {
      double ydiff = y1_[i] - y_[i];
      double bspl = h * k1_[i] - ydiff;
      seg_.coeff[i] = y_[i];
      seg_.coeff[n_ + i] = ydiff;
      seg_.coeff[2 * n_ + i] = bspl;
      seg_.coeff[3 * n_ + i] = ydiff - h * k7_[i] - bspl;
      seg_.coeff[4 * n_ + i] =
          h * (d1 * k1_[i] + d3 * k3_[i] + d4 * k4_[i] + d5 * k5_[i] + d6 * k6_[i] + d7 * k7_[i]);
    }
    t_ = t_new;
    y_.swap(y1_);
    k1_.swap(k7_);
    ++steps_;
    double nrm = norm(y_);
    if (!(nrm <= spec_.escape_norm))
      throw FlowError(ErrorCode::FiniteEscape, "finite escape: state norm exceeded threshold" + describe_state(t_, y_),
                      t_, y_);
  }

  const OdeRhs& rhs_;
  const IntegratorSpec& spec_;
  std::size_t n_;
  double t_ = 0.0;
  double h_ = 0.0;
  double facold_ = 1e-4;
  std::size_t steps_ = 0;
  std::size_t rejected_ = 0;
  Vec y_, y1_, ytmp_, err_, k1_, k2_, k3_, k4_, k5_, k6_, k7_;
  DenseSegment seg_;
};

struct EventRoot {
  double theta;
  Vec state;
};

// Locates g(seg(theta)) = level on [0, 1] given opposite signs at the ends.
EventRoot refine_event(const DenseSegment& seg, const EventSpec& ev, double f0, double f1, std::size_t n) {
  Vec x(n);
  auto f = [&](double th) {
    seg.eval_theta(th, x);
    return ev.g(x) - ev.level;
  };
  double a = 0.0, b = 1.0, fa = f0, fb = f1;
  double best = fb == 0.0 ? 1.0 : (std::abs(fa) < std::abs(fb) ? a : b);
  double fbest = best == 1.0 ? fb : fa;
  int side = 0;
  for (int it = 0; it < 300 && std::abs(fbest) > kEventTolerance && b - a > 1e-17; ++it) {
    // Illinois regula falsi, with bisection every few rounds as a safeguard.
    double c = (it % 4 == 3) ? 0.5 * (a + b) : (a * fb - b * fa) / (fb - fa);
    if (!(c > a && c < b)) c = 0.5 * (a + b);
    double fc = f(c);
    if (std::abs(fc) < std::abs(fbest)) {
      best = c;
      fbest = fc;
    }
    if (fc == 0.0) break;
    if ((fc < 0.0) == (fa < 0.0)) {
      a = c;
      fa = fc;
      if (side == -1) fb *= 0.5;
      side = -1;
    } else {
      b = c;
      fb = fc;
      if (side == 1) fa *= 0.5;
      side = 1;
    }
  }
  if (std::abs(fbest) > kEventTolerance) {
    std::ostringstream os;
    os << "event refinement stalled with |g - level| = " << std::abs(fbest);
    throw Error(ErrorCode::Tangential, os.str());
  }
  // Transversality: the sign of g - level must flip across the root.
  double delta = 1e-6;
  double fl = f(best - delta);
  double fr = f(best + delta);
  if (!(fl * fr < 0.0)) {
    std::ostringstream os;
    os << "tangential crossing of level " << ev.level << " at t=" << seg.t0 + best * seg.h;
    throw Error(ErrorCode::Tangential, os.str());
  }
  Vec state(n);
  seg.eval_theta(best, state);
  return {best, std::move(state)};
}

}  // namespace

void IntegratorSpec::validate() const {
  if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "tolerances must be positive");
  if (!(max_time > 0.0)) throw Error(ErrorCode::InvalidArgument, "max_time must be positive");
  if (max_step < 0.0) throw Error(ErrorCode::InvalidArgument, "max_step must be non-negative");
  if (max_steps == 0) throw Error(ErrorCode::InvalidArgument, "max_steps must be positive");
  if (!(escape_norm > 0.0)) throw Error(ErrorCode::InvalidArgument, "escape_norm must be positive");
}

void DenseSegment::eval_theta(double th, std::span<double> out) const {
  const std::size_t n = out.size();
  double th1 = 1.0 - th;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = coeff[i] +
             th * (coeff[n + i] + th1 * (coeff[2 * n + i] + th * (coeff[3 * n + i] + th1 * coeff[4 * n + i])));
  }
}

void DenseSegment::eval(double t, std::span<double> out) const { eval_theta((t - t0) / h, out); }

Vec Trajectory::at(double t) const {
  if (times.empty()) throw Error(ErrorCode::InvalidArgument, "empty trajectory");
  bool forward = times.size() < 2 || times.back() >= times.front();
  double lo = forward ? times.front() : times.back();
  double hi = forward ? times.back() : times.front();
  if (t < lo || t > hi) throw Error(ErrorCode::InvalidArgument, "time outside the trajectory");
  if (dense.empty()) {
    if (t == times.front()) return states.front();
    if (t == times.back()) return states.back();
    throw Error(ErrorCode::InvalidArgument, "trajectory has no dense output");
  }
  // Segment k spans times[k]..times[k+1].
  auto it = forward ? std::upper_bound(times.begin(), times.end(), t)
                    : std::upper_bound(times.begin(), times.end(), t, std::greater<double>());
  std::size_t k = static_cast<std::size_t>(std::distance(times.begin(), it));
  k = k == 0 ? 0 : k - 1;
  k = std::min(k, dense.size() - 1);
  Vec out(dim);
  dense[k].eval(t, out);
  return out;
}

std::string Trajectory::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "t";
  for (std::size_t i = 1; i <= dim; ++i) os << ",x" << i;
  os << "\n";
  for (std::size_t k = 0; k < times.size(); ++k) {
    os << times[k];
    for (double c : states[k]) os << "," << c;
    os << "\n";
  }
  return os.str();
}

std::string Trajectory::to_json() const {
  nlohmann::json j;
  j["dimension"] = dim;
  j["times"] = times;
  j["states"] = states;
  j["steps"] = steps;
  j["rejected"] = rejected;
  auto ev = nlohmann::json::array();
  for (const auto& e : events) ev.push_back({{"time", e.time}, {"state", e.state}, {"id", e.id}});
  j["events"] = ev;
  return j.dump();
}

Trajectory integrate_ode(const OdeRhs& rhs, std::span<const double> y0, double t_final, const IntegratorSpec& spec,
                         const std::vector<EventSpec>& events, bool record) {
  spec.validate();
  if (!(std::abs(t_final) <= spec.max_time))
    throw Error(ErrorCode::Precondition, "requested time exceeds max_time");
  const std::size_t n = y0.size();
  Trajectory traj;
  traj.dim = n;
  traj.times.push_back(0.0);
  traj.states.emplace_back(y0.begin(), y0.end());
  if (t_final == 0.0) return traj;

  Dopri5 stepper(rhs, y0, spec);
  std::vector<double> gprev(events.size());
  for (std::size_t e = 0; e < events.size(); ++e) gprev[e] = events[e].g(y0) - events[e].level;

  while (stepper.t() != t_final) {
    stepper.step(t_final);
    const DenseSegment& seg = stepper.segment();

    // Earliest event inside this step.
    std::size_t hit = events.size();
    double hit_theta = 2.0;
    EventRoot hit_root{};
    for (std::size_t e = 0; e < events.size(); ++e) {
      double gnew = events[e].g(stepper.y()) - events[e].level;
      bool crossed = (gprev[e] < 0.0 && gnew >= 0.0) || (gprev[e] > 0.0 && gnew <= 0.0);
      if (crossed) {
        EventRoot root = refine_event(seg, events[e], gprev[e], gnew, n);
        traj.events.push_back({seg.t0 + root.theta * seg.h, root.state, events[e].id});
        if (events[e].terminal && root.theta < hit_theta) {
          hit = e;
          hit_theta = root.theta;
          hit_root = root;
        }
      }
      gprev[e] = gnew;
    }

    traj.steps = stepper.steps();
    traj.rejected = stepper.rejected();
    if (hit < events.size()) {
      double t_hit = seg.t0 + hit_theta * seg.h;
      // Drop non-terminal events recorded past the terminal one.
      std::erase_if(traj.events, [&](const EventRecord& r) { return seg.h > 0 ? r.time > t_hit : r.time < t_hit; });
      if (record) {
        DenseSegment cut = seg;
        traj.dense.push_back(cut);
      } else {
        traj.times.clear();
        traj.states.clear();
        traj.dense.clear();
      }
      if (traj.times.empty() || t_hit != traj.times.back()) {
        traj.times.push_back(t_hit);
        traj.states.push_back(hit_root.state);
      }
      return traj;
    }
    if (record) {
      traj.times.push_back(stepper.t());
      traj.states.push_back(stepper.y());
      traj.dense.push_back(seg);
    }
  }
  if (!record) {
    traj.times.push_back(stepper.t());
    traj.states.push_back(stepper.y());
  }
  return traj;
}

Trajectory integrate(const Field& f, std::span<const double> x0, double t_final, const IntegratorSpec& spec) {
  if (x0.size() != f.dim) throw Error(ErrorCode::Dimension, "initial state dimension does not match the field");
  OdeRhs rhs = [&f](double, std::span<const double> y, std::span<double> dy) { f.eval(y, dy); };
  return integrate_ode(rhs, x0, t_final, spec);
}

Vec flow(const Field& f, std::span<const double> x0, double t, const IntegratorSpec& spec) {
  if (x0.size() != f.dim) throw Error(ErrorCode::Dimension, "initial state dimension does not match the field");
  OdeRhs rhs = [&f](double, std::span<const double> y, std::span<double> dy) { f.eval(y, dy); };
  Trajectory tr = integrate_ode(rhs, x0, t, spec, {}, false);
  return tr.final_state();
}

EventHit flow_to_event(const Field& f, std::span<const double> x0, const ScalarFn& g, double level, int direction,
                       const IntegratorSpec& spec) {
  if (x0.size() != f.dim) throw Error(ErrorCode::Dimension, "initial state dimension does not match the field");
  if (direction == 0) throw Error(ErrorCode::InvalidArgument, "direction must be +1 or -1");
  if (g(x0) == level) throw Error(ErrorCode::Precondition, "initial point already lies on the level set");
  OdeRhs rhs = [&f](double, std::span<const double> y, std::span<double> dy) { f.eval(y, dy); };
  std::vector<EventSpec> events{{g, level, 0, true}};
  double horizon = direction > 0 ? spec.max_time : -spec.max_time;
  Trajectory tr = integrate_ode(rhs, x0, horizon, spec, events, false);
  if (tr.events.empty()) {
    std::ostringstream os;
    os << "no crossing of level " << level << " within |t| <= " << spec.max_time;
    throw Error(ErrorCode::NoCrossing, os.str());
  }
  return {tr.events.front().time, tr.events.front().state};
}

Field normalized_gradient_field(const Potential& v) {
  Field f;
  f.dim = v.dim;
  f.eval = [v](std::span<const double> x, std::span<double> out) {
    v.gradient(x, out);
    double n2 = dot(out, out);
    if (!(std::sqrt(n2) >= kGradientFloor)) {
      std::ostringstream os;
      os.precision(17);
      os << "gradient-singularity: |grad V| < 1e-12 at (";
      for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
      os << ")";
      throw Error(ErrorCode::GradientSingular, os.str());
    }
    for (double& c : out) c /= n2;
  };
  return f;
}

Vec transport(const Potential& v, std::span<const double> x, double s, const IntegratorSpec& spec) {
  return flow(normalized_gradient_field(v), x, s, spec);
}

}  // namespace stabkit
