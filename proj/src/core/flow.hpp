#pragma once

// Adaptive Dormand-Prince 5(4) integration with dense output and event
// location. Every flow map in the toolkit goes through here.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "field.hpp"

namespace stabkit {

struct IntegratorSpec {
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double max_step = 0.0;  // 0: unlimited
  double max_time = 1e4;
  std::size_t max_steps = 10'000'000;
  double escape_norm = 1e12;

  void validate() const;
};

using OdeRhs = std::function<void(double t, std::span<const double> y, std::span<double> dy)>;
using ScalarFn = std::function<double(std::span<const double>)>;

// Continuous extension of one accepted step: 4th-order Hermite-type
// interpolant in theta = (t - t0) / h.
struct DenseSegment {
  double t0 = 0.0;
  double h = 0.0;
  std::vector<double> coeff;  // 5 blocks of n

  void eval(double t, std::span<double> out) const;
  void eval_theta(double theta, std::span<double> out) const;
};

struct EventSpec {
  ScalarFn g;
  double level = 0.0;
  int id = 0;
  bool terminal = false;
};

struct EventRecord {
  double time = 0.0;
  Vec state;
  int id = 0;
};

// Times are strictly monotone in the direction of integration (increasing for
// forward flows, decreasing for backward ones).
struct Trajectory {
  std::size_t dim = 0;
  std::vector<double> times;
  std::vector<Vec> states;
  std::vector<DenseSegment> dense;
  std::vector<EventRecord> events;
  std::size_t steps = 0;
  std::size_t rejected = 0;

  double t_end() const { return times.back(); }
  const Vec& final_state() const { return states.back(); }
  // Dense evaluation anywhere inside the covered interval.
  Vec at(double t) const;

  std::string to_csv() const;
  std::string to_json() const;
};

struct EventHit {
  double time = 0.0;
  Vec state;
};

// Throws FlowError (FiniteEscape, StepsExhausted, StepUnderflow) and
// Error(Precondition) when |t_final| exceeds spec.max_time.
Trajectory integrate_ode(const OdeRhs& rhs, std::span<const double> y0, double t_final, const IntegratorSpec& spec,
                         const std::vector<EventSpec>& events = {}, bool record = true);

Trajectory integrate(const Field& f, std::span<const double> x0, double t_final, const IntegratorSpec& spec);

// Final state only; no dense output is retained.
Vec flow(const Field& f, std::span<const double> x0, double t, const IntegratorSpec& spec);

// First time at which g along the flow reaches `level`, searching forward
// (direction > 0) or backward (direction < 0) up to spec.max_time. The root
// is refined on the interpolant to |g - level| <= 1e-10. Throws
// Error(NoCrossing) and Error(Tangential).
EventHit flow_to_event(const Field& f, std::span<const double> x0, const ScalarFn& g, double level, int direction,
                       const IntegratorSpec& spec);

inline constexpr double kEventTolerance = 1e-10;
inline constexpr double kGradientFloor = 1e-12;

// x -> grad V / |grad V|^2. Along its flow V increases at unit rate.
// Throws Error(GradientSingular) where |grad V| < 1e-12.
Field normalized_gradient_field(const Potential& v);

// Moves x along the normalized gradient flow of v by s (so V changes by s).
Vec transport(const Potential& v, std::span<const double> x, double s, const IntegratorSpec& spec);

}  // namespace stabkit
