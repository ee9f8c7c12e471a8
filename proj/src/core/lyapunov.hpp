#pragma once

// Converse Lyapunov construction and sampled certification.
//
// The Massera-type function
//     V(x) = int_0^T |phi_s(x) - x_eq|^2 ds
// is evaluated by integrating the deviation z = phi_s(x) - x_eq together with
// the running integral;
// its gradient comes from the variational equation M' = DF(phi_s(x)) M,
//     grad V(x) = int_0^T 2 M(s)^T (phi_s(x) - x_eq) ds.
// Along trajectories it satisfies exactly
//     <grad V(x), F(x)> = |phi_T(x) - x_eq|^2 - |x - x_eq|^2.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "field.hpp"
#include "flow.hpp"

namespace stabkit {

enum class LyapunovKind { Explicit, Massera };

class LyapunovFn {
 public:
  static LyapunovFn from_potential(Potential v, Vec equilibrium);
  // Throws Error(Precondition) unless |F(x_eq)| <= 1e-9 and T > 0, or when F
  // has no Jacobian.
  static LyapunovFn massera(Field f, Vec equilibrium, double horizon, IntegratorSpec spec = {});

  LyapunovKind kind() const { return kind_; }
  std::size_t dim() const { return equilibrium_.size(); }
  const Vec& equilibrium() const { return equilibrium_; }
  double horizon() const { return horizon_; }

  double value(std::span<const double> x) const;
  // (V(x), grad V(x)). Massera evaluation throws FlowError(FiniteEscape) when
  // the trajectory escapes within the horizon.
  std::pair<double, Vec> eval(std::span<const double> x) const;

  Potential as_potential() const;

 private:
  LyapunovKind kind_ = LyapunovKind::Explicit;
  Vec equilibrium_;
  double horizon_ = 0.0;
  double offset_ = 0.0;
  std::shared_ptr<const Potential> potential_;
  std::shared_ptr<const Field> field_;
  IntegratorSpec spec_;
};

struct CertificateOptions {
  double r_in = 0.1;
  double r_out = 5.0;
  std::size_t samples = 10000;
  std::size_t sphere_samples = 0;  // 0: min(samples, 512)
  std::uint64_t seed = 0;
  unsigned threads = 1;
  // Margins at or below this floor count as non-decrease; it absorbs rounding
  // noise for fields whose orbital derivative vanishes identically.
  double margin_floor = 1e-9;
};

struct SampleFailure {
  Vec point;
  std::string reason;
};

struct Certificate {
  double decrease_margin = 0.0;
  double properness_proxy = 0.0;
  Vec worst_point;
  std::size_t samples = 0;
  double r_in = 0.0;
  double r_out = 0.0;
  double margin_floor = 0.0;
  bool pass = false;
  std::vector<SampleFailure> failures;
};

// Cosine-of-angle decrease margin -<grad V, F> / (|grad V| |F|) at x; zero
// where F vanishes. Throws Error(GradientSingular) where |grad V| < 1e-12.
double decrease_ratio(std::span<const double> grad, std::span<const double> f, std::span<const double> x);

Certificate verify_certificate(const LyapunovFn& v, const Field& f, const CertificateOptions& opts);

struct NewtonOptions {
  std::size_t max_iterations = 100;
  double tolerance = 1e-10;
};

// Damped Newton on F with a halving line search on |F|^2. Converged means
// |F| <= tolerance and either the Newton step is below tolerance * (1 + |x|)
// or no further decrease is possible. Throws
// Error(NonConvergence), including when the Jacobian is singular at an
// iterate.
Vec find_equilibrium(const Field& f, std::span<const double> guess, const NewtonOptions& opts = {});

// Newton on grad V (for potentials) using the Hessian.
Vec find_minimum(const Potential& v, std::span<const double> guess, const NewtonOptions& opts = {});

}  // namespace stabkit
