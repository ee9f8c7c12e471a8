#pragma once

// Explicit homotopies of vector fields and potentials, smooth concatenation,
// and sampled admissibility checks along a path.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "field.hpp"
#include "flow.hpp"
#include "lyapunov.hpp"

namespace stabkit {

enum class HomotopyKind {
  StraightLine,
  ToGradient,
  CompleteRescale,
  Sontag,
  Alexander,
  Continuation,
  Translate,
  AppendixMorse,
  AppendixHyp,
  HurwitzLine,
  PdsLine,
  Concat,
};

const char* homotopy_kind_name(HomotopyKind k);

using FamilyVecFn = std::function<void(double, std::span<const double>, std::span<double>)>;
using FamilyScalarFn = std::function<double(double, std::span<const double>)>;

// A one-parameter family t in [0, 1] of vector fields (vector() set) or of
// potentials (scalar() set), together with the endpoints it claims to join.
struct HomotopyFamily {
  HomotopyKind kind = HomotopyKind::StraightLine;
  std::size_t dim = 0;
  FamilyVecFn vec;
  FamilyScalarFn scalar;
  VecFn start, end;
  ScalarFn start_scalar, end_scalar;
  std::string description;

  bool is_scalar() const { return static_cast<bool>(scalar); }
  Vec operator()(double t, std::span<const double> x) const;
  double value(double t, std::span<const double> x) const;
  // The frozen field x -> H_t(x). Only for vector families.
  Field at(double t) const;
};

// Flat on [0, 1/3] and [2/3, 1], smooth and monotone in between.
double smooth_step(double t);

HomotopyFamily constant_family(const Field& f);
HomotopyFamily straight_line(const Field& from, const Field& to);

// gamma_t = A at psi(2t) for t <= 1/2, B at psi(2t - 1) after. Throws
// Error(EndpointMismatch) if A(1, .) and B(0, .) differ by more than 1e-9
// (relative) on a fixed probe set.
HomotopyFamily concat_smooth(const HomotopyFamily& a, const HomotopyFamily& b);

// x -> F(x) / (1 + t phi |F(x)|^2)
Field complete_rescale(const Field& f, double t, double phi);
HomotopyFamily complete_rescale_family(const Field& f, double phi);

// -t grad Y + (1 - t) F
Field to_gradient(const Field& f, const LyapunovFn& y, double t);
HomotopyFamily to_gradient_family(const Field& f, const LyapunovFn& y);

struct HalvingData {
  double tau = 0.0;  // first time with |phi_tau(x)| = |x| / 2
  Vec endpoint;      // D(x) = (phi_tau(x) - x) / tau
};

// Throws Error(InvalidArgument) at x = 0 and Error(NoCrossing) when the norm
// never halves within spec.max_time.
HalvingData sontag_halving(const Field& f, std::span<const double> x, const IntegratorSpec& spec);
Vec sontag_nullhomotopy(const Field& f, double t, std::span<const double> x, const IntegratorSpec& spec);
HomotopyFamily sontag_family(const Field& f, const IntegratorSpec& spec);

// alpha_t(x) = J(phi^{(t-1) V(x)}(x)) / t along the normalized gradient flow
// of V; alpha_0 = V.
double alexander_homotopy(const Potential& v, const Potential& j, double t, std::span<const double> x,
                          const IntegratorSpec& spec);
HomotopyFamily alexander_family(const Potential& v, const Potential& j, const IntegratorSpec& spec);

struct AdmissibilityOptions {
  double r_in = 0.1;
  double r_out = 5.0;
  std::size_t t_points = 21;
  std::size_t samples = 1000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  Vec center;  // empty: origin
  double margin_floor = 1e-9;
  std::size_t witnesses_per_t = 3;
};

struct AdmissibilityFailure {
  double t = 0.0;
  Vec x;
  std::string reason;
};

struct AdmissibilityReport {
  std::vector<double> t_grid;
  std::vector<double> zero_gap;
  std::vector<double> decrease_margin;  // empty when no reference was given
  bool checked_decrease = false;
  bool pass = false;
  std::vector<AdmissibilityFailure> failures;
};

// Samples are shared by all grid times. For scalar families the zero gap is
// taken on a centered-difference gradient in x.
AdmissibilityReport check_admissibility(const HomotopyFamily& h, const AdmissibilityOptions& opts,
                                        const LyapunovFn* v_ref = nullptr);

struct EndpointCheck {
  double start_error = 0.0;  // max |H_0(x) - start(x)| / (1 + |x|)
  double end_error = 0.0;
};
EndpointCheck verify_endpoints(const HomotopyFamily& h, std::size_t samples = 200, std::uint64_t seed = 0,
                               double r_in = 0.1, double r_out = 3.0);

struct ContinuationResult {
  HomotopyFamily family;
  AdmissibilityReport stage[3];
  bool pass = false;
};

// Three stages joined by concat_smooth: F to -grad V_F, the gradient bridge
// -grad((1 - s) V_F + s V_G), then -grad V_G to G. The outer stages are
// checked for decrease against V_F and V_G; the bridge only for zeros.
ContinuationResult continuation_homotopy(const Field& f, const Field& g, const LyapunovFn& vf, const LyapunovFn& vg,
                                         const AdmissibilityOptions& opts);

// f(x + (x_* - y) t), where x_* is the equilibrium (fields) or minimum
// (potentials) found by Newton from `guess`.
Field translate_retraction(const Field& f, std::span<const double> y, double t, std::span<const double> guess);
Potential translate_retraction(const Potential& v, std::span<const double> y, double t,
                               std::span<const double> guess);
HomotopyFamily translate_family(const Field& f, std::span<const double> y, std::span<const double> guess);
HomotopyFamily translate_family(const Potential& v, std::span<const double> y, std::span<const double> guess);

// V((1 - t) x) / (1 - t)^2, and its t = 1 limit x^T (D^2 V(0) / 2) x. Times
// t >= 1 - 1e-6 use the limit. Needs the Hessian.
Potential appendix_morse(const Potential& v, double t);
HomotopyFamily appendix_morse_family(const Potential& v);
// F((1 - t) x) / (1 - t), and its t = 1 limit DF(0) x. Needs the Jacobian.
Field appendix_hyp(const Field& f, double t);
HomotopyFamily appendix_hyp_family(const Field& f);

enum class MatrixClass { Hurwitz, Pds };

bool is_hurwitz(const Eigen::MatrixXd& a);
bool is_pds(const Eigen::MatrixXd& a);
// Hurwitz: (1 - t) A - t I. Pds: (1 - t) A + t I. Throws Error(Precondition)
// when A is not in the class.
Eigen::MatrixXd matrix_contraction(const Eigen::MatrixXd& a, double t, MatrixClass cls);
// Vector family x -> M_t x (Hurwitz) or potential family x^T M_t x (Pds).
HomotopyFamily matrix_family(const Eigen::MatrixXd& a, MatrixClass cls);

}  // namespace stabkit
