#pragma once

// Sampled evidence about global asymptotic stability. Sampling can refute
// GAS (a trajectory escapes, makes no progress, or settles elsewhere) but
// never prove it, so verdicts are supported, falsified or inconclusive.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "field.hpp"
#include "flow.hpp"
#include "lyapunov.hpp"

namespace stabkit {

enum class GasVerdict { Supported, Falsified, Inconclusive };
const char* gas_verdict_name(GasVerdict v);

enum class WitnessKind {
  Escape,              // integration blew up
  NoProgress,          // final distance not below the initial distance
  ForeignEquilibrium,  // settled on a different zero of F
  Stalled,             // still approaching after the horizon (not falsifying)
  Failed,              // integrator gave up for another reason (not falsifying)
};
const char* witness_kind_name(WitnessKind k);
bool witness_falsifies(WitnessKind k);

struct GasWitness {
  std::size_t index = 0;
  Vec start;
  Vec final_state;  // last state reached (escape point for Escape)
  double initial_dist = 0.0;
  double final_dist = 0.0;
  WitnessKind kind = WitnessKind::Stalled;
  std::string detail;
};

struct GasOptions {
  Vec box_lo, box_hi;  // empty: x_eq +- 5 in every coordinate
  std::size_t samples = 200;
  double horizon = 30.0;
  double tol = 1e-6;
  bool with_certificate = false;
  double massera_horizon = 10.0;
  CertificateOptions certificate;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  IntegratorSpec spec;
};

struct GasEvidence {
  std::size_t n_trajectories = 0;
  std::size_t converged = 0;
  double max_final_dist = 0.0;  // over trajectories that did not escape
  std::optional<Certificate> certificate;
  std::string certificate_error;
  std::vector<GasWitness> witnesses;  // every unconverged sample, by index
  GasVerdict verdict = GasVerdict::Inconclusive;
  std::string reason;
};

// Throws Error(Precondition) when |F(x_eq)| > 1e-9; every other failure is
// recorded as evidence.
GasEvidence check_gas(const Field& f, std::span<const double> x_eq, const GasOptions& opts);

// Re-integrates one witness; true when the same kind of failure recurs.
bool replay_gas_witness(const Field& f, std::span<const double> x_eq, const GasWitness& w, const GasOptions& opts);

// Parametric fields t -> H_t; each H_t is frozen (t does not evolve).
using FieldFamily = std::function<Field(double t)>;
using EquilibriumCurve = std::function<Vec(double t)>;

enum class AttractionVerdict { AttractingEvidence, NotAttracting };
const char* attraction_verdict_name(AttractionVerdict v);

struct FamilyWitness {
  std::size_t index = 0;
  double t = 0.0;
  Vec start;
  double horizon = 0.0;       // integration time used for this sample
  Vec limit;                  // state at the horizon
  Vec rest;                   // attracting zero of H_t the sample settled on
  double initial_dist = 0.0;  // distance of (t, start) to Z
  double final_dist = 0.0;    // distance of (t, limit) to Z
  bool escaped = false;
  std::string detail;
};

struct FamilyAttractionOptions {
  double t_lo = 0.0, t_hi = 1.0;
  double box = 0.3;          // half-width of the offsets from x_t
  double min_offset = 1e-5;  // offsets range log-uniformly over [min_offset, box]
  std::size_t samples = 200;
  // Per sample: max(horizon, rate_factor / |max Re eig of DH_t(x_t)|),
  // capped at 0.9 * spec.max_time.
  double horizon = 200.0;
  double rate_factor = 25.0;
  double tol = 1e-3;
  std::size_t curve_points = 2048;  // polyline resolution of Z
  std::uint64_t seed = 0;
  unsigned threads = 1;
  IntegratorSpec spec;
};

struct FamilyAttractionReport {
  std::vector<double> z_t;  // sampled curve Z
  std::vector<Vec> z_x;
  std::size_t samples = 0;
  std::size_t attracted = 0;
  std::size_t unresolved = 0;  // neither reached Z nor settled elsewhere
  std::vector<FamilyWitness> witnesses;  // failing samples, by index
  AttractionVerdict verdict = AttractionVerdict::AttractingEvidence;
};

// Distance from (t, x) to the polyline through the samples of Z in I x R^n.
double distance_to_curve(const std::vector<double>& z_t, const std::vector<Vec>& z_x, double t,
                         std::span<const double> x);

// Samples (t, x_t + d) with t uniform on [t_lo, t_hi], |d_i| log-uniform on
// [min_offset, box] and signs cycling through every orthant, then integrates
// the frozen H_t. A sample is a witness when it escapes, or when it ends next
// to an attracting zero of H_t (Newton from the end state, Hurwitz Jacobian)
// lying farther than tol from Z. Slow samples are counted as unresolved.
FamilyAttractionReport check_family_attraction(const FieldFamily& h, const EquilibriumCurve& z,
                                               const FamilyAttractionOptions& opts);

// Re-integrates a witness; true when it again ends farther than tol from Z.
bool replay_family_witness(const FieldFamily& h, const FamilyAttractionReport& report, const FamilyWitness& w,
                           const FamilyAttractionOptions& opts);

// Local check of a frozen member at its equilibrium x_t: the Jacobian is
// Hurwitz and check_gas passes on the box x_t +- |x_t|/2 (+- 0.5 when x_t = 0)
// over a horizon long enough for the slowest linear rate.
struct FrozenLocalCheck {
  double t = 0.0;
  Vec x_t;
  double max_real_eigenvalue = 0.0;
  bool hurwitz = false;
  GasEvidence gas;
  bool pass = false;
};

FrozenLocalCheck frozen_local_check(const FieldFamily& h, double t, std::span<const double> x_t, std::size_t samples = 50,
                                    std::uint64_t seed = 0, unsigned threads = 1);

}  // namespace stabkit
