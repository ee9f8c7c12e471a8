#pragma once

// Coordinate changes that straighten a stable flow.
//
// With L = {V = level} crossed once by every ray from x_eq, each x != x_eq
// has a flow time tau(x) to L (negative inside) and a landing point rho(x).
// Then h(x) = e^tau(x) * project(rho(x)) satisfies h(phi_t(x)) = e^-t h(x).
// For a potential, transporting x to L along the normalized gradient flow
// gives h(x) = project(landing point) * sqrt(V(x)) with V = |h|^2.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "field.hpp"
#include "flow.hpp"
#include "lyapunov.hpp"

namespace stabkit {

struct StarCheck {
  bool pass = false;
  std::size_t rays = 0;
  std::size_t failed_rays = 0;
  Vec witness;  // direction of the first failing ray
  std::string detail;
};

struct StarCheckOptions {
  std::size_t rays = 500;
  std::uint64_t seed = 0;
  std::size_t grid = 128;     // radial scan points after bracketing
  double max_radius = 1e6;    // rays that never reach the level fail
  unsigned threads = 1;
};

class LevelSetChart {
 public:
  // Runs the star-shapedness test eagerly; inspect star() for the outcome.
  static LevelSetChart build(LyapunovFn v, double level = 1.0, const StarCheckOptions& opts = {});

  const LyapunovFn& lyapunov() const { return v_; }
  double level() const { return level_; }
  const Vec& equilibrium() const { return v_.equilibrium(); }
  const StarCheck& star() const { return star_; }
  std::size_t dim() const { return v_.dim(); }

  // u -> (u - x_eq) / |u - x_eq|
  Vec project(std::span<const double> u) const;
  // Throws Error(Precondition) when the ray test failed.
  void require_star() const;

 private:
  LyapunovFn v_;
  double level_ = 1.0;
  StarCheck star_;
};

struct TauRho {
  double tau = 0.0;
  Vec rho;
};

// Signed flow time to L and the landing point. Throws Error(InvalidArgument)
// at x_eq, and the event errors of flow_to_event.
TauRho tau_rho(const Field& f, const LevelSetChart& chart, std::span<const double> x, const IntegratorSpec& spec);

Vec hartman_grobman(const Field& f, const LevelSetChart& chart, std::span<const double> x, const IntegratorSpec& spec);

// Needs V(x_eq) = 0 at the chart's equilibrium (the minimum).
Vec morse_transform(const Potential& v, const LevelSetChart& chart, std::span<const double> x,
                    const IntegratorSpec& spec);

enum class ConjugacyKind { HartmanGrobman, Morse };

struct ConjugacyMap {
  ConjugacyKind kind = ConjugacyKind::HartmanGrobman;
  std::size_t dim = 0;
  Vec center;
  std::function<Vec(std::span<const double>)> eval;

  Vec operator()(std::span<const double> x) const { return eval(x); }
};

ConjugacyMap make_hartman_grobman(const Field& f, const LevelSetChart& chart, const IntegratorSpec& spec = {});
ConjugacyMap make_morse(const Potential& v, const LevelSetChart& chart, const IntegratorSpec& spec = {});

struct ResidualOptions {
  std::size_t samples = 500;
  std::vector<double> t_set{0.5, 1.0, 2.0};
  double r_in = 0.1;
  double r_out = 5.0;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  IntegratorSpec spec;
};

struct ResidualStats {
  double max = 0.0;
  double mean = 0.0;
  std::size_t count = 0;
  Vec worst_x;
  double worst_t = 0.0;
  std::vector<std::string> errors;  // samples that could not be evaluated
};

// max / mean of |h(phi_t(x)) - e^-t h(x)| / (1e-12 + |h(x)|)
ResidualStats verify_conjugacy(const Field& f, const ConjugacyMap& h, const ResidualOptions& opts);
// max / mean of |V(x) - |h(x)|^2| / (1 + |V(x)|); t_set is ignored
ResidualStats verify_squared_norm(const Potential& v, const ConjugacyMap& h, const ResidualOptions& opts);

}  // namespace stabkit
