#include <doctest.h>

#include <cmath>
#include <random>

#include "conjugacy.hpp"
#include "error.hpp"
#include "sampling.hpp"

using namespace stabkit;

namespace {

Field field(const std::vector<std::string>& src) { return make_field(VectorExpr::parse(src, src.size())); }
Potential potential(const std::string& src, std::size_t n) { return make_potential(ScalarExpr::parse(src, n)); }
LevelSetChart chart_of(const std::string& src, std::size_t n) {
  return LevelSetChart::build(LyapunovFn::from_potential(potential(src, n), Vec(n, 0.0)));
}

ErrorCode error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Ok;
}

}  // namespace

TEST_CASE("star-shapedness ray test") {
  CHECK(chart_of("x1^2 + x2^2", 2).star().pass);
  CHECK(chart_of("x1^2 + x2^4", 2).star().pass);
  CHECK(chart_of("(x1^2 + x2^2)^2 + x1^2", 2).star().pass);
  CHECK(chart_of("x1^2 + x2^2 + x3^2", 3).star().rays == 500);

  // rises above 1 near |x| = 1, then falls back below: two crossings per ray
  auto bump = chart_of("3*x1^2 / (1 + x1^4)", 1);
  CHECK_FALSE(bump.star().pass);
  CHECK(bump.star().detail.find("crosses") != std::string::npos);
  // bounded below the level: rays never cross
  auto sat = chart_of("x1^2 / (1 + x1^2)", 1);
  CHECK_FALSE(sat.star().pass);

  auto lin = field({"-x1"});
  CHECK(error_of([&] { tau_rho(lin, bump, Vec{2.0}, {}); }) == ErrorCode::Precondition);
}

TEST_CASE("tau_rho examples") {
  IntegratorSpec spec;
  auto chart = chart_of("x1^2 + x2^2", 2);
  auto lin = field({"-x1", "-x2"});
  TauRho out = tau_rho(lin, chart, Vec{2.0, 0.0}, spec);
  CHECK(std::abs(out.tau - std::log(2.0)) <= 1e-8);
  CHECK(std::abs(out.rho[0] - 1.0) <= 1e-8);
  CHECK(std::abs(out.rho[1]) <= 1e-12);
  TauRho in = tau_rho(lin, chart, Vec{0.5, 0.0}, spec);
  CHECK(std::abs(in.tau - std::log(0.5)) <= 1e-8);
  CHECK(std::abs(in.rho[0] - 1.0) <= 1e-8);

  auto c1 = chart_of("x1^2", 1);
  TauRho cu = tau_rho(field({"-x1^3"}), c1, Vec{2.0}, spec);
  CHECK(std::abs(cu.tau - 0.375) <= 1e-7);
  CHECK(std::abs(cu.rho[0] - 1.0) <= 1e-9);

  CHECK(error_of([&] { tau_rho(lin, chart, Vec{0.0, 0.0}, spec); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("hartman_grobman examples") {
  IntegratorSpec spec;
  auto chart = chart_of("x1^2 + x2^2", 2);
  auto lin = field({"-x1", "-x2"});
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> u(-4, 4);
  for (int k = 0; k < 50; ++k) {
    Vec x{u(rng), u(rng)};
    Vec h = hartman_grobman(lin, chart, x, spec);
    CHECK(dist(h, x) <= 1e-7 * (1 + norm(x)));
  }
  auto c1 = chart_of("x1^2", 1);
  CHECK(std::abs(hartman_grobman(field({"-x1^3"}), c1, Vec{2.0}, spec)[0] - std::exp(0.375)) <= 1e-5);
  CHECK(hartman_grobman(lin, chart, Vec{0.0, 0.0}, spec) == Vec{0.0, 0.0});

  // phi_t(x) = e^-t R(5t) x, so tau = ln r and h(x) = r R(5 ln r) x / r
  auto rot = field({"-x1 - 5*x2", "5*x1 - x2"});
  for (int k = 0; k < 50; ++k) {
    Vec x{u(rng), u(rng)};
    double a = 5.0 * std::log(norm(x));
    Vec expected{std::cos(a) * x[0] - std::sin(a) * x[1], std::sin(a) * x[0] + std::cos(a) * x[1]};
    CHECK(dist(hartman_grobman(rot, chart, x, spec), expected) <= 1e-6 * (1 + norm(x)));
  }
}

TEST_CASE("morse_transform examples") {
  IntegratorSpec spec;
  auto sq = potential("x1^2 + x2^2", 2);
  auto chart = chart_of("x1^2 + x2^2", 2);
  std::mt19937_64 rng(52);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int k = 0; k < 50; ++k) {
    Vec x{u(rng), u(rng)};
    CHECK(dist(morse_transform(sq, chart, x, spec), x) <= 1e-7 * (1 + norm(x)));
  }
  auto q = potential("x1^2 + x1^4", 1);
  auto cq = chart_of("x1^2 + x1^4", 1);
  CHECK(std::abs(morse_transform(q, cq, Vec{1.0}, spec)[0] - std::sqrt(2.0)) <= 1e-6);
  CHECK(std::abs(morse_transform(q, cq, Vec{-0.3}, spec)[0] + std::sqrt(0.09 + 0.0081)) <= 1e-6);
  CHECK(morse_transform(q, cq, Vec{0.0}, spec)[0] == 0.0);
}

TEST_CASE("verify_conjugacy examples") {
  ResidualOptions opts;
  opts.samples = 200;
  opts.r_in = 0.1;
  opts.r_out = 5.0;
  auto lin = field({"-x1", "-x2"});
  auto chart = chart_of("x1^2 + x2^2", 2);
  ConjugacyMap h = make_hartman_grobman(lin, chart);
  ResidualStats s = verify_conjugacy(lin, h, opts);
  CHECK(s.errors.empty());
  CHECK(s.count == 600);
  CHECK(s.max <= 1e-6);

  ConjugacyMap bad = h;
  bad.eval = [h](std::span<const double> x) {
    Vec v = h(x);
    for (double& c : v) c += 0.1;
    return v;
  };
  CHECK(verify_conjugacy(lin, bad, opts).max >= 0.05);

  opts.samples = 500;
  auto cubic = field({"-x1^3"});
  ResidualStats c = verify_conjugacy(cubic, make_hartman_grobman(cubic, chart_of("x1^2", 1)), opts);
  CHECK(c.errors.empty());
  CHECK(c.max <= 1e-4);
}

TEST_CASE("verify_squared_norm examples") {
  ResidualOptions opts;
  opts.samples = 500;
  opts.r_in = 0.1;
  opts.r_out = 3.0;
  auto sq = potential("x1^2 + x2^2", 2);
  ResidualStats s = verify_squared_norm(sq, make_morse(sq, chart_of("x1^2 + x2^2", 2)), opts);
  CHECK(s.max <= 1e-10);

  auto q = potential("x1^2 + x1^4", 1);
  ConjugacyMap h = make_morse(q, chart_of("x1^2 + x1^4", 1));
  ResidualStats r = verify_squared_norm(q, h, opts);
  CHECK(r.errors.empty());
  CHECK(r.max <= 1e-6);

  ConjugacyMap scaled = h;
  scaled.eval = [h](std::span<const double> x) {
    Vec v = h(x);
    for (double& c : v) c *= 1.01;
    return v;
  };
  // |V - 1.0201 V| / (1 + V) approaches 0.0201 for large V
  ResidualStats d = verify_squared_norm(q, scaled, opts);
  CHECK(d.max > 0.015);
  CHECK(d.max < 0.0202);
}

TEST_CASE("cocycle identities for tau and rho") {
  IntegratorSpec spec;
  std::mt19937_64 rng(53);
  std::uniform_real_distribution<double> ut(0.0, 2.0);
  auto chart = chart_of("x1^2 + x2^2", 2);
  for (auto srcs : std::vector<std::vector<std::string>>{
           {"-x1 - 5*x2", "5*x1 - x2"}, {"-x1^3", "-x2"}, {"-x1 + x2", "-x1 - x2^3"}}) {
    auto f = field(srcs);
    for (int k = 0; k < 40; ++k) {
      auto r = sample_rng(53, 9, static_cast<std::uint64_t>(k));
      Vec x = sample_annulus(r, Vec{0.0, 0.0}, 0.3, 3.0);
      double t = ut(rng);
      TauRho a = tau_rho(f, chart, x, spec);
      TauRho b = tau_rho(f, chart, flow(f, x, t, spec), spec);
      CHECK_MESSAGE(std::abs(b.tau - (a.tau - t)) <= 1e-5, srcs[0]);
      CHECK_MESSAGE(dist(b.rho, a.rho) <= 1e-5, srcs[0]);
    }
  }
}

TEST_CASE("linearization is continuous across the level set") {
  IntegratorSpec spec;
  auto round = chart_of("x1^2 + x2^2", 2);
  for (auto srcs : std::vector<std::vector<std::string>>{{"-x1 - 5*x2", "5*x1 - x2"}, {"-x1^3", "-x2"}}) {
    auto f = field(srcs);
    for (int k = 0; k < 40; ++k) {
      auto r = sample_rng(55, 9, static_cast<std::uint64_t>(k));
      Vec d = sample_direction(r, 2);
      // a pair 1e-4 apart straddling L
      Vec in{(1 - 5e-5) * d[0], (1 - 5e-5) * d[1]};
      Vec out{(1 + 5e-5) * d[0], (1 + 5e-5) * d[1]};
      CHECK(dist(hartman_grobman(f, round, in, spec), hartman_grobman(f, round, out, spec)) <= 1e-3);
    }
  }

  // An elongated chart: the change across L must match the change over an
  // equally long step that stays on one side, so L introduces no jump.
  auto chart = chart_of("x1^2 + 2*x2^2", 2);
  // <grad V, F> = -2 x1^2 - 4 x2^4, so V decreases along every trajectory
  auto f = field({"-x1 + 2*x2", "-x1 - x2^3"});
  for (int k = 0; k < 40; ++k) {
    auto r = sample_rng(54, 9, static_cast<std::uint64_t>(k));
    Vec d = sample_direction(r, 2);
    // the level point on this ray: r^2 (d1^2 + 2 d2^2) = 1
    double rad = 1.0 / std::sqrt(d[0] * d[0] + 2 * d[1] * d[1]);
    auto at = [&](double rr) { return hartman_grobman(f, chart, Vec{rr * d[0], rr * d[1]}, spec); };
    double across = dist(at(rad - 1e-4), at(rad + 1e-4));
    double inside = dist(at(rad - 3e-4), at(rad - 1e-4));
    CHECK(std::abs(across - inside) <= 0.05 * inside + 1e-8);
  }
}
