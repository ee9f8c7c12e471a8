// Acceptance suite: one PASS/FAIL line per criterion, each with a wall-clock
// budget. Exits non-zero when any criterion fails.

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "conjugacy.hpp"
#include "degree.hpp"
#include "error.hpp"
#include "expr.hpp"
#include "field.hpp"
#include "flow.hpp"
#include "homotopy.hpp"
#include "lyapunov.hpp"
#include "sampling.hpp"
#include "stabkit/stabkit.h"
#include "stability.hpp"

using namespace stabkit;

namespace {

struct Outcome {
  bool ok = true;
  std::ostringstream detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      if (ok) detail << "failed: ";
      else detail << "; ";
      detail << what;
      ok = false;
    }
  }
};

struct FieldCase {
  std::string name;
  std::vector<std::string> src;
};

Field field(const std::vector<std::string>& src) { return make_field(VectorExpr::parse(src, src.size())); }
Potential potential(const std::string& src, std::size_t n) { return make_potential(ScalarExpr::parse(src, n)); }

const std::vector<FieldCase> kGasCorpus = {
    {"-x (n=1)", {"-x1"}},
    {"-x (n=2)", {"-x1", "-x2"}},
    {"-x (n=3)", {"-x1", "-x2", "-x3"}},
    {"focus", {"-x1 - 5*x2", "5*x1 - x2"}},
    {"-x^3 (n=1)", {"-x1^3"}},
    {"(-x1^3, -x2)", {"-x1^3", "-x2"}},
};

struct PotentialCase {
  std::string src;
  std::size_t n;
};

const std::vector<PotentialCase> kPotentialCorpus = {
    {"x1^2", 1},
    {"x1^2 + x2^2", 2},
    {"x1^2 + x2^2 + x3^2", 3},
    {"x1^2 + x1^4", 1},
    {"x1^2 + x2^4", 2},
    {"(x1^2 + x2^2)^2 + x1^2", 2},
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

Vec origin(std::size_t n) { return Vec(n, 0.0); }

// ---------------------------------------------------------------------------

void conjugacy_suite(Outcome& o) {
  double worst = 0.0;
  for (const auto& c : kGasCorpus) {
    Field f = field(c.src);
    std::size_t n = c.src.size();
    std::string quad;
    for (std::size_t i = 1; i <= n; ++i) quad += (i > 1 ? " + x" : "x") + std::to_string(i) + "^2";
    LevelSetChart chart = LevelSetChart::build(LyapunovFn::from_potential(potential(quad, n), origin(n)));
    o.require(chart.star().pass, c.name + ": star test");
    ResidualOptions ro;
    ro.samples = 500;
    ro.t_set = {0.5, 1.0, 2.0};
    ro.r_in = 0.1;
    ro.r_out = 5.0;
    ResidualStats s = verify_conjugacy(f, make_hartman_grobman(f, chart), ro);
    o.require(s.errors.empty(), c.name + ": " + std::to_string(s.errors.size()) + " samples failed to evaluate");
    o.require(s.count == 1500, c.name + ": expected 1500 residuals");
    o.require(s.max <= 1e-4, c.name + ": residual " + sci(s.max));
    worst = std::max(worst, s.max);
  }
  o.detail << (o.ok ? "" : "; ") << "max relative residual " << sci(worst) << " over " << kGasCorpus.size()
           << " fields (limit 1e-04)";
}

void morse_suite(Outcome& o) {
  double worst = 0.0;
  for (const auto& c : kPotentialCorpus) {
    Potential v = potential(c.src, c.n);
    LevelSetChart chart = LevelSetChart::build(LyapunovFn::from_potential(v, origin(c.n)));
    o.require(chart.star().pass, c.src + ": star test");
    ResidualOptions ro;
    ro.samples = 500;
    ro.r_in = 0.1;
    ro.r_out = 3.0;
    ResidualStats s = verify_squared_norm(v, make_morse(v, chart), ro);
    o.require(s.errors.empty(), c.src + ": evaluation errors");
    o.require(s.max <= 1e-6, c.src + ": residual " + sci(s.max));
    worst = std::max(worst, s.max);
  }
  o.detail << (o.ok ? "" : "; ") << "max |V - |h|^2| / (1 + V) " << sci(worst) << " over " << kPotentialCorpus.size()
           << " potentials (limit 1e-06), all ray tests pass";
}

void degree_suite(Outcome& o) {
  for (std::size_t n = 1; n <= 3; ++n) {
    std::vector<std::string> id, neg;
    for (std::size_t i = 1; i <= n; ++i) {
      id.push_back("x" + std::to_string(i));
      neg.push_back("-x" + std::to_string(i));
    }
    long d_id = brouwer_degree(field(id), origin(n), 1.0).value;
    long d_neg = brouwer_degree(field(neg), origin(n), 1.0).value;
    long expected = (n % 2 == 0) ? 1 : -1;
    o.require(d_id == 1, "deg(id) in n=" + std::to_string(n) + " is " + std::to_string(d_id));
    o.require(d_neg == expected, "deg(-x) in n=" + std::to_string(n) + " is " + std::to_string(d_neg));
  }

  // complex arithmetic gives the families independently of the expression layer
  auto as_vec = [](std::complex<double> z) { return Vec{z.real(), z.imag()}; };
  auto unit = [](double th) { return std::polar(1.0, th); };
  CircleProbe probe = [&](double th) { return as_vec(unit(th)); };
  auto cz = [](std::span<const double> z) { return std::complex<double>(z[0], z[1]); };

  CircleFamily rot = [&](double th, std::span<const double> z) { return as_vec(unit(th) * cz(z)); };
  CircleFamily constant = [&](double, std::span<const double> z) { return as_vec(-cz(z)); };
  CircleFamily twisted = [&](double th, std::span<const double> z) { return as_vec(unit(th) * -cz(z)); };

  ObstructionResult r1 = family_obstruction_s1(rot, probe);
  ObstructionResult r2 = family_obstruction_s1(constant, probe);
  ObstructionResult r3 = family_obstruction_s1(twisted, probe);
  o.require(r1.winding.value == 2 && r1.obstructed, "theta z family");
  o.require(r2.winding.value == 1 && !r2.obstructed, "constant -z family");
  o.require(r3.winding.value == 2 && r3.obstructed, "e^{i theta}(-z) family");
  o.require(r1.reference == 1, "reference winding");

  std::vector<std::array<double, 2>> loop;
  for (int k = 0; k <= 256; ++k) {
    double th = 2.0 * std::numbers::pi * k / 256.0;
    loop.push_back({std::cos(2 * th), std::sin(2 * th)});
  }
  loop.back() = loop.front();
  o.require(winding_number(loop).value == 2, "winding of theta -> theta^2");

  o.detail << (o.ok ? "" : "; ")
           << "deg(id) = 1 and deg(-x) = (-1)^n for n = 1..3; windings 2 / 1 / 2 with verdicts OBSTRUCTED / "
              "NOT-OBSTRUCTED / OBSTRUCTED";
}

void nullhomotopy_suite(Outcome& o) {
  IntegratorSpec spec;
  double min_gap = INFINITY, end_err = 0.0;
  for (const FieldCase& c : {FieldCase{"-x (n=2)", {"-x1", "-x2"}}, FieldCase{"-x^3 (n=1)", {"-x1^3"}}}) {
    Field f = field(c.src);
    std::size_t n = c.src.size();
    HomotopyFamily h = sontag_family(f, spec);
    AdmissibilityOptions ao;
    ao.r_in = 0.1;
    ao.r_out = 5.0;
    ao.t_points = 21;
    ao.samples = 1000;
    AdmissibilityReport r = check_admissibility(h, ao);
    o.require(r.zero_gap.size() == 21, c.name + ": grid size");
    o.require(r.pass, c.name + ": admissibility failed");
    for (double g : r.zero_gap) {
      o.require(g > 0.0, c.name + ": zero gap " + sci(g));
      min_gap = std::min(min_gap, g);
    }
    // endpoints against F and -x directly
    for (std::uint64_t k = 0; k < 200; ++k) {
      auto rng = sample_rng(17, kStreamProperty, k);
      Vec x = sample_annulus(rng, origin(n), 0.1, 5.0);
      Vec h0 = h(0.0, x), h1 = h(1.0, x), fx = f(x);
      for (std::size_t i = 0; i < n; ++i) {
        end_err = std::max(end_err, std::abs(h0[i] - fx[i]));
        end_err = std::max(end_err, std::abs(h1[i] + x[i]));
      }
    }
  }
  o.require(end_err <= 1e-6, "endpoint error " + sci(end_err));
  o.detail << (o.ok ? "" : "; ") << "min zero gap " << sci(min_gap) << " over 21 x 1000 samples per field; endpoint error "
           << sci(end_err) << " (limit 1e-06)";
}

void massera_suite(Outcome& o) {
  IntegratorSpec spec;
  const double horizon = 10.0;
  double worst_identity = 0.0, min_margin = INFINITY;
  std::vector<FieldCase> corpus = kGasCorpus;
  corpus.push_back({"center", {"x2", "-x1"}});
  corpus.push_back({"+x", {"x1", "x2"}});
  for (const auto& c : corpus) {
    Field f = field(c.src);
    std::size_t n = c.src.size();
    LyapunovFn v = LyapunovFn::massera(f, origin(n), horizon);
    for (std::uint64_t k = 0; k < 100; ++k) {
      auto rng = sample_rng(23, kStreamProperty, k);
      Vec x = sample_annulus(rng, origin(n), 0.1, 3.0);
      auto [val, grad] = v.eval(x);
      Vec end = flow(f, x, horizon, spec);
      double expected = dot(end, end) - dot(x, x);
      double res = std::abs(dot(grad, f(x)) - expected) / (1.0 + std::abs(expected));
      worst_identity = std::max(worst_identity, res);
    }
    CertificateOptions co;
    co.r_in = 0.1;
    co.r_out = 3.0;
    co.samples = 2000;
    co.seed = 5;
    Certificate cert = verify_certificate(v, f, co);
    bool gas = c.name != "center" && c.name != "+x";
    if (gas) {
      o.require(cert.pass && cert.decrease_margin > 0.0, c.name + ": certificate margin " + sci(cert.decrease_margin));
      min_margin = std::min(min_margin, cert.decrease_margin);
    } else {
      o.require(!cert.pass, c.name + ": certificate passed");
    }
  }
  o.require(worst_identity <= 1e-5, "identity residual " + sci(worst_identity));
  o.detail << (o.ok ? "" : "; ") << "identity residual " << sci(worst_identity)
           << " (limit 1e-05, relative to 1 + |rhs|); smallest passing margin " << sci(min_margin)
           << "; center and +x rejected";
}

void appendix_suite(Outcome& o) {
  double hess_err = 0.0, near_err = 0.0;
  for (const auto& c : kPotentialCorpus) {
    Potential v = potential(c.src, c.n);
    const std::size_t n = c.n;
    Vec h0(n * n);
    v.hessian(origin(n), h0);
    Potential lim = appendix_morse(v, 1.0), near = appendix_morse(v, 0.999);
    for (std::uint64_t k = 0; k < 50; ++k) {
      auto rng = sample_rng(29, kStreamProperty, k);
      Vec x = sample_annulus(rng, origin(n), 0.0, 1.0);
      Vec hx(n * n);
      lim.hessian(x, hx);
      for (std::size_t i = 0; i < n * n; ++i) hess_err = std::max(hess_err, std::abs(hx[i] - h0[i]));
      double quad = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) quad += 0.5 * x[i] * h0[i * n + j] * x[j];
      hess_err = std::max(hess_err, std::abs(lim(x) - quad));
    }
    for (std::uint64_t k = 0; k < 200; ++k) {
      auto rng = sample_rng(31, kStreamProperty, k);
      Vec x = sample_annulus(rng, origin(n), 0.0, 1.0);
      near_err = std::max(near_err, std::abs(near(x) - lim(x)));
    }
  }
  o.require(hess_err <= 1e-10, "Hessian mismatch " + sci(hess_err));
  o.require(near_err <= 1e-2, "H_0.999 vs H_1 " + sci(near_err));

  std::mt19937_64 rng(37);
  std::normal_distribution<double> nd;
  std::uniform_int_distribution<int> dim(2, 5);
  std::size_t checked = 0;
  for (int k = 0; k < 100; ++k) {
    int n = dim(rng);
    Eigen::MatrixXd b(n, n);
    for (int i = 0; i < n * n; ++i) b.data()[i] = nd(rng);
    Eigen::MatrixXd pds = b * b.transpose() + 0.05 * Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd skew(n, n);
    for (int i = 0; i < n * n; ++i) skew.data()[i] = nd(rng);
    Eigen::MatrixXd hur = -pds + 2.0 * (skew - skew.transpose());
    for (double t : {0.25, 0.5, 0.75, 1.0}) {
      Eigen::MatrixXd mh = matrix_contraction(hur, t, MatrixClass::Hurwitz);
      Eigen::MatrixXd mp = matrix_contraction(pds, t, MatrixClass::Pds);
      Eigen::EigenSolver<Eigen::MatrixXd> es(mh);
      o.require(es.eigenvalues().real().maxCoeff() < 0.0, "Hurwitz line leaves the class");
      o.require((mp - mp.transpose()).norm() == 0.0, "PDS line loses symmetry");
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ss(mp);
      o.require(ss.eigenvalues().minCoeff() > 0.0, "PDS line leaves the class");
      checked += 2;
    }
  }
  o.detail << (o.ok ? "" : "; ") << "Hessian match " << sci(hess_err) << " (limit 1e-10); |H_0.999 - H_1| "
           << sci(near_err) << " (limit 1e-02); " << checked << " matrix-line eigenvalue checks";
}

void remark_suite(Outcome& o) {
  auto expr = VectorExpr::parse({"t^4*x1 - x1^3"}, 1, {"t"});
  FieldFamily h = [expr](double t) { return make_field(expr, Vec{t}); };
  EquilibriumCurve z = [](double t) { return Vec{t * t}; };
  FamilyAttractionOptions opts;
  opts.spec.max_time = 1e6;
  FamilyAttractionReport r = check_family_attraction(h, z, opts);
  o.require(r.verdict == AttractionVerdict::NotAttracting, "verdict is attracting-evidence");
  o.require(!r.witnesses.empty(), "no witness");
  std::size_t replayed = 0;
  double best = 0.0;
  for (std::size_t i = 0; i < std::min<std::size_t>(5, r.witnesses.size()); ++i) {
    const FamilyWitness& w = r.witnesses[i];
    o.require(w.final_dist > 1e-3, "witness terminal distance " + sci(w.final_dist));
    bool again = replay_family_witness(h, r, w, opts);
    o.require(again, "witness " + std::to_string(w.index) + " does not replay");
    replayed += again;
    best = std::max(best, w.final_dist);
  }

  // the documented start (0.1, -1e-4) as its own witness
  FamilyWitness paper;
  paper.t = 0.1;
  paper.start = {-1e-4};
  paper.horizon = 3e5;
  o.require(replay_family_witness(h, r, paper, opts), "(0.1, -1e-4) does not leave Z");

  for (double t : {0.25, 0.5, 1.0}) {
    FrozenLocalCheck c = frozen_local_check(h, t, Vec{t * t});
    o.require(c.pass, "frozen check fails at t = " + std::to_string(t));
    double expected = -2.0 * std::pow(t, 4);
    o.require(std::abs(c.max_real_eigenvalue - expected) <= 1e-9 * std::max(1.0, std::abs(expected)),
              "eigenvalue at t = " + std::to_string(t));
  }
  o.detail << (o.ok ? "" : "; ") << "not-attracting with " << r.witnesses.size() << " witnesses, " << replayed
           << " replayed, terminal distance up to " << sci(best)
           << " (limit 1e-03); frozen checks pass at t = 0.25, 0.5, 1";
}

void ad_suite(Outcome& o) {
  const std::vector<std::string> corpus = {
      "x1^2 + x2^2",
      "x1^2 + x1*x2",
      "sin(x1)*cos(x2) + exp(x1/3)",
      "tanh(x1 - 2*x2) + x2^3",
      "sqrt(1 + x1^2 + x2^2 + x3^2)",
      "log(2 + x1^2) * x2 - x3",
      "(x1^2 + x2^2)^2 + x1^2",
      "x1^2 + x2^4 + x3^6",
      "exp(-x1^2) / (1 + x2^2)",
      "a*x1 - b*x2^3 + x1*x2*x3",
      "-x1^3 - x2 + cos(a*x3)",
      "x1 * (1 - x2) / (2 + sin(x3))",
  };
  const Vec params{0.7, -1.3};
  const double step = 1e-5;
  double grad_err = 0.0, hess_err = 0.0;
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (const auto& src : corpus) {
    ScalarExpr e = ScalarExpr::parse(src, 3, {"a", "b"});
    for (int k = 0; k < 100; ++k) {
      Vec x{u(rng), u(rng), u(rng)};
      Jet j = e.jet(x, params, 2);
      for (std::size_t c = 0; c < 3; ++c) {
        Vec xp = x, xm = x;
        xp[c] += step;
        xm[c] -= step;
        double fd = (e.eval(xp, params) - e.eval(xm, params)) / (2 * step);
        grad_err = std::max(grad_err, std::abs(j.grad[c] - fd) / (1 + std::abs(j.grad[c])));
        Jet gp = e.jet(xp, params, 1), gm = e.jet(xm, params, 1);
        for (std::size_t r = 0; r < 3; ++r) {
          double h = (*j.hess)[r * 3 + c];
          double fdh = (gp.grad[r] - gm.grad[r]) / (2 * step);
          hess_err = std::max(hess_err, std::abs(h - fdh) / (1 + std::abs(h)));
        }
      }
    }
  }
  o.require(grad_err <= 1e-6, "gradient error " + sci(grad_err));
  o.require(hess_err <= 1e-5, "Hessian error " + sci(hess_err));
  o.detail << (o.ok ? "" : "; ") << "gradient error " << sci(grad_err) << " (limit 1e-06), Hessian error "
           << sci(hess_err) << " (limit 1e-05) over " << corpus.size() << " expressions x 100 points";
}

std::string run_report(const std::string& request, unsigned threads, Outcome& o) {
  std::string req = request;
  req.insert(req.size() - 1, ", \"threads\": " + std::to_string(threads));
  sk_report* rep = nullptr;
  if (sk_run_command(req.c_str(), &rep) != SK_OK) {
    o.require(false, std::string("request failed: ") + sk_last_error());
    return {};
  }
  std::string text = sk_report_json(rep);
  text += sk_report_csv(rep);
  sk_report_free(rep);
  return text;
}

void determinism_suite(Outcome& o) {
  const std::string lin = R"j({"schema": 1, "dimension": 2, "field": ["-x1^3", "-x2"]})j";
  const std::string focus = R"j({"schema": 1, "dimension": 2, "field": ["-x1 - 5*x2", "5*x1 - x2"]})j";
  const std::string pot = R"j({"schema": 1, "dimension": 2, "potential": "x1^2 + x2^4"})j";
  const std::string remark = R"j({"schema": 1, "dimension": 1, "parameter": "t", "family": ["t^4*x1 - x1^3"],
      "equilibria": ["t^2"], "integrator": {"max_time": 1e6}})j";
  const std::string rot = R"j({"schema": 1, "dimension": 2, "parameter": "theta",
      "family": ["cos(theta)*x1 - sin(theta)*x2", "sin(theta)*x1 + cos(theta)*x2"],
      "probe": ["cos(theta)", "sin(theta)"]})j";
  const std::vector<std::string> requests = {
      R"j({"command": "check-gas", "seed": 4, "system": )j" + lin +
          R"j(, "options": {"samples": 64, "certificate": true, "certificate_samples": 300}})j",
      R"j({"command": "lyapunov", "seed": 6, "system": )j" + focus +
          R"j(, "options": {"samples": 300, "grid_n": 6}})j",
      R"j({"command": "homotopy", "seed": 8, "system": )j" + lin +
          R"j(, "options": {"kind": "sontag", "verify": true, "samples": 60, "t_points": 6, "trace_points": 5}})j",
      R"j({"command": "linearize", "seed": 10, "system": )j" + focus +
          R"j(, "options": {"check": true, "samples": 40}, "points": [[0.3, -0.2], [2, 1]]})j",
      R"j({"command": "morse", "seed": 12, "system": )j" + pot + R"j(, "options": {"check": true, "samples": 100}})j",
      R"j({"command": "degree", "system": {"schema": 1, "dimension": 3, "field": ["-x1", "-x2", "-x3"]},
          "options": {"resolution": 5}})j",
      R"j({"command": "obstruct", "family": )j" + rot + "}",
      R"j({"command": "family-check", "seed": 14, "family": )j" + remark + R"j(, "options": {"samples": 64}})j",
  };
  std::size_t compared = 0;
  for (const auto& req : requests) {
    std::string a = run_report(req, 1, o);
    std::string b = run_report(req, 1, o);
    std::string c = run_report(req, 8, o);
    if (a.empty()) continue;
    std::string cmd = req.substr(13, req.find('"', 13) - 13);
    o.require(a == b, cmd + ": two runs differ");
    o.require(a == c, cmd + ": threads 1 and 8 differ");
    o.require(a.find("\"seed\"") != std::string::npos, cmd + ": report lacks the seed");
    ++compared;
  }
  o.detail << (o.ok ? "" : "; ") << compared << " seeded reports byte-identical across two runs and threads 1 vs 8";
}

struct Criterion {
  const char* id;
  const char* title;
  double budget_s;
  std::function<void(Outcome&)> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"AC1", "conjugacy suite", 60.0, conjugacy_suite},
      {"AC2", "Morse identity suite", 30.0, morse_suite},
      {"AC3", "degree and winding", 5.0, degree_suite},
      {"AC4", "nullhomotopy admissibility", 60.0, nullhomotopy_suite},
      {"AC5", "Massera certificates", 60.0, massera_suite},
      {"AC6", "appendix retractions", 30.0, appendix_suite},
      {"AC7", "pointwise versus family stability", 30.0, remark_suite},
      {"AC8", "AD correctness", 5.0, ad_suite},
      {"AC9", "determinism", 600.0, determinism_suite},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    auto start = std::chrono::steady_clock::now();
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > c.budget_s) {
      o.ok = false;
      o.detail << "; over the time budget";
    }
    std::printf("%s %s %s: %s [%.1f s of %.0f s]\n", c.id, o.ok ? "PASS" : "FAIL", c.title, o.detail.str().c_str(),
                secs, c.budget_s);
    std::fflush(stdout);
    failed += !o.ok;
  }
  return failed == 0 ? 0 : 1;
}
