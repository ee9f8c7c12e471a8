#include <doctest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "error.hpp"
#include "expr.hpp"
#include "field.hpp"

using namespace stabkit;

namespace {

ErrorCode parse_error_code(const std::string& src, std::size_t n, const std::vector<std::string>& params = {}) {
  try {
    ScalarExpr::parse(src, n, params);
  } catch (const ParseError& e) {
    return e.code();
  }
  return ErrorCode::Ok;
}

// Expressions used by the derivative oracles (n = 3, params a, b).
const std::vector<std::string> kCorpus = {
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

Vec random_point(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Vec x(n);
  for (double& c : x) c = u(rng);
  return x;
}

// Draws a random sentence of the grammar.
std::string gen_expr(std::mt19937_64& rng, int depth) {
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 2 : 8);
  static const char* fns[] = {"sin", "cos", "exp", "tanh", "sqrt", "log"};
  switch (pick(rng)) {
    case 0: return std::to_string(std::uniform_int_distribution<int>(0, 9)(rng)) + ".5";
    case 1: return "x" + std::to_string(std::uniform_int_distribution<int>(1, 2)(rng));
    case 2: return "a";
    case 3: return gen_expr(rng, depth - 1) + " + " + gen_expr(rng, depth - 1);
    case 4: return gen_expr(rng, depth - 1) + " - " + gen_expr(rng, depth - 1);
    case 5: return gen_expr(rng, depth - 1) + "*" + gen_expr(rng, depth - 1);
    case 6: return "(" + gen_expr(rng, depth - 1) + ")/(" + gen_expr(rng, depth - 1) + ")";
    case 7: return "(" + gen_expr(rng, depth - 1) + ")^" + std::to_string(std::uniform_int_distribution<int>(0, 4)(rng));
    default: return std::string(fns[std::uniform_int_distribution<int>(0, 5)(rng)]) + "(-" + gen_expr(rng, depth - 1) + ")";
  }
}

}  // namespace

TEST_CASE("parse_scalar examples") {
  auto e = ScalarExpr::parse("x1^2 + x2^2", 2);
  Vec x{1.0, 2.0};
  CHECK(e.eval(x) == 5.0);

  auto cube = ScalarExpr::parse("-x1^3", 1);
  Vec two{2.0};
  CHECK(cube.eval(two) == -8.0);

  CHECK(parse_error_code("x3", 2) == ErrorCode::UnknownIdentifier);
}

TEST_CASE("unary minus binds looser than power") {
  auto e = ScalarExpr::parse("-x1^2", 1);
  Vec x{3.0};
  CHECK(e.eval(x) == -9.0);
  auto u = ScalarExpr::parse("\xE2\x88\x92x1 \xE2\x88\x92 1", 1);  // U+2212 minus signs
  CHECK(u.eval(x) == -4.0);
}

TEST_CASE("parse errors are structured") {
  CHECK(parse_error_code("x1 +", 1) == ErrorCode::Syntax);
  CHECK(parse_error_code("sin(x1, x1)", 1) == ErrorCode::Arity);
  CHECK(parse_error_code("sin + 1", 1) == ErrorCode::Arity);
  CHECK(parse_error_code("foo(x1)", 1) == ErrorCode::UnknownIdentifier);
  CHECK(parse_error_code("x1^-2", 1) == ErrorCode::Syntax);
  CHECK(parse_error_code("x1^1.5", 1) == ErrorCode::Syntax);
  CHECK(parse_error_code("x0", 1) == ErrorCode::UnknownIdentifier);
  CHECK(parse_error_code("k*x1", 1, {"k"}) == ErrorCode::Ok);
  CHECK(parse_error_code("1e999", 1) == ErrorCode::Syntax);
  CHECK(parse_error_code(std::string(500, '(') + "x1" + std::string(500, ')'), 1) == ErrorCode::Syntax);

  try {
    ScalarExpr::parse("x1 + * 2", 1);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 5);
  }
}

TEST_CASE("parse_vector examples") {
  auto lin = VectorExpr::parse({"-x1", "-x2"}, 2);
  Vec x{1.5, -2.0};
  auto fx = lin.eval(x);
  CHECK(fx[0] == -1.5);
  CHECK(fx[1] == 2.0);

  auto cubic = VectorExpr::parse({"-x1^3", "-x2"}, 2);
  auto fc = cubic.eval(Vec{2.0, 1.0});
  CHECK(fc[0] == -8.0);
  CHECK(fc[1] == -1.0);

  CHECK_THROWS_AS(VectorExpr::parse({"-x1"}, 2), Error);
  try {
    VectorExpr::parse({"-x1", "x3"}, 2);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("component 1") != std::string::npos);
    CHECK(e.code() == ErrorCode::UnknownIdentifier);
  }
}

TEST_CASE("eval_jet examples") {
  auto v = ScalarExpr::parse("x1^2 + x1*x2", 2);
  Jet j = v.jet(Vec{1.0, 1.0}, {}, 1);
  CHECK(j.value == 2.0);
  CHECK(j.grad[0] == 3.0);
  CHECK(j.grad[1] == 1.0);

  // d2/dx2 (x^2 + x^4) = 2 + 12x^2 = 2 at 0.
  auto w = ScalarExpr::parse("x1^2 + x1^4", 1);
  Jet h = w.jet(Vec{0.0}, {}, 2);
  REQUIRE(h.hess);
  CHECK((*h.hess)[0] == 2.0);

  auto s = ScalarExpr::parse("sqrt(x1)", 1);
  try {
    s.eval(Vec{-1.0});
    FAIL("expected a domain violation");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Domain);
    CHECK(std::string(e.what()).find("sqrt") != std::string::npos);
  }
  CHECK_THROWS_AS(ScalarExpr::parse("log(x1)", 1).eval(Vec{0.0}), Error);
  CHECK_THROWS_AS(ScalarExpr::parse("1/x1", 1).eval(Vec{0.0}), Error);
  CHECK_THROWS_AS(ScalarExpr::parse("exp(x1)", 1).eval(Vec{1e4}), Error);
}

TEST_CASE("parameters bind by name") {
  auto e = ScalarExpr::parse("k*x1 + t", 1, {"k", "t"});
  auto p = e.bind({{"t", 0.5}, {"k", 2.0}, {"unused", 9.0}});
  CHECK(e.eval(Vec{3.0}, p) == 6.5);
  CHECK_THROWS_AS(e.bind({{"k", 1.0}}), Error);
}

TEST_CASE("dual gradients agree with central differences") {
  std::mt19937_64 rng(11);
  const double step = 1e-5;
  Vec params{0.7, -1.3};
  for (const auto& src : kCorpus) {
    auto e = ScalarExpr::parse(src, 3, {"a", "b"});
    for (int k = 0; k < 100; ++k) {
      Vec x = random_point(rng, 3);
      Jet j = e.jet(x, params, 1);
      for (std::size_t i = 0; i < 3; ++i) {
        Vec xp = x, xm = x;
        xp[i] += step;
        xm[i] -= step;
        double fd = (e.eval(xp, params) - e.eval(xm, params)) / (2 * step);
        CHECK_MESSAGE(std::abs(j.grad[i] - fd) <= 1e-6 * (1 + std::abs(j.grad[i])), src);
      }
    }
  }
}

TEST_CASE("nested-dual Hessians are symmetric and match differenced gradients") {
  std::mt19937_64 rng(12);
  const double step = 1e-5;
  Vec params{0.7, -1.3};
  for (const auto& src : kCorpus) {
    auto e = ScalarExpr::parse(src, 3, {"a", "b"});
    for (int k = 0; k < 100; ++k) {
      Vec x = random_point(rng, 3);
      Jet j = e.jet(x, params, 2);
      const auto& H = *j.hess;
      Jet j1 = e.jet(x, params, 1);
      for (std::size_t i = 0; i < 3; ++i) CHECK(j.grad[i] == doctest::Approx(j1.grad[i]).epsilon(1e-14));
      for (std::size_t c = 0; c < 3; ++c) {
        Vec xp = x, xm = x;
        xp[c] += step;
        xm[c] -= step;
        Jet gp = e.jet(xp, params, 1), gm = e.jet(xm, params, 1);
        for (std::size_t r = 0; r < 3; ++r) {
          CHECK(H[r * 3 + c] == H[c * 3 + r]);
          double fd = (gp.grad[r] - gm.grad[r]) / (2 * step);
          CHECK_MESSAGE(std::abs(H[r * 3 + c] - fd) <= 1e-5 * (1 + std::abs(H[r * 3 + c])), src);
        }
      }
    }
  }
}

TEST_CASE("vector Jacobian matches component gradients") {
  auto f = VectorExpr::parse({"-x1 + x1*x2", "sin(x2) - x1^3"}, 2);
  Vec x{0.3, -1.1};
  Vec jac(4);
  f.jacobian(x, {}, jac);
  auto jets = f.jets(x, {}, 1);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t k = 0; k < 2; ++k) CHECK(jac[i * 2 + k] == jets[i].grad[k]);
}

TEST_CASE("unparse round-trips to an identical evaluation") {
  std::mt19937_64 rng(13);
  for (int k = 0; k < 500; ++k) {
    std::string src = gen_expr(rng, 4);
    auto e = ScalarExpr::parse(src, 2, {"a"});
    auto back = ScalarExpr::parse(e.unparse(), 2, {"a"});
    for (int s = 0; s < 5; ++s) {
      Vec x = random_point(rng, 2);
      Vec p{0.25};
      double v1 = 0, v2 = 0;
      bool ok1 = true, ok2 = true;
      try { v1 = e.eval(x, p); } catch (const Error&) { ok1 = false; }
      try { v2 = back.eval(x, p); } catch (const Error&) { ok2 = false; }
      CHECK(ok1 == ok2);
      if (ok1 && ok2) CHECK(v1 == v2);
    }
  }
}

TEST_CASE("parsing is total on mutated input") {
  std::mt19937_64 rng(14);
  const std::string alphabet = "x1234567890a+-*/^().e sincoexptahqrlg,\xE2\x88\x92";
  for (int k = 0; k < 3000; ++k) {
    std::string src = gen_expr(rng, 3);
    int edits = std::uniform_int_distribution<int>(1, 4)(rng);
    for (int e = 0; e < edits && !src.empty(); ++e) {
      std::size_t at = std::uniform_int_distribution<std::size_t>(0, src.size() - 1)(rng);
      switch (std::uniform_int_distribution<int>(0, 2)(rng)) {
        case 0: src.erase(at, 1); break;
        case 1: src.insert(src.begin() + static_cast<long>(at), alphabet[rng() % alphabet.size()]); break;
        default: src[at] = alphabet[rng() % alphabet.size()]; break;
      }
    }
    try {
      auto parsed = ScalarExpr::parse(src, 2, {"a"});
      try {
        parsed.eval(Vec{0.5, -0.5}, Vec{1.0});
      } catch (const Error& err) {
        CHECK(err.code() == ErrorCode::Domain);
      }
    } catch (const ParseError& err) {
      CHECK(err.offset() <= src.size());
    }
  }
}
