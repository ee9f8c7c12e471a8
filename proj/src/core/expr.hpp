#pragma once

// Field-definition DSL: parsing, evaluation and exact derivatives.
//
//   expr  := term (("+" | "-") term)*
//   term  := unary (("*" | "/") unary)*
//   unary := "-" unary | power
//   power := base ("^" int)?
//   base  := number | ident | func "(" expr ")" | "(" expr ")"
//
// Identifiers are the variables x1..xn or declared parameter names.
// Unary minus binds looser than "^", so "-x1^2" is -(x1^2).

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace stabkit {

using ParamMap = std::map<std::string, double>;

// Value, gradient and (optionally) the Hessian of a scalar at a point.
// The Hessian is row-major n*n and exactly symmetric.
struct Jet {
  double value = 0.0;
  std::vector<double> grad;
  std::optional<std::vector<double>> hess;
};

namespace detail {
struct ExprTree;
}

class ScalarExpr {
 public:
  ScalarExpr() = default;

  // Throws ParseError (Syntax, UnknownIdentifier, Arity).
  static ScalarExpr parse(std::string_view src, std::size_t dimension,
                          const std::vector<std::string>& params = {});

  std::size_t dimension() const;
  const std::vector<std::string>& params() const;
  const std::string& source() const;

  // Orders the bound values like params(); throws Config when one is missing.
  std::vector<double> bind(const ParamMap& values) const;

  // Throws Error(Domain) on sqrt/log of a bad argument, division by zero or
  // a non-finite result.
  double eval(std::span<const double> x, std::span<const double> params = {}) const;
  Jet jet(std::span<const double> x, std::span<const double> params, int order) const;

  // Fully parenthesised source that parses back to the same tree.
  std::string unparse() const;

  bool valid() const { return tree_ != nullptr; }

 private:
  friend class VectorExpr;
  std::shared_ptr<const detail::ExprTree> tree_;
};

class VectorExpr {
 public:
  VectorExpr() = default;

  // Throws ParseError with the component index in the message, or
  // Error(Dimension) when srcs.size() != dimension.
  static VectorExpr parse(const std::vector<std::string>& srcs, std::size_t dimension,
                          const std::vector<std::string>& params = {});

  std::size_t dimension() const { return components_.size(); }
  const std::vector<std::string>& params() const;
  const std::vector<ScalarExpr>& components() const { return components_; }
  std::vector<double> bind(const ParamMap& values) const;

  void eval(std::span<const double> x, std::span<const double> params, std::span<double> out) const;
  std::vector<double> eval(std::span<const double> x, std::span<const double> params = {}) const;
  // Row-major Jacobian, out.size() == n*n.
  void jacobian(std::span<const double> x, std::span<const double> params, std::span<double> out) const;
  std::vector<Jet> jets(std::span<const double> x, std::span<const double> params, int order) const;

 private:
  std::vector<ScalarExpr> components_;
  std::vector<std::string> params_;
};

}  // namespace stabkit
