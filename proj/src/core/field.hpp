#pragma once

// Type-erased evaluables shared by every module: vector fields R^n -> R^n and
// scalar potentials R^n -> R. Expressions, Lyapunov functions and homotopy
// slices all reduce to these.

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "expr.hpp"

namespace stabkit {

using Vec = std::vector<double>;
using VecFn = std::function<void(std::span<const double>, std::span<double>)>;

struct Field {
  std::size_t dim = 0;
  VecFn eval;
  VecFn jacobian;  // row-major n*n; empty when unavailable

  Vec operator()(std::span<const double> x) const {
    Vec out(dim);
    eval(x, out);
    return out;
  }
  bool has_jacobian() const { return static_cast<bool>(jacobian); }
};

struct Potential {
  std::size_t dim = 0;
  std::function<double(std::span<const double>)> value;
  VecFn gradient;
  VecFn hessian;  // row-major n*n; empty when unavailable

  double operator()(std::span<const double> x) const { return value(x); }
  Vec grad(std::span<const double> x) const {
    Vec out(dim);
    gradient(x, out);
    return out;
  }
};

Field make_field(const VectorExpr& expr, Vec params = {});
Field make_field(const VectorExpr& expr, const ParamMap& params);
Potential make_potential(const ScalarExpr& expr, Vec params = {});
Potential make_potential(const ScalarExpr& expr, const ParamMap& params);

// x -> sign * grad V(x)
Field gradient_field(const Potential& v, double sign = -1.0);

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}
inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }
inline double dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace stabkit
