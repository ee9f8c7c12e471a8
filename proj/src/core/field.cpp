#include "field.hpp"

#include "error.hpp"

namespace stabkit {

Field make_field(const VectorExpr& expr, Vec params) {
  Field f;
  f.dim = expr.dimension();
  auto p = std::make_shared<const Vec>(std::move(params));
  f.eval = [expr, p](std::span<const double> x, std::span<double> out) { expr.eval(x, *p, out); };
  f.jacobian = [expr, p](std::span<const double> x, std::span<double> out) { expr.jacobian(x, *p, out); };
  return f;
}

Field make_field(const VectorExpr& expr, const ParamMap& params) { return make_field(expr, expr.bind(params)); }

Potential make_potential(const ScalarExpr& expr, Vec params) {
  Potential v;
  v.dim = expr.dimension();
  auto p = std::make_shared<const Vec>(std::move(params));
  v.value = [expr, p](std::span<const double> x) { return expr.eval(x, *p); };
  v.gradient = [expr, p](std::span<const double> x, std::span<double> out) {
    Jet j = expr.jet(x, *p, 1);
    std::copy(j.grad.begin(), j.grad.end(), out.begin());
  };
  v.hessian = [expr, p](std::span<const double> x, std::span<double> out) {
    Jet j = expr.jet(x, *p, 2);
    std::copy(j.hess->begin(), j.hess->end(), out.begin());
  };
  return v;
}

Potential make_potential(const ScalarExpr& expr, const ParamMap& params) {
  return make_potential(expr, expr.bind(params));
}

Field gradient_field(const Potential& v, double sign) {
  Field f;
  f.dim = v.dim;
  f.eval = [v, sign](std::span<const double> x, std::span<double> out) {
    v.gradient(x, out);
    for (double& c : out) c *= sign;
  };
  if (v.hessian) {
    f.jacobian = [v, sign](std::span<const double> x, std::span<double> out) {
      v.hessian(x, out);
      for (double& c : out) c *= sign;
    };
  }
  return f;
}

}  // namespace stabkit
