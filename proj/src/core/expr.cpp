#include "expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

#include "dual.hpp"
#include "error.hpp"

namespace stabkit {

enum class Op : unsigned char { Number, Var, Param, Neg, Add, Sub, Mul, Div, Pow, Func };
enum class Fn : unsigned char { Sin, Cos, Exp, Tanh, Sqrt, Log };

namespace detail {

struct Node {
  Op op = Op::Number;
  Fn fn = Fn::Sin;
  double number = 0.0;
  unsigned index = 0;  // variable/parameter slot, or the integer exponent
  int lhs = -1;
  int rhs = -1;
  std::size_t offset = 0;
};

struct ExprTree {
  std::vector<Node> nodes;
  int root = -1;
  std::size_t dimension = 0;
  std::vector<std::string> params;
  std::string source;
};

}  // namespace detail

namespace {

using detail::ExprTree;
using detail::Node;

constexpr std::string_view kFnNames[] = {"sin", "cos", "exp", "tanh", "sqrt", "log"};

std::optional<Fn> lookup_fn(std::string_view name) {
  for (std::size_t i = 0; i < std::size(kFnNames); ++i)
    if (kFnNames[i] == name) return static_cast<Fn>(i);
  return std::nullopt;
}

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

class Parser {
 public:
  Parser(std::string_view src, ExprTree& tree) : src_(src), tree_(tree) {}

  int parse() {
    int root = expr();
    skip_ws();
    if (pos_ != src_.size()) fail(ErrorCode::Syntax, "unexpected '" + std::string(1, src_[pos_]) + "'");
    return root;
  }

 private:
  [[noreturn]] void fail(ErrorCode code, const std::string& msg) const { throw ParseError(code, pos_, msg); }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  // U+2212 MINUS SIGN is accepted as '-'.
  bool peek_minus() const {
    if (pos_ < src_.size() && src_[pos_] == '-') return true;
    return src_.substr(pos_, 3) == "\xE2\x88\x92";
  }
  void take_minus() { pos_ += (src_[pos_] == '-') ? 1 : 3; }

  bool accept(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  int push(Node n) {
    if (tree_.nodes.size() >= 10000) fail(ErrorCode::Syntax, "expression too large");
    tree_.nodes.push_back(n);
    return static_cast<int>(tree_.nodes.size()) - 1;
  }

  int binary(Op op, int lhs, int rhs, std::size_t at) {
    Node n;
    n.op = op;
    n.lhs = lhs;
    n.rhs = rhs;
    n.offset = at;
    return push(n);
  }

  int expr() {
    int lhs = term();
    for (;;) {
      skip_ws();
      std::size_t at = pos_;
      if (accept('+')) {
        lhs = binary(Op::Add, lhs, term(), at);
      } else if (peek_minus()) {
        take_minus();
        lhs = binary(Op::Sub, lhs, term(), at);
      } else {
        return lhs;
      }
    }
  }

  int term() {
    int lhs = unary();
    for (;;) {
      skip_ws();
      std::size_t at = pos_;
      if (accept('*')) {
        lhs = binary(Op::Mul, lhs, unary(), at);
      } else if (accept('/')) {
        lhs = binary(Op::Div, lhs, unary(), at);
      } else {
        return lhs;
      }
    }
  }

  struct DepthGuard {
    explicit DepthGuard(Parser& p) : p_(p) {
      if (++p_.depth_ > kMaxDepth) p_.fail(ErrorCode::Syntax, "expression nested too deeply");
    }
    ~DepthGuard() { --p_.depth_; }
    Parser& p_;
  };
  static constexpr int kMaxDepth = 200;

  int unary() {
    DepthGuard guard(*this);
    skip_ws();
    if (peek_minus()) {
      std::size_t at = pos_;
      take_minus();
      Node n;
      n.op = Op::Neg;
      n.lhs = unary();
      n.offset = at;
      return push(n);
    }
    return power();
  }

  int power() {
    int b = base();
    skip_ws();
    std::size_t at = pos_;
    if (!accept('^')) return b;
    skip_ws();
    std::size_t start = pos_;
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    if (start == pos_) fail(ErrorCode::Syntax, "expected non-negative integer exponent");
    unsigned k = 0;
    auto [ptr, ec] = std::from_chars(src_.data() + start, src_.data() + pos_, k);
    if (ec != std::errc()) fail(ErrorCode::Syntax, "exponent out of range");
    Node n;
    n.op = Op::Pow;
    n.lhs = b;
    n.index = k;
    n.offset = at;
    return push(n);
  }

  int base() {
    skip_ws();
    if (pos_ >= src_.size()) fail(ErrorCode::Syntax, "unexpected end of input");
    char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (c == '(') {
      ++pos_;
      int inner = expr();
      if (!accept(')')) fail(ErrorCode::Syntax, "expected ')'");
      return inner;
    }
    if (ident_start(c)) return identifier();
    fail(ErrorCode::Syntax, "unexpected '" + std::string(1, c) + "'");
  }

  int number() {
    std::size_t start = pos_;
    auto digits = [&] {
      std::size_t s = pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      return pos_ - s;
    };
    std::size_t mantissa = digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      mantissa += digits();
    }
    if (mantissa == 0) fail(ErrorCode::Syntax, "malformed number");
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t mark = pos_++;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (digits() == 0) {
        pos_ = mark;
        fail(ErrorCode::Syntax, "malformed exponent");
      }
    }
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(src_.data() + start, src_.data() + pos_, value);
    if (ec != std::errc() || !std::isfinite(value)) {
      pos_ = start;
      fail(ErrorCode::Syntax, "number out of range");
    }
    Node n;
    n.op = Op::Number;
    n.number = value;
    n.offset = start;
    return push(n);
  }

  int identifier() {
    std::size_t start = pos_;
    while (pos_ < src_.size() && ident_char(src_[pos_])) ++pos_;
    std::string_view name = src_.substr(start, pos_ - start);

    if (auto fn = lookup_fn(name)) {
      if (!accept('(')) {
        pos_ = start;
        fail(ErrorCode::Arity, "function '" + std::string(name) + "' expects 1 argument");
      }
      int arg = expr();
      std::size_t args = 1;
      while (accept(',')) {
        expr();
        ++args;
      }
      if (!accept(')')) fail(ErrorCode::Syntax, "expected ')'");
      if (args != 1) {
        pos_ = start;
        fail(ErrorCode::Arity, "function '" + std::string(name) + "' expects 1 argument, got " +
                                   std::to_string(args));
      }
      Node n;
      n.op = Op::Func;
      n.fn = *fn;
      n.lhs = arg;
      n.offset = start;
      return push(n);
    }

    Node n;
    n.offset = start;
    if (name.size() >= 2 && name[0] == 'x' && name[1] != '0' &&
        name.find_first_not_of("0123456789", 1) == std::string_view::npos) {
      unsigned i = 0;
      auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), i);
      if (ec == std::errc() && i >= 1 && i <= tree_.dimension) {
        n.op = Op::Var;
        n.index = i - 1;
        return push(n);
      }
    }
    for (std::size_t p = 0; p < tree_.params.size(); ++p) {
      if (tree_.params[p] == name) {
        n.op = Op::Param;
        n.index = static_cast<unsigned>(p);
        return push(n);
      }
    }
    pos_ = start;
    fail(ErrorCode::UnknownIdentifier, "unknown identifier '" + std::string(name) + "'");
  }

  std::string_view src_;
  ExprTree& tree_;
  std::size_t pos_ = 0;
  int depth_ = 0;
};

[[noreturn]] void domain_error(const Node& n, std::string_view what, double arg) {
  std::ostringstream os;
  os << "domain violation: " << what << " of " << arg << " at byte " << n.offset;
  throw Error(ErrorCode::Domain, os.str());
}

template <class T>
T eval_node(const ExprTree& t, int idx, std::span<const T> x, std::span<const double> p) {
  const Node& n = t.nodes[static_cast<std::size_t>(idx)];
  switch (n.op) {
    case Op::Number:
      return T(n.number);
    case Op::Var:
      return x[n.index];
    case Op::Param:
      return T(p[n.index]);
    case Op::Neg:
      return -eval_node(t, n.lhs, x, p);
    case Op::Add:
      return eval_node(t, n.lhs, x, p) + eval_node(t, n.rhs, x, p);
    case Op::Sub:
      return eval_node(t, n.lhs, x, p) - eval_node(t, n.rhs, x, p);
    case Op::Mul:
      return eval_node(t, n.lhs, x, p) * eval_node(t, n.rhs, x, p);
    case Op::Div: {
      T num = eval_node(t, n.lhs, x, p);
      T den = eval_node(t, n.rhs, x, p);
      if (primal(den) == 0.0) domain_error(n, "division", primal(den));
      return num / den;
    }
    case Op::Pow:
      return ipow(eval_node(t, n.lhs, x, p), n.index);
    case Op::Func: {
      using std::cos;
      using std::exp;
      using std::log;
      using std::sin;
      using std::sqrt;
      using std::tanh;
      T a = eval_node(t, n.lhs, x, p);
      switch (n.fn) {
        case Fn::Sin:
          return sin(a);
        case Fn::Cos:
          return cos(a);
        case Fn::Exp:
          return exp(a);
        case Fn::Tanh:
          return tanh(a);
        case Fn::Sqrt:
          if (primal(a) < 0.0) domain_error(n, "sqrt", primal(a));
          if constexpr (is_dual<T>::value) {
            if (primal(a) == 0.0) domain_error(n, "derivative of sqrt", 0.0);
          }
          return sqrt(a);
        case Fn::Log:
          if (primal(a) <= 0.0) domain_error(n, "log", primal(a));
          return log(a);
      }
    }
  }
  throw Error(ErrorCode::Internal, "corrupt expression tree");
}

template <class T>
T eval_checked(const ExprTree& t, std::span<const T> x, std::span<const double> p) {
  T r = eval_node(t, t.root, x, p);
  if (!std::isfinite(primal(r))) {
    throw Error(ErrorCode::Domain, "domain violation: non-finite value of '" + t.source + "'");
  }
  return r;
}

void check_args(const ExprTree& t, std::size_t nx, std::size_t np) {
  if (nx != t.dimension)
    throw Error(ErrorCode::Dimension, "point has dimension " + std::to_string(nx) + ", expression expects " +
                                          std::to_string(t.dimension));
  if (np != t.params.size())
    throw Error(ErrorCode::Config, "expected " + std::to_string(t.params.size()) + " parameter values, got " +
                                       std::to_string(np));
}

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void unparse_node(const ExprTree& t, int idx, std::string& out) {
  const Node& n = t.nodes[static_cast<std::size_t>(idx)];
  auto bin = [&](const char* op) {
    out += '(';
    unparse_node(t, n.lhs, out);
    out += op;
    unparse_node(t, n.rhs, out);
    out += ')';
  };
  switch (n.op) {
    case Op::Number:
      out += format_number(n.number);
      break;
    case Op::Var:
      out += 'x' + std::to_string(n.index + 1);
      break;
    case Op::Param:
      out += t.params[n.index];
      break;
    case Op::Neg:
      out += "(-";
      unparse_node(t, n.lhs, out);
      out += ')';
      break;
    case Op::Add:
      bin(" + ");
      break;
    case Op::Sub:
      bin(" - ");
      break;
    case Op::Mul:
      bin(" * ");
      break;
    case Op::Div:
      bin(" / ");
      break;
    case Op::Pow:
      out += "((";
      unparse_node(t, n.lhs, out);
      out += ")^" + std::to_string(n.index) + ')';
      break;
    case Op::Func:
      out += kFnNames[static_cast<std::size_t>(n.fn)];
      out += '(';
      unparse_node(t, n.lhs, out);
      out += ')';
      break;
  }
}

}  // namespace

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Ok: return "ok";
    case ErrorCode::Syntax: return "syntax";
    case ErrorCode::UnknownIdentifier: return "unknown-identifier";
    case ErrorCode::Arity: return "arity";
    case ErrorCode::Dimension: return "dimension";
    case ErrorCode::Domain: return "domain";
    case ErrorCode::FiniteEscape: return "finite-escape";
    case ErrorCode::StepsExhausted: return "steps-exhausted";
    case ErrorCode::StepUnderflow: return "step-underflow";
    case ErrorCode::NoCrossing: return "no-crossing";
    case ErrorCode::Tangential: return "tangential-crossing";
    case ErrorCode::GradientSingular: return "gradient-singular";
    case ErrorCode::NonConvergence: return "non-convergence";
    case ErrorCode::Precondition: return "precondition";
    case ErrorCode::Residual: return "residual";
    case ErrorCode::Config: return "config";
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::EndpointMismatch: return "endpoint-mismatch";
    case ErrorCode::Internal: return "internal";
  }
  return "unknown";
}

ScalarExpr ScalarExpr::parse(std::string_view src, std::size_t dimension, const std::vector<std::string>& params) {
  for (const auto& name : params) {
    bool ok = !name.empty() && ident_start(name[0]);
    for (char c : name) ok = ok && ident_char(c);
    if (!ok || lookup_fn(name))
      throw Error(ErrorCode::InvalidArgument, "invalid parameter name '" + name + "'");
  }
  auto tree = std::make_shared<ExprTree>();
  tree->dimension = dimension;
  tree->params = params;
  tree->source = std::string(src);
  Parser parser(src, *tree);
  tree->root = parser.parse();
  ScalarExpr e;
  e.tree_ = std::move(tree);
  return e;
}

std::size_t ScalarExpr::dimension() const { return tree_->dimension; }
const std::vector<std::string>& ScalarExpr::params() const { return tree_->params; }
const std::string& ScalarExpr::source() const { return tree_->source; }

std::vector<double> ScalarExpr::bind(const ParamMap& values) const {
  std::vector<double> out;
  out.reserve(tree_->params.size());
  for (const auto& name : tree_->params) {
    auto it = values.find(name);
    if (it == values.end()) throw Error(ErrorCode::Config, "parameter '" + name + "' is not bound");
    out.push_back(it->second);
  }
  return out;
}

double ScalarExpr::eval(std::span<const double> x, std::span<const double> params) const {
  check_args(*tree_, x.size(), params.size());
  return eval_checked<double>(*tree_, x, params);
}

Jet ScalarExpr::jet(std::span<const double> x, std::span<const double> params, int order) const {
  check_args(*tree_, x.size(), params.size());
  if (order < 0 || order > 2) throw Error(ErrorCode::InvalidArgument, "jet order must be 0, 1 or 2");
  const std::size_t n = x.size();
  Jet out;
  out.value = eval_checked<double>(*tree_, x, params);
  if (order == 0) return out;
  out.grad.assign(n, 0.0);

  if (order == 1) {
    using D = Dual<double>;
    std::vector<D> xd(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < n; ++k) xd[k] = D(x[k], k == i ? 1.0 : 0.0);
      out.grad[i] = eval_checked<D>(*tree_, xd, params).d;
    }
    return out;
  }

  // Nested duals: inner tangent along e_i, outer tangent along e_j.
  using D = Dual<double>;
  using DD = Dual<D>;
  std::vector<DD> xd(n);
  std::vector<double> hess(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      for (std::size_t k = 0; k < n; ++k)
        xd[k] = DD(D(x[k], k == i ? 1.0 : 0.0), D(k == j ? 1.0 : 0.0, 0.0));
      DD r = eval_checked<DD>(*tree_, xd, params);
      if (i == j) out.grad[i] = r.v.d;
      hess[i * n + j] = r.d.d;
      hess[j * n + i] = r.d.d;
    }
  }
  out.hess = std::move(hess);
  return out;
}

std::string ScalarExpr::unparse() const {
  std::string out;
  unparse_node(*tree_, tree_->root, out);
  return out;
}

VectorExpr VectorExpr::parse(const std::vector<std::string>& srcs, std::size_t dimension,
                             const std::vector<std::string>& params) {
  if (srcs.size() != dimension)
    throw Error(ErrorCode::Dimension, "component count " + std::to_string(srcs.size()) + " != dimension " +
                                          std::to_string(dimension));
  VectorExpr v;
  v.params_ = params;
  v.components_.reserve(dimension);
  for (std::size_t i = 0; i < srcs.size(); ++i) {
    try {
      v.components_.push_back(ScalarExpr::parse(srcs[i], dimension, params));
    } catch (const ParseError& e) {
      throw ParseError(e.code(), e.offset(), "component " + std::to_string(i) + ": " + e.detail());
    }
  }
  return v;
}

const std::vector<std::string>& VectorExpr::params() const { return params_; }

std::vector<double> VectorExpr::bind(const ParamMap& values) const {
  std::vector<double> out;
  for (const auto& name : params_) {
    auto it = values.find(name);
    if (it == values.end()) throw Error(ErrorCode::Config, "parameter '" + name + "' is not bound");
    out.push_back(it->second);
  }
  return out;
}

void VectorExpr::eval(std::span<const double> x, std::span<const double> params, std::span<double> out) const {
  for (std::size_t i = 0; i < components_.size(); ++i) out[i] = components_[i].eval(x, params);
}

std::vector<double> VectorExpr::eval(std::span<const double> x, std::span<const double> params) const {
  std::vector<double> out(components_.size());
  eval(x, params, out);
  return out;
}

void VectorExpr::jacobian(std::span<const double> x, std::span<const double> params, std::span<double> out) const {
  using D = Dual<double>;
  const std::size_t n = components_.size();
  if (x.size() != n) throw Error(ErrorCode::Dimension, "point dimension mismatch");
  std::vector<D> xd(n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < n; ++k) xd[k] = D(x[k], k == j ? 1.0 : 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& tree = *components_[i].tree_;
      check_args(tree, n, params.size());
      out[i * n + j] = eval_checked<D>(tree, xd, params).d;
    }
  }
}

std::vector<Jet> VectorExpr::jets(std::span<const double> x, std::span<const double> params, int order) const {
  std::vector<Jet> out;
  out.reserve(components_.size());
  for (const auto& c : components_) out.push_back(c.jet(x, params, order));
  return out;
}

}  // namespace stabkit
