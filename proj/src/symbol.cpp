#include "phaseflow/symbol.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "phaseflow/error.hpp"

namespace phaseflow {

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kSyntax: return "SyntaxError";
    case ErrorKind::kUnknownIdentifier: return "UnknownIdentifier";
    case ErrorKind::kDimensionMismatch: return "DimensionMismatch";
    case ErrorKind::kOrderCapExceeded: return "OrderCapExceeded";
    case ErrorKind::kEvaluationDomain: return "EvaluationDomainError";
    case ErrorKind::kBlowupDetected: return "BlowupDetected";
    case ErrorKind::kBoundaryMass: return "BoundaryMassError";
    case ErrorKind::kOutOfWindow: return "OutOfWindow";
    case ErrorKind::kSolveFailure: return "SolveFailure";
    case ErrorKind::kInsufficientDecadeRange: return "InsufficientDecadeRange";
    case ErrorKind::kWindowTooSmall: return "WindowTooSmall";
    case ErrorKind::kMissingConstant: return "MissingConstant";
    case ErrorKind::kBasePointNotCritical: return "BasePointNotCritical";
    case ErrorKind::kInvalidArgument: return "InvalidArgument";
    case ErrorKind::kConfig: return "ConfigError";
  }
  return "Error";
}

namespace {

std::string join_expected(const std::vector<std::string>& expected) {
  std::string out;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (i) out += ", ";
    out += expected[i];
  }
  return out;
}

}  // namespace

SyntaxError::SyntaxError(std::size_t offset, std::vector<std::string> expected,
                         const std::string& found)
    : Error(ErrorKind::kSyntax, "syntax error at offset " +
                                    std::to_string(offset) + ": expected " +
                                    join_expected(expected) + ", found " +
                                    found),
      offset_(offset),
      expected_(std::move(expected)) {}

bool PhasePoint::finite() const {
  for (double v : x)
    if (!std::isfinite(v)) return false;
  for (double v : xi)
    if (!std::isfinite(v)) return false;
  return true;
}

double l1_distance(const PhasePoint& a, const PhasePoint& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.x.size(); ++i) d += std::abs(a.x[i] - b.x[i]);
  for (std::size_t i = 0; i < a.xi.size(); ++i) d += std::abs(a.xi[i] - b.xi[i]);
  return d;
}

double euclidean_distance(const PhasePoint& a, const PhasePoint& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.x.size(); ++i) d += (a.x[i] - b.x[i]) * (a.x[i] - b.x[i]);
  for (std::size_t i = 0; i < a.xi.size(); ++i) d += (a.xi[i] - b.xi[i]) * (a.xi[i] - b.xi[i]);
  return std::sqrt(d);
}

// ---------------------------------------------------------------------------
// Folding constructors

namespace {

NodePtr make_const(double c) {
  auto n = std::make_shared<Node>();
  n->op = Op::kConst;
  n->value = c == 0.0 ? 0.0 : c;  // no negative zero
  return n;
}

NodePtr make_var(int v) {
  auto n = std::make_shared<Node>();
  n->op = Op::kVar;
  n->var = v;
  return n;
}

bool is_const(const NodePtr& n, double c) {
  return n->op == Op::kConst && n->value == c;
}

bool finite_fold(double v) { return std::isfinite(v); }

NodePtr make_binary(Op op, NodePtr a, NodePtr b) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->lhs = std::move(a);
  n->rhs = std::move(b);
  return n;
}

NodePtr make_unary(Op op, NodePtr a) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->lhs = std::move(a);
  return n;
}

NodePtr make_neg(const NodePtr& a) {
  if (a->op == Op::kConst) return make_const(-a->value);
  if (a->op == Op::kNeg) return a->lhs;
  return make_unary(Op::kNeg, a);
}

NodePtr make_add(const NodePtr& a, const NodePtr& b) {
  if (a->op == Op::kConst && b->op == Op::kConst) {
    const double v = a->value + b->value;
    if (finite_fold(v)) return make_const(v);
  }
  if (is_const(a, 0.0)) return b;
  if (is_const(b, 0.0)) return a;
  if (b->op == Op::kNeg) return make_binary(Op::kSub, a, b->lhs);
  return make_binary(Op::kAdd, a, b);
}

NodePtr make_sub(const NodePtr& a, const NodePtr& b) {
  if (a->op == Op::kConst && b->op == Op::kConst) {
    const double v = a->value - b->value;
    if (finite_fold(v)) return make_const(v);
  }
  if (is_const(b, 0.0)) return a;
  if (is_const(a, 0.0)) return make_neg(b);
  if (b->op == Op::kNeg) return make_binary(Op::kAdd, a, b->lhs);
  return make_binary(Op::kSub, a, b);
}

NodePtr make_mul(const NodePtr& a, const NodePtr& b) {
  if (a->op == Op::kConst && b->op == Op::kConst) {
    const double v = a->value * b->value;
    if (finite_fold(v)) return make_const(v);
  }
  if (is_const(a, 0.0) || is_const(b, 0.0)) return make_const(0.0);
  if (is_const(a, 1.0)) return b;
  if (is_const(b, 1.0)) return a;
  if (is_const(a, -1.0)) return make_neg(b);
  if (is_const(b, -1.0)) return make_neg(a);
  if (a->op == Op::kNeg && b->op == Op::kNeg) return make_mul(a->lhs, b->lhs);
  if (a->op == Op::kNeg) return make_neg(make_mul(a->lhs, b));
  if (b->op == Op::kNeg) return make_neg(make_mul(a, b->lhs));
  // Constants to the left so that folding can see them.
  if (b->op == Op::kConst) return make_binary(Op::kMul, b, a);
  if (a->op == Op::kConst && b->op == Op::kMul && b->lhs->op == Op::kConst)
    return make_mul(make_const(a->value * b->lhs->value), b->rhs);
  return make_binary(Op::kMul, a, b);
}

NodePtr make_div(const NodePtr& a, const NodePtr& b) {
  if (a->op == Op::kConst && b->op == Op::kConst && b->value != 0.0) {
    const double v = a->value / b->value;
    if (finite_fold(v)) return make_const(v);
  }
  if (is_const(a, 0.0) && !is_const(b, 0.0)) return make_const(0.0);
  if (is_const(b, 1.0)) return a;
  if (is_const(b, -1.0)) return make_neg(a);
  if (a->op == Op::kNeg) return make_neg(make_div(a->lhs, b));
  return make_binary(Op::kDiv, a, b);
}

NodePtr make_pow(const NodePtr& a, int k) {
  if (k == 0) return make_const(1.0);
  if (k == 1) return a;
  if (a->op == Op::kConst) {
    const double v = std::pow(a->value, k);
    if (finite_fold(v)) return make_const(v);
  }
  if (a->op == Op::kPow) {
    const long long kk = static_cast<long long>(a->exponent) * k;
    if (kk > -1000000 && kk < 1000000) return make_pow(a->lhs, static_cast<int>(kk));
  }
  auto n = std::make_shared<Node>();
  n->op = Op::kPow;
  n->exponent = k;
  n->lhs = a;
  return n;
}

double apply_function(Op op, double u) {
  switch (op) {
    case Op::kSin: return std::sin(u);
    case Op::kCos: return std::cos(u);
    case Op::kExp: return std::exp(u);
    case Op::kTanh: return std::tanh(u);
    case Op::kSqrt: return std::sqrt(u);
    case Op::kLog: return std::log(u);
    default: return u;
  }
}

NodePtr make_function(Op op, const NodePtr& a) {
  if (a->op == Op::kConst) {
    const double u = a->value;
    const bool ok = !((op == Op::kSqrt && u < 0.0) || (op == Op::kLog && u <= 0.0));
    if (ok) {
      const double v = apply_function(op, u);
      if (finite_fold(v)) return make_const(v);
    }
  }
  return make_unary(op, a);
}

NodePtr rebuild(const NodePtr& n) {
  switch (n->op) {
    case Op::kConst: return make_const(n->value);
    case Op::kVar: return n;
    case Op::kAdd: return make_add(rebuild(n->lhs), rebuild(n->rhs));
    case Op::kSub: return make_sub(rebuild(n->lhs), rebuild(n->rhs));
    case Op::kMul: return make_mul(rebuild(n->lhs), rebuild(n->rhs));
    case Op::kDiv: return make_div(rebuild(n->lhs), rebuild(n->rhs));
    case Op::kNeg: return make_neg(rebuild(n->lhs));
    case Op::kPow: return make_pow(rebuild(n->lhs), n->exponent);
    default: return make_function(n->op, rebuild(n->lhs));
  }
}

// ---------------------------------------------------------------------------
// Differentiation

NodePtr diff(const NodePtr& n, int v) {
  switch (n->op) {
    case Op::kConst: return make_const(0.0);
    case Op::kVar: return make_const(n->var == v ? 1.0 : 0.0);
    case Op::kAdd: return make_add(diff(n->lhs, v), diff(n->rhs, v));
    case Op::kSub: return make_sub(diff(n->lhs, v), diff(n->rhs, v));
    case Op::kNeg: return make_neg(diff(n->lhs, v));
    case Op::kMul:
      return make_add(make_mul(diff(n->lhs, v), n->rhs),
                      make_mul(n->lhs, diff(n->rhs, v)));
    case Op::kDiv: {
      NodePtr du = diff(n->lhs, v);
      NodePtr dw = diff(n->rhs, v);
      if (is_const(dw, 0.0)) return make_div(du, n->rhs);
      return make_sub(make_div(du, n->rhs),
                      make_div(make_mul(n->lhs, dw), make_pow(n->rhs, 2)));
    }
    case Op::kPow:
      return make_mul(make_mul(make_const(n->exponent), make_pow(n->lhs, n->exponent - 1)),
                      diff(n->lhs, v));
    case Op::kSin: return make_mul(make_function(Op::kCos, n->lhs), diff(n->lhs, v));
    case Op::kCos:
      return make_neg(make_mul(make_function(Op::kSin, n->lhs), diff(n->lhs, v)));
    case Op::kExp: return make_mul(n, diff(n->lhs, v));
    case Op::kTanh:
      return make_mul(make_sub(make_const(1.0), make_pow(n, 2)), diff(n->lhs, v));
    case Op::kSqrt:
      return make_div(diff(n->lhs, v), make_mul(make_const(2.0), n));
    case Op::kLog: return make_div(diff(n->lhs, v), n->lhs);
  }
  return make_const(0.0);
}

// ---------------------------------------------------------------------------
// Printing

int precedence(const NodePtr& n) {
  switch (n->op) {
    case Op::kAdd:
    case Op::kSub: return 1;
    case Op::kMul:
    case Op::kDiv: return 2;
    case Op::kNeg: return 3;
    case Op::kPow: return 4;
    default: return 5;
  }
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const char* function_name(Op op) {
  switch (op) {
    case Op::kSin: return "sin";
    case Op::kCos: return "cos";
    case Op::kExp: return "exp";
    case Op::kTanh: return "tanh";
    case Op::kSqrt: return "sqrt";
    case Op::kLog: return "log";
    default: return "?";
  }
}

std::string print(const NodePtr& n, int dim);

std::string wrap(const NodePtr& n, int dim, int min_prec) {
  std::string s = print(n, dim);
  if (precedence(n) < min_prec) return "(" + s + ")";
  return s;
}

std::string var_name(int v, int dim) {
  if (v == 0) return "t";
  if (dim == 1) return v == 1 ? "x" : "xi";
  if (v <= dim) return "x" + std::to_string(v);
  return "xi" + std::to_string(v - dim);
}

std::string print(const NodePtr& n, int dim) {
  switch (n->op) {
    case Op::kConst: {
      std::string s = format_double(n->value);
      return n->value < 0.0 ? "(" + s + ")" : s;
    }
    case Op::kVar: return var_name(n->var, dim);
    case Op::kAdd: return wrap(n->lhs, dim, 1) + " + " + wrap(n->rhs, dim, 1);
    case Op::kSub: return wrap(n->lhs, dim, 1) + " - " + wrap(n->rhs, dim, 2);
    case Op::kMul: return wrap(n->lhs, dim, 2) + "*" + wrap(n->rhs, dim, 3);
    case Op::kDiv: return wrap(n->lhs, dim, 2) + "/" + wrap(n->rhs, dim, 3);
    case Op::kNeg: return "-" + wrap(n->lhs, dim, 3);
    case Op::kPow: {
      std::string e = std::to_string(n->exponent);
      return wrap(n->lhs, dim, 5) + "^" + (n->exponent < 0 ? "(" + e + ")" : e);
    }
    default: return std::string(function_name(n->op)) + "(" + print(n->lhs, dim) + ")";
  }
}

// ---------------------------------------------------------------------------
// Evaluation

double eval(const NodePtr& n, std::span<const double> vars, int dim) {
  auto fail = [&](const char* why) -> double {
    throw EvaluationDomainError(print(n, dim), why);
  };
  double r = 0.0;
  switch (n->op) {
    case Op::kConst: return n->value;
    case Op::kVar: return vars[static_cast<std::size_t>(n->var)];
    case Op::kAdd: r = eval(n->lhs, vars, dim) + eval(n->rhs, vars, dim); break;
    case Op::kSub: r = eval(n->lhs, vars, dim) - eval(n->rhs, vars, dim); break;
    case Op::kMul: r = eval(n->lhs, vars, dim) * eval(n->rhs, vars, dim); break;
    case Op::kNeg: return -eval(n->lhs, vars, dim);
    case Op::kDiv: {
      const double num = eval(n->lhs, vars, dim);
      const double den = eval(n->rhs, vars, dim);
      if (den == 0.0) return fail("division by zero");
      r = num / den;
      break;
    }
    case Op::kPow: {
      const double base = eval(n->lhs, vars, dim);
      if (base == 0.0 && n->exponent < 0) return fail("negative power of zero");
      r = std::pow(base, n->exponent);
      break;
    }
    case Op::kSqrt: {
      const double u = eval(n->lhs, vars, dim);
      if (u < 0.0) return fail("sqrt of negative value");
      r = std::sqrt(u);
      break;
    }
    case Op::kLog: {
      const double u = eval(n->lhs, vars, dim);
      if (u <= 0.0) return fail("log of non-positive value");
      r = std::log(u);
      break;
    }
    default: r = apply_function(n->op, eval(n->lhs, vars, dim)); break;
  }
  if (!std::isfinite(r)) return fail("non-finite value");
  return r;
}

bool uses_var(const NodePtr& n, int v) {
  if (!n) return false;
  if (n->op == Op::kVar) return n->var == v;
  return uses_var(n->lhs, v) || uses_var(n->rhs, v);
}

NodePtr substitute(const NodePtr& n, int v, double value) {
  if (n->op == Op::kVar) return n->var == v ? make_const(value) : n;
  if (n->op == Op::kConst) return n;
  switch (n->op) {
    case Op::kAdd: return make_add(substitute(n->lhs, v, value), substitute(n->rhs, v, value));
    case Op::kSub: return make_sub(substitute(n->lhs, v, value), substitute(n->rhs, v, value));
    case Op::kMul: return make_mul(substitute(n->lhs, v, value), substitute(n->rhs, v, value));
    case Op::kDiv: return make_div(substitute(n->lhs, v, value), substitute(n->rhs, v, value));
    case Op::kNeg: return make_neg(substitute(n->lhs, v, value));
    case Op::kPow: return make_pow(substitute(n->lhs, v, value), n->exponent);
    default: return make_function(n->op, substitute(n->lhs, v, value));
  }
}

}  // namespace

// Exposed to the parser translation unit.
namespace detail {
NodePtr node_const(double c) { return make_const(c); }
NodePtr node_var(int v) { return make_var(v); }
NodePtr node_binary(Op op, const NodePtr& a, const NodePtr& b) {
  switch (op) {
    case Op::kAdd: return make_add(a, b);
    case Op::kSub: return make_sub(a, b);
    case Op::kMul: return make_mul(a, b);
    default: return make_div(a, b);
  }
}
NodePtr node_neg(const NodePtr& a) { return make_neg(a); }
NodePtr node_pow(const NodePtr& a, int k) { return make_pow(a, k); }
NodePtr node_function(Op op, const NodePtr& a) { return make_function(op, a); }
}  // namespace detail

// ---------------------------------------------------------------------------

int MultiIndex::order() const {
  int s = 0;
  for (int a : alpha) s += a;
  for (int b : beta) s += b;
  return s;
}

std::string MultiIndex::str() const {
  auto list = [](const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(v[i]);
    }
    return s;
  };
  if (alpha.size() == 1) return "(" + list(alpha) + "," + list(beta) + ")";
  return "(" + list(alpha) + ";" + list(beta) + ")";
}

std::vector<MultiIndex> multi_indices_of_order(int dim, int order) {
  std::vector<MultiIndex> out;
  std::vector<int> slots(static_cast<std::size_t>(2 * dim), 0);
  // Depth-first enumeration, largest first entry first.
  auto rec = [&](auto&& self, std::size_t pos, int remaining) -> void {
    if (pos + 1 == slots.size()) {
      slots[pos] = remaining;
      MultiIndex m;
      m.alpha.assign(slots.begin(), slots.begin() + dim);
      m.beta.assign(slots.begin() + dim, slots.end());
      out.push_back(std::move(m));
      return;
    }
    for (int k = remaining; k >= 0; --k) {
      slots[pos] = k;
      self(self, pos + 1, remaining - k);
    }
  };
  if (dim > 0 && order >= 0) rec(rec, 0, order);
  return out;
}

SymbolExpr::SymbolExpr(NodePtr root, int dim) : root_(std::move(root)), dim_(dim) {
  if (dim_ < 1) throw Error(ErrorKind::kInvalidArgument, "symbol dimension must be positive");
}

SymbolExpr SymbolExpr::constant(double c, int dim) { return {make_const(c), dim}; }
SymbolExpr SymbolExpr::time(int dim) { return {make_var(0), dim}; }
SymbolExpr SymbolExpr::position(int i, int dim) { return {make_var(1 + i), dim}; }
SymbolExpr SymbolExpr::frequency(int i, int dim) { return {make_var(1 + dim + i), dim}; }

double SymbolExpr::evaluate(double t, const PhasePoint& p) const {
  if (static_cast<int>(p.x.size()) != dim_ || static_cast<int>(p.xi.size()) != dim_)
    throw Error(ErrorKind::kDimensionMismatch, "phase point dimension does not match symbol");
  std::vector<double> vars;
  vars.reserve(static_cast<std::size_t>(2 * dim_ + 1));
  vars.push_back(t);
  vars.insert(vars.end(), p.x.begin(), p.x.end());
  vars.insert(vars.end(), p.xi.begin(), p.xi.end());
  return evaluate(vars);
}

double SymbolExpr::evaluate(std::span<const double> vars) const {
  return eval(root_, vars, dim_);
}

double SymbolExpr::evaluate_1d(double t, double x, double xi) const {
  if (dim_ != 1) throw Error(ErrorKind::kDimensionMismatch, "evaluate_1d on a symbol of dim > 1");
  const double vars[3] = {t, x, xi};
  return eval(root_, std::span<const double>(vars, 3), dim_);
}

std::string SymbolExpr::str() const { return print(root_, dim_); }

bool SymbolExpr::depends_on(int var) const { return uses_var(root_, var); }

SymbolExpr operator+(const SymbolExpr& a, const SymbolExpr& b) {
  return {make_add(a.root_, b.root_), a.dim_};
}
SymbolExpr operator-(const SymbolExpr& a, const SymbolExpr& b) {
  return {make_sub(a.root_, b.root_), a.dim_};
}
SymbolExpr operator*(const SymbolExpr& a, const SymbolExpr& b) {
  return {make_mul(a.root_, b.root_), a.dim_};
}
SymbolExpr operator/(const SymbolExpr& a, const SymbolExpr& b) {
  return {make_div(a.root_, b.root_), a.dim_};
}
SymbolExpr operator-(const SymbolExpr& a) { return {make_neg(a.root_), a.dim_}; }

SymbolExpr derivative(const SymbolExpr& expr, int var) {
  return {diff(expr.root(), var), expr.dim()};
}

SymbolExpr differentiate(const SymbolExpr& expr, const MultiIndex& idx, int t_order,
                         int order_cap) {
  const int n = expr.dim();
  if (static_cast<int>(idx.alpha.size()) != n || static_cast<int>(idx.beta.size()) != n)
    throw Error(ErrorKind::kDimensionMismatch, "multi-index dimension does not match symbol");
  if (t_order < 0) throw Error(ErrorKind::kInvalidArgument, "negative time order");
  for (int a : idx.alpha)
    if (a < 0) throw Error(ErrorKind::kInvalidArgument, "negative multi-index entry");
  for (int b : idx.beta)
    if (b < 0) throw Error(ErrorKind::kInvalidArgument, "negative multi-index entry");
  const int total = idx.order() + t_order;
  if (total > order_cap)
    throw Error(ErrorKind::kOrderCapExceeded,
                "derivative order " + std::to_string(total) + " exceeds cap " +
                    std::to_string(order_cap));
  NodePtr cur = expr.root();
  for (int k = 0; k < t_order; ++k) cur = diff(cur, 0);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < idx.alpha[static_cast<std::size_t>(i)]; ++k) cur = diff(cur, 1 + i);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < idx.beta[static_cast<std::size_t>(i)]; ++k) cur = diff(cur, 1 + n + i);
  return {cur, n};
}

SymbolExpr simplify(const SymbolExpr& expr) { return {rebuild(expr.root()), expr.dim()}; }

SymbolExpr substitute_time(const SymbolExpr& expr, double t) {
  return {substitute(expr.root(), 0, t), expr.dim()};
}

std::vector<std::pair<MultiIndex, SymbolExpr>> derivative_table(const SymbolExpr& expr, int lo,
                                                                int hi) {
  const int n = expr.dim();
  std::map<MultiIndex, SymbolExpr> known;
  MultiIndex zero{std::vector<int>(static_cast<std::size_t>(n), 0),
                  std::vector<int>(static_cast<std::size_t>(n), 0)};
  known.emplace(zero, expr);
  std::vector<std::pair<MultiIndex, SymbolExpr>> out;
  for (int order = 0; order <= hi; ++order) {
    for (const MultiIndex& m : multi_indices_of_order(n, order)) {
      if (order > 0) {
        // Peel one derivative off the first nonzero slot; its parent is known.
        MultiIndex parent = m;
        int var = 0;
        for (int i = 0; i < n && var == 0; ++i)
          if (parent.alpha[static_cast<std::size_t>(i)] > 0) {
            --parent.alpha[static_cast<std::size_t>(i)];
            var = 1 + i;
          }
        for (int i = 0; i < n && var == 0; ++i)
          if (parent.beta[static_cast<std::size_t>(i)] > 0) {
            --parent.beta[static_cast<std::size_t>(i)];
            var = 1 + n + i;
          }
        known.emplace(m, derivative(known.at(parent), var));
      }
      if (order >= lo) out.emplace_back(m, known.at(m));
    }
  }
  return out;
}

}  // namespace phaseflow
