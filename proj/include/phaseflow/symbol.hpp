#pragma once

// Real symbols q(t, x, xi) as immutable expression trees with exact symbolic
// derivatives. Every other module obtains a, b and their derivatives here.

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "phaseflow/phase_point.hpp"

namespace phaseflow {

enum class Op {
  kConst,
  kVar,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kNeg,
  kPow,  // integer exponent
  kSin,
  kCos,
  kExp,
  kTanh,
  kSqrt,
  kLog,
};

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  Op op = Op::kConst;
  double value = 0.0;  // kConst
  int var = 0;         // kVar: 0 = t, 1..n = x_i, n+1..2n = xi_i
  int exponent = 0;    // kPow
  NodePtr lhs;         // unary operand or left operand
  NodePtr rhs;
};

/// Default cap on the total derivative order accepted by differentiate().
inline constexpr int kDefaultOrderCap = 8;

/// Derivative orders: alpha counts x-derivatives, beta xi-derivatives.
struct MultiIndex {
  std::vector<int> alpha;
  std::vector<int> beta;

  int order() const;
  /// "(a1,..;b1,..)" for n > 1, "(a,b)" for n = 1.
  std::string str() const;

  friend bool operator==(const MultiIndex&, const MultiIndex&) = default;
  friend auto operator<=>(const MultiIndex&, const MultiIndex&) = default;
};

/// All multi-indices in dimension `dim` with |alpha| + |beta| == order, in
/// descending lexicographic order of (alpha, beta). For dim 1 and order 2
/// this is (2,0), (1,1), (0,2).
std::vector<MultiIndex> multi_indices_of_order(int dim, int order);

class SymbolExpr {
 public:
  SymbolExpr(NodePtr root, int dim);

  static SymbolExpr constant(double c, int dim);
  static SymbolExpr time(int dim);
  static SymbolExpr position(int i, int dim);   // x_{i+1}
  static SymbolExpr frequency(int i, int dim);  // xi_{i+1}

  int dim() const { return dim_; }
  const NodePtr& root() const { return root_; }

  /// Evaluates at (t, p). Throws EvaluationDomainError instead of returning
  /// NaN or Inf.
  double evaluate(double t, const PhasePoint& p) const;
  /// Evaluates with the packed variable vector (t, x_1..x_n, xi_1..xi_n).
  double evaluate(std::span<const double> vars) const;
  double evaluate_1d(double t, double x, double xi) const;

  /// Re-parseable text form; literals are printed with 17 significant digits.
  std::string str() const;

  bool is_constant() const { return root_->op == Op::kConst; }
  bool is_zero() const { return is_constant() && root_->value == 0.0; }
  bool depends_on(int var) const;
  bool depends_on_time() const { return depends_on(0); }

  friend SymbolExpr operator+(const SymbolExpr& a, const SymbolExpr& b);
  friend SymbolExpr operator-(const SymbolExpr& a, const SymbolExpr& b);
  friend SymbolExpr operator*(const SymbolExpr& a, const SymbolExpr& b);
  friend SymbolExpr operator/(const SymbolExpr& a, const SymbolExpr& b);
  friend SymbolExpr operator-(const SymbolExpr& a);

 private:
  NodePtr root_;
  int dim_;
};

/// Parses `text` over variables t, x1..xn, xi1..xin (x and xi when dim == 1).
/// Grammar in docs/grammar.md. Throws SyntaxError, UnknownIdentifier or
/// DimensionMismatch.
SymbolExpr parse_symbol(std::string_view text, int dim);

/// Exact derivative d^alpha_x d^beta_xi d^t_order_t of `expr`, simplified.
/// Throws Error(kOrderCapExceeded) when the total order exceeds `order_cap`.
SymbolExpr differentiate(const SymbolExpr& expr, const MultiIndex& idx,
                         int t_order = 0, int order_cap = kDefaultOrderCap);

/// First derivative with respect to one packed variable index.
SymbolExpr derivative(const SymbolExpr& expr, int var);

/// Rebuilds the tree bottom-up through the folding constructors.
SymbolExpr simplify(const SymbolExpr& expr);

/// Replaces t by the literal `t`.
SymbolExpr substitute_time(const SymbolExpr& expr, double t);

/// Every derivative of order lo..hi (inclusive), each obtained from a lower
/// order entry by one further differentiation.
std::vector<std::pair<MultiIndex, SymbolExpr>> derivative_table(
    const SymbolExpr& expr, int lo, int hi);

}  // namespace phaseflow
