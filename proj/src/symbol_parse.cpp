// Recursive-descent parser for the symbol expression language.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('-' | '+') unary | power
//   power   := primary ('^' exponent)?
//   exponent:= ['-' | '+'] INTEGER | '(' ['-' | '+'] INTEGER ')'
//   primary := NUMBER | VARIABLE | FUNC '(' expr ')' | '(' expr ')'

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <string>

#include "phaseflow/error.hpp"
#include "phaseflow/symbol.hpp"

namespace phaseflow {

namespace detail {
NodePtr node_const(double c);
NodePtr node_var(int v);
NodePtr node_binary(Op op, const NodePtr& a, const NodePtr& b);
NodePtr node_neg(const NodePtr& a);
NodePtr node_pow(const NodePtr& a, int k);
NodePtr node_function(Op op, const NodePtr& a);
}  // namespace detail

namespace {

class Parser {
 public:
  Parser(std::string_view text, int dim) : text_(text), dim_(dim) {}

  NodePtr parse() {
    NodePtr e = expr();
    skip_ws();
    if (pos_ < text_.size())
      fail({"operator", "end of input"});
    return e;
  }

 private:
  std::string_view text_;
  int dim_;
  std::size_t pos_ = 0;

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  std::string found() {
    skip_ws();
    if (pos_ >= text_.size()) return "end of input";
    return "'" + std::string(1, text_[pos_]) + "'";
  }

  [[noreturn]] void fail(std::vector<std::string> expected) {
    const std::string f = found();
    throw SyntaxError(pos_, std::move(expected), f);
  }

  void expect(char c) {
    if (peek() != c) fail({std::string("'") + c + "'"});
    ++pos_;
  }

  NodePtr expr() {
    NodePtr lhs = term();
    for (;;) {
      const char c = peek();
      if (c != '+' && c != '-') return lhs;
      ++pos_;
      NodePtr rhs = term();
      lhs = detail::node_binary(c == '+' ? Op::kAdd : Op::kSub, lhs, rhs);
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    for (;;) {
      const char c = peek();
      if (c != '*' && c != '/') return lhs;
      ++pos_;
      NodePtr rhs = unary();
      lhs = detail::node_binary(c == '*' ? Op::kMul : Op::kDiv, lhs, rhs);
    }
  }

  NodePtr unary() {
    const char c = peek();
    if (c == '-') {
      ++pos_;
      return detail::node_neg(unary());
    }
    if (c == '+') {
      ++pos_;
      return unary();
    }
    return power();
  }

  NodePtr power() {
    NodePtr base = primary();
    if (peek() != '^') return base;
    ++pos_;
    const bool paren = peek() == '(';
    if (paren) ++pos_;
    int sign = 1;
    if (peek() == '-' || peek() == '+') {
      sign = text_[pos_] == '-' ? -1 : 1;
      ++pos_;
    }
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (start == pos_) fail({"integer exponent"});
    if (pos_ < text_.size() && (text_[pos_] == '.' || text_[pos_] == 'e' || text_[pos_] == 'E')) {
      pos_ = start;
      fail({"integer exponent"});
    }
    const std::string digits(text_.substr(start, pos_ - start));
    if (digits.size() > 6) {
      pos_ = start;
      fail({"integer exponent below 1000000"});
    }
    const int k = sign * std::stoi(digits);
    if (paren) expect(')');
    return detail::node_pow(base, k);
  }

  NodePtr number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    if (pos_ == start + 1 && text_[start] == '.') {
      pos_ = start;
      fail({"number"});
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < text_.size() && (text_[p] == '+' || text_[p] == '-')) ++p;
      const std::size_t dstart = p;
      while (p < text_.size() && std::isdigit(static_cast<unsigned char>(text_[p]))) ++p;
      if (p == dstart) {
        pos_ = p;
        fail({"exponent digits"});
      }
      pos_ = p;
    }
    const std::string lit(text_.substr(start, pos_ - start));
    const double v = std::strtod(lit.c_str(), nullptr);
    if (!std::isfinite(v)) {
      pos_ = start;
      fail({"finite number"});
    }
    return detail::node_const(v);
  }

  NodePtr primary() {
    const char c = peek();
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (c == '(') {
      ++pos_;
      NodePtr e = expr();
      expect(')');
      return e;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    fail({"number", "identifier", "'('", "'-'"});
  }

  NodePtr identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    const std::string name(text_.substr(start, pos_ - start));

    static const std::pair<const char*, Op> kFunctions[] = {
        {"sin", Op::kSin},   {"cos", Op::kCos},   {"exp", Op::kExp},
        {"tanh", Op::kTanh}, {"sqrt", Op::kSqrt}, {"log", Op::kLog},
    };
    for (const auto& [fname, op] : kFunctions) {
      if (name == fname) {
        expect('(');
        NodePtr arg = expr();
        expect(')');
        return detail::node_function(op, arg);
      }
    }

    if (name == "t") return detail::node_var(0);
    if (name == "x" || name == "xi") {
      if (dim_ != 1)
        throw DimensionMismatch(start, "alias '" + name + "' at offset " +
                                           std::to_string(start) +
                                           " requires dim 1; use indexed names");
      return detail::node_var(name == "x" ? 1 : 2);
    }
    // Indexed variables x<k>, xi<k>.
    std::size_t prefix = 0;
    if (name.rfind("xi", 0) == 0) prefix = 2;
    else if (name.rfind("x", 0) == 0) prefix = 1;
    if (prefix > 0 && name.size() > prefix) {
      const std::string digits = name.substr(prefix);
      bool all_digits = digits.size() <= 6 && digits[0] != '0';
      for (char d : digits) all_digits = all_digits && std::isdigit(static_cast<unsigned char>(d));
      if (all_digits) {
        const int k = std::stoi(digits);
        if (k > dim_)
          throw DimensionMismatch(start, "variable '" + name + "' at offset " +
                                             std::to_string(start) + " exceeds dim " +
                                             std::to_string(dim_));
        return detail::node_var(prefix == 1 ? k : dim_ + k);
      }
    }
    throw UnknownIdentifier(start, name);
  }
};

}  // namespace

SymbolExpr parse_symbol(std::string_view text, int dim) {
  if (dim < 1) throw Error(ErrorKind::kInvalidArgument, "dim must be a positive integer");
  Parser p(text, dim);
  return SymbolExpr(p.parse(), dim);
}

}  // namespace phaseflow
