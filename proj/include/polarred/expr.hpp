#pragma once

// Closed-form scalar expressions: parse, print, bind against a variable list,
// and evaluate in double or dual arithmetic.
//
// Grammar (lowest to highest precedence):
//   sum     := product (('+' | '-') product)*
//   product := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?          // right-associative
//   primary := number | identifier | 'pi' | func '(' args ')' | '(' sum ')'

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "polarred/dual.hpp"
#include "polarred/errors.hpp"

namespace polarred {

enum class ExprKind : std::uint8_t {
  Number,
  Pi,
  Variable,
  Neg,
  Add,
  Sub,
  Mul,
  Div,
  Pow,
  Sin,
  Cos,
  Tan,
  Exp,
  Log,
  Sqrt,
  Atan2,
};

/// Immutable expression tree. Copies share nodes.
class Expr {
 public:
  struct Node {
    ExprKind kind;
    double value = 0.0;
    std::string name;
    std::vector<Expr> args;
    std::size_t begin = 0, end = 0;  // byte span in the parsed source
  };

  Expr() = default;

  static Expr number(double v);
  static Expr pi();
  static Expr variable(std::string name);
  static Expr unary(ExprKind kind, Expr arg);
  static Expr binary(ExprKind kind, Expr lhs, Expr rhs);

  bool empty() const { return node_ == nullptr; }
  ExprKind kind() const { return node_->kind; }
  double value() const { return node_->value; }
  const std::string& name() const { return node_->name; }
  const std::vector<Expr>& args() const { return node_->args; }
  std::size_t begin() const { return node_->begin; }
  std::size_t end() const { return node_->end; }

  /// Source text this tree was parsed from, empty for built trees.
  const std::string& source() const;

  /// Structural equality; source spans are ignored.
  friend bool operator==(const Expr& a, const Expr& b);

 private:
  friend class Parser;
  friend Expr parse(std::string_view source);
  explicit Expr(std::shared_ptr<const Node> node, std::shared_ptr<const std::string> src = {})
      : node_(std::move(node)), source_(std::move(src)) {}

  std::shared_ptr<const Node> node_;
  std::shared_ptr<const std::string> source_;
};

Expr parse(std::string_view source);

/// Canonical text. parse(to_string(e)) == e.
std::string to_string(const Expr& e);

/// Canonical text of an expression source string (parse then print).
std::string canonical_source(std::string_view source);

/// True when no variable occurs in the tree.
bool is_constant(const Expr& e);

/// Names of variables referenced, in first-occurrence order.
std::vector<std::string> free_variables(const Expr& e);

/// Shortest decimal text that reads back to exactly `v`.
std::string format_number(double v);

// ---------------------------------------------------------------------------

/// An expression compiled against an ordered variable list. Evaluation is a
/// postfix program run on a small stack; reentrant and thread-safe.
class ScalarField {
 public:
  ScalarField() = default;

  /// Throws UnknownIdentifier for variables not in `variables`.
  ScalarField(Expr expr, std::vector<std::string> variables);

  const Expr& expr() const { return expr_; }
  const std::vector<std::string>& variables() const { return *variables_; }
  std::size_t arity() const { return variables_ ? variables_->size() : 0; }
  bool constant() const { return constant_; }
  std::string text() const { return to_string(expr_); }

  template <class T>
  T evaluate(std::span<const T> x) const;

  double operator()(std::span<const double> x) const { return evaluate<double>(x); }

  /// Value and exact gradient with respect to the first `width` variables.
  Dual<double> evaluate_dual(std::span<const double> x, std::size_t width) const;

 private:
  struct Instr {
    ExprKind op;
    std::uint32_t index = 0;  // variable slot
    double value = 0.0;       // literal
    std::uint32_t expr_id = 0;
  };

  [[noreturn]] void domain_error(const char* what, std::uint32_t expr_id) const;

  template <class T>
  T run(std::span<const T> x, T* stack) const;

  Expr expr_;
  std::shared_ptr<const std::vector<std::string>> variables_;
  std::vector<Instr> program_;
  std::vector<Expr> subexprs_;  // for error reports, indexed by expr_id
  std::size_t depth_ = 0;
  bool constant_ = true;
};

template <class T>
T ScalarField::evaluate(std::span<const T> x) const {
  constexpr std::size_t kInline = 32;
  if (depth_ <= kInline) {
    std::array<T, kInline> stack;
    return run<T>(x, stack.data());
  }
  std::vector<T> stack(depth_);
  return run<T>(x, stack.data());
}

template <class T>
T ScalarField::run(std::span<const T> x, T* stack) const {
  using std::atan2;
  using std::cos;
  using std::exp;
  using std::log;
  using std::pow;
  using std::sin;
  using std::sqrt;
  using std::tan;
  std::size_t sp = 0;
  for (const Instr& in : program_) {
    switch (in.op) {
      case ExprKind::Number:
      case ExprKind::Pi:
        stack[sp++] = T(in.value);
        continue;
      case ExprKind::Variable:
        stack[sp++] = x[in.index];
        continue;
      case ExprKind::Neg:
        stack[sp - 1] = -stack[sp - 1];
        break;
      case ExprKind::Add:
        --sp;
        stack[sp - 1] = stack[sp - 1] + stack[sp];
        break;
      case ExprKind::Sub:
        --sp;
        stack[sp - 1] = stack[sp - 1] - stack[sp];
        break;
      case ExprKind::Mul:
        --sp;
        stack[sp - 1] = stack[sp - 1] * stack[sp];
        break;
      case ExprKind::Div:
        --sp;
        if (primal(stack[sp]) == 0.0) domain_error("division by zero", in.expr_id);
        stack[sp - 1] = stack[sp - 1] / stack[sp];
        break;
      case ExprKind::Pow:
        --sp;
        if (has_partials(stack[sp]) && primal(stack[sp - 1]) <= 0.0)
          domain_error("power with variable exponent needs a positive base", in.expr_id);
        stack[sp - 1] = pow(stack[sp - 1], stack[sp]);
        break;
      case ExprKind::Sin:
        stack[sp - 1] = sin(stack[sp - 1]);
        break;
      case ExprKind::Cos:
        stack[sp - 1] = cos(stack[sp - 1]);
        break;
      case ExprKind::Tan:
        stack[sp - 1] = tan(stack[sp - 1]);
        break;
      case ExprKind::Exp:
        stack[sp - 1] = exp(stack[sp - 1]);
        break;
      case ExprKind::Log:
        if (primal(stack[sp - 1]) <= 0.0) domain_error("log of nonpositive value", in.expr_id);
        stack[sp - 1] = log(stack[sp - 1]);
        break;
      case ExprKind::Sqrt:
        if (primal(stack[sp - 1]) < 0.0) domain_error("sqrt of negative value", in.expr_id);
        stack[sp - 1] = sqrt(stack[sp - 1]);
        break;
      case ExprKind::Atan2:
        --sp;
        if (primal(stack[sp - 1]) == 0.0 && primal(stack[sp]) == 0.0)
          domain_error("atan2 at the origin", in.expr_id);
        stack[sp - 1] = atan2(stack[sp - 1], stack[sp]);
        break;
    }
    if (!all_finite(stack[sp - 1])) domain_error("non-finite result", in.expr_id);
  }
  return stack[0];
}

}  // namespace polarred
