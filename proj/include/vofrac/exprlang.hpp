#pragma once

// Small arithmetic expression language used to describe integrands and
// order functions as text.
//
//   expression := term (('+' | '-') term)*
//   term       := factor (('*' | '/') factor)*
//   factor     := '-' factor | power
//   power      := atom ('^' factor)?
//   atom       := number | name | name '(' expression (',' expression)* ')'
//               | '(' expression ')'
//
// '^' is right-associative and binds tighter than unary minus, so
// "-2^2" is -4 and "2^3^2" is 512. The names pi and e are constants.

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vofrac {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t offset, std::string message, std::string token);

  std::size_t offset() const noexcept { return offset_; }
  const std::string& token() const noexcept { return token_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::size_t offset_;
  std::string detail_;
  std::string token_;
};

/// Raised for unbound variables and for arithmetic domain violations
/// (log of a non-positive number, division by zero, 0^negative, ...).
class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an expression is bound to fewer variables than it uses.
class BindError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class BinaryOp { Add, Sub, Mul, Div, Pow };
enum class Builtin { Sin, Cos, Tan, Exp, Log, Sqrt, Abs, Min, Max, Pow };

struct ExprNode;

/// Immutable expression tree. Copies share structure.
class Expr {
 public:
  static Expr constant(double value);
  static Expr variable(std::string name);
  static Expr negate(Expr child);
  static Expr binary(BinaryOp op, Expr lhs, Expr rhs);
  static Expr call(Builtin fn, std::vector<Expr> args);

  const ExprNode& node() const { return *root_; }

  /// Fully parenthesized text that parses back to an equivalent tree.
  std::string print() const;

 private:
  explicit Expr(std::shared_ptr<const ExprNode> root) : root_(std::move(root)) {}
  std::shared_ptr<const ExprNode> root_;
};

enum class NodeKind { Constant, Variable, Negate, Binary, Call };

struct ExprNode {
  NodeKind kind;
  double value = 0.0;
  std::string name;
  BinaryOp op = BinaryOp::Add;
  Builtin fn = Builtin::Sin;
  std::vector<Expr> children;
};

using EvalScope = std::map<std::string, double, std::less<>>;

Expr parse(std::string_view source);

double evaluate(const Expr& expr, const EvalScope& scope);

std::set<std::string> free_vars(const Expr& expr);

using UnivariateFn = std::function<double(double)>;
using BivariateFn = std::function<double(double, double)>;

UnivariateFn bind_univariate(const Expr& expr, const std::string& var);
BivariateFn bind_bivariate(const Expr& expr, const std::string& var1,
                           const std::string& var2);

struct BoxCheck {
  bool pass = false;
  double min_value = 0.0;
  double max_value = 0.0;
};

struct Box {
  double lo1, hi1, lo2, hi2;
};

/// Samples an n-by-n grid (corners included) and fails if any sample is
/// <= floor or cannot be evaluated. With lower_triangle_only, samples with
/// the second coordinate above the first are skipped (the s <= t region of
/// an order function).
BoxCheck check_positive_on_box(const BivariateFn& fn, const Box& box, int n,
                               double floor, bool lower_triangle_only = false);

/// Same grid as check_positive_on_box; passes iff floor < value < ceiling
/// at every sample.
BoxCheck check_bounded_on_box(const BivariateFn& fn, const Box& box, int n,
                              double floor, double ceiling,
                              bool lower_triangle_only = false);

}  // namespace vofrac
