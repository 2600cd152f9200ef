#include "vofrac/exprlang.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <optional>

namespace vofrac {

ParseError::ParseError(std::size_t offset, std::string message, std::string token)
    : std::runtime_error("parse error at offset " + std::to_string(offset) + ": " +
                         message + (token.empty() ? "" : " ('" + token + "')")),
      offset_(offset),
      detail_(std::move(message)),
      token_(std::move(token)) {}

namespace {

struct BuiltinInfo {
  std::string_view name;
  Builtin fn;
  int arity;
};

constexpr std::array<BuiltinInfo, 10> kBuiltins{{
    {"sin", Builtin::Sin, 1},
    {"cos", Builtin::Cos, 1},
    {"tan", Builtin::Tan, 1},
    {"exp", Builtin::Exp, 1},
    {"log", Builtin::Log, 1},
    {"sqrt", Builtin::Sqrt, 1},
    {"abs", Builtin::Abs, 1},
    {"min", Builtin::Min, 2},
    {"max", Builtin::Max, 2},
    {"pow", Builtin::Pow, 2},
}};

const BuiltinInfo* find_builtin(std::string_view name) {
  for (const auto& b : kBuiltins) {
    if (b.name == name) return &b;
  }
  return nullptr;
}

const BuiltinInfo& builtin_info(Builtin fn) {
  for (const auto& b : kBuiltins) {
    if (b.fn == fn) return b;
  }
  throw std::logic_error("unknown builtin");
}

double checked(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw EvalError(std::string("non-finite result in ") + what);
  }
  return v;
}

double power(double base, double exponent) {
  if (base == 0.0 && exponent < 0.0) throw EvalError("domain error: 0 raised to a negative power");
  if (base < 0.0 && exponent != std::trunc(exponent)) {
    throw EvalError("domain error: negative base with non-integer exponent");
  }
  return checked(std::pow(base, exponent), "power");
}

// Both the tree walker and the compiled program route through these two
// functions, so the two evaluation paths agree bit for bit.
double apply_binary(BinaryOp op, double lhs, double rhs) {
  switch (op) {
    case BinaryOp::Add: return checked(lhs + rhs, "addition");
    case BinaryOp::Sub: return checked(lhs - rhs, "subtraction");
    case BinaryOp::Mul: return checked(lhs * rhs, "multiplication");
    case BinaryOp::Div:
      if (rhs == 0.0) throw EvalError("domain error: division by zero");
      return checked(lhs / rhs, "division");
    case BinaryOp::Pow: return power(lhs, rhs);
  }
  throw std::logic_error("bad binary op");
}

double apply_call(Builtin fn, const double* args) {
  const double x = args[0];
  switch (fn) {
    case Builtin::Sin: return checked(std::sin(x), "sin");
    case Builtin::Cos: return checked(std::cos(x), "cos");
    case Builtin::Tan: return checked(std::tan(x), "tan");
    case Builtin::Exp: return checked(std::exp(x), "exp");
    case Builtin::Log:
      if (!(x > 0.0)) throw EvalError("domain error: log of non-positive value");
      return checked(std::log(x), "log");
    case Builtin::Sqrt:
      if (x < 0.0) throw EvalError("domain error: sqrt of negative value");
      return std::sqrt(x);
    case Builtin::Abs: return std::fabs(x);
    case Builtin::Min: return std::min(x, args[1]);
    case Builtin::Max: return std::max(x, args[1]);
    case Builtin::Pow: return power(x, args[1]);
  }
  throw std::logic_error("bad builtin");
}

// ---------------------------------------------------------------------------
// Parser

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  Expr run() {
    if (src_.empty()) throw ParseError(0, "empty expression", "");
    skip_ws();
    if (pos_ == src_.size()) throw ParseError(0, "empty expression", "");
    Expr e = expression();
    skip_ws();
    if (pos_ != src_.size()) {
      if (src_[pos_] == ')') fail(pos_, "unbalanced parenthesis", ")");
      fail(pos_, "unexpected token", std::string(1, src_[pos_]));
    }
    return e;
  }

 private:
  [[noreturn]] void fail(std::size_t at, const std::string& msg, std::string token) const {
    throw ParseError(std::min(at, src_.size() - 1), msg, std::move(token));
  }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expr expression() {
    Expr lhs = term();
    for (;;) {
      if (accept('+')) {
        lhs = Expr::binary(BinaryOp::Add, lhs, term());
      } else if (accept('-')) {
        lhs = Expr::binary(BinaryOp::Sub, lhs, term());
      } else {
        return lhs;
      }
    }
  }

  Expr term() {
    Expr lhs = factor();
    for (;;) {
      if (accept('*')) {
        lhs = Expr::binary(BinaryOp::Mul, lhs, factor());
      } else if (accept('/')) {
        lhs = Expr::binary(BinaryOp::Div, lhs, factor());
      } else {
        return lhs;
      }
    }
  }

  Expr factor() {
    if (accept('-')) return Expr::negate(factor());
    return power();
  }

  Expr power() {
    Expr base = atom();
    if (accept('^')) return Expr::binary(BinaryOp::Pow, base, factor());
    return base;
  }

  Expr atom() {
    skip_ws();
    if (pos_ == src_.size()) fail(pos_, "unexpected end of expression", "");
    const char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return name();
    if (c == '(') {
      const std::size_t open = pos_++;
      Expr inner = expression();
      if (!accept(')')) fail(open, "unbalanced parenthesis", "(");
      return inner;
    }
    if (c == ')') fail(pos_, "unbalanced parenthesis", ")");
    fail(pos_, "unexpected token", std::string(1, c));
  }

  Expr number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      const std::size_t from = pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      return pos_ - from;
    };
    bool ok = true;
    const std::size_t int_digits = digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      if (digits() == 0) ok = false;
    } else if (int_digits == 0) {
      ok = false;
    }
    if (ok && pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (digits() == 0) ok = false;
    }
    if (ok && pos_ < src_.size() &&
        (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.' ||
         src_[pos_] == '_')) {
      ok = false;
    }
    if (!ok) {
      std::size_t end = pos_;
      while (end < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[end])) ||
                                   src_[end] == '.' || src_[end] == '_')) {
        ++end;
      }
      fail(start, "malformed number", std::string(src_.substr(start, std::max(end, start + 1) - start)));
    }
    double value = 0.0;
    const auto text = src_.substr(start, pos_ - start);
    const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
      fail(start, "malformed number", std::string(text));
    }
    return Expr::constant(value);
  }

  Expr name() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
      ++pos_;
    }
    const std::string id(src_.substr(start, pos_ - start));
    skip_ws();
    const bool is_call = pos_ < src_.size() && src_[pos_] == '(';
    if (!is_call) {
      if (id == "pi") return Expr::constant(std::numbers::pi);
      if (id == "e") return Expr::constant(std::numbers::e);
      if (find_builtin(id)) fail(start, "function used without arguments", id);
      return Expr::variable(id);
    }
    const BuiltinInfo* info = find_builtin(id);
    if (!info) fail(start, "unknown function", id);
    const std::size_t open = pos_++;
    std::vector<Expr> args;
    args.push_back(expression());
    while (accept(',')) args.push_back(expression());
    if (!accept(')')) fail(open, "unbalanced parenthesis", "(");
    if (static_cast<int>(args.size()) != info->arity) {
      fail(start, "wrong number of arguments: expected " + std::to_string(info->arity) +
                      ", got " + std::to_string(args.size()),
           id);
    }
    return Expr::call(info->fn, std::move(args));
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

double eval_node(const ExprNode& n, const EvalScope& scope) {
  switch (n.kind) {
    case NodeKind::Constant: return n.value;
    case NodeKind::Variable: {
      const auto it = scope.find(n.name);
      if (it == scope.end()) throw EvalError("unbound variable '" + n.name + "'");
      return it->second;
    }
    case NodeKind::Negate: return -eval_node(n.children[0].node(), scope);
    case NodeKind::Binary:
      return apply_binary(n.op, eval_node(n.children[0].node(), scope),
                          eval_node(n.children[1].node(), scope));
    case NodeKind::Call: {
      std::array<double, 2> args{};
      for (std::size_t i = 0; i < n.children.size(); ++i) {
        args[i] = eval_node(n.children[i].node(), scope);
      }
      return apply_call(n.fn, args.data());
    }
  }
  throw std::logic_error("bad node");
}

void collect_vars(const ExprNode& n, std::set<std::string>& out) {
  if (n.kind == NodeKind::Variable) out.insert(n.name);
  for (const auto& c : n.children) collect_vars(c.node(), out);
}

void print_node(const ExprNode& n, std::string& out) {
  switch (n.kind) {
    case NodeKind::Constant: {
      std::array<char, 32> buf{};
      std::snprintf(buf.data(), buf.size(), "%.17g", std::fabs(n.value));
      if (std::signbit(n.value)) {
        out += "(-";
        out += buf.data();
        out += ')';
      } else {
        out += buf.data();
      }
      return;
    }
    case NodeKind::Variable: out += n.name; return;
    case NodeKind::Negate:
      out += "(-";
      print_node(n.children[0].node(), out);
      out += ')';
      return;
    case NodeKind::Binary: {
      static constexpr std::array<char, 5> ops{'+', '-', '*', '/', '^'};
      out += '(';
      print_node(n.children[0].node(), out);
      out += ops[static_cast<int>(n.op)];
      print_node(n.children[1].node(), out);
      out += ')';
      return;
    }
    case NodeKind::Call:
      out += builtin_info(n.fn).name;
      out += '(';
      for (std::size_t i = 0; i < n.children.size(); ++i) {
        if (i) out += ',';
        print_node(n.children[i].node(), out);
      }
      out += ')';
      return;
  }
}

// ---------------------------------------------------------------------------
// Compiled form used by bound handles: a postfix program over variable slots.

enum class OpCode { PushConst, PushSlot, Neg, Binary, Call };

struct Instr {
  OpCode code;
  double value = 0.0;
  int slot = 0;
  BinaryOp op = BinaryOp::Add;
  Builtin fn = Builtin::Sin;
  int arity = 0;
};

class Program {
 public:
  Program(const Expr& expr, const std::vector<std::string>& slots) {
    int depth = 0;
    emit(expr.node(), slots, depth);
  }

  template <std::size_t N>
  double run(const std::array<double, N>& vars) const {
    constexpr std::size_t kInline = 64;
    std::array<double, kInline> inline_stack;
    std::vector<double> heap_stack;
    double* stack = inline_stack.data();
    if (max_depth_ > kInline) {
      heap_stack.resize(max_depth_);
      stack = heap_stack.data();
    }
    std::size_t top = 0;
    stack[0] = 0.0;
    for (const Instr& in : code_) {
      switch (in.code) {
        case OpCode::PushConst: stack[top++] = in.value; break;
        case OpCode::PushSlot: stack[top++] = vars[static_cast<std::size_t>(in.slot)]; break;
        case OpCode::Neg: stack[top - 1] = -stack[top - 1]; break;
        case OpCode::Binary:
          --top;
          stack[top - 1] = apply_binary(in.op, stack[top - 1], stack[top]);
          break;
        case OpCode::Call:
          top -= static_cast<std::size_t>(in.arity);
          stack[top] = apply_call(in.fn, stack + top);
          ++top;
          break;
      }
    }
    return stack[0];
  }

 private:
  void emit(const ExprNode& n, const std::vector<std::string>& slots, int& depth) {
    switch (n.kind) {
      case NodeKind::Constant:
        code_.push_back({OpCode::PushConst, n.value});
        bump(depth, 1);
        return;
      case NodeKind::Variable: {
        const auto it = std::find(slots.begin(), slots.end(), n.name);
        Instr in{OpCode::PushSlot};
        in.slot = static_cast<int>(it - slots.begin());
        code_.push_back(in);
        bump(depth, 1);
        return;
      }
      case NodeKind::Negate:
        emit(n.children[0].node(), slots, depth);
        code_.push_back({OpCode::Neg});
        return;
      case NodeKind::Binary: {
        emit(n.children[0].node(), slots, depth);
        emit(n.children[1].node(), slots, depth);
        Instr in{OpCode::Binary};
        in.op = n.op;
        code_.push_back(in);
        bump(depth, -1);
        return;
      }
      case NodeKind::Call: {
        for (const auto& c : n.children) emit(c.node(), slots, depth);
        Instr in{OpCode::Call};
        in.fn = n.fn;
        in.arity = static_cast<int>(n.children.size());
        code_.push_back(in);
        bump(depth, 1 - in.arity);
        return;
      }
    }
  }

  void bump(int& depth, int delta) {
    depth += delta;
    max_depth_ = std::max<std::size_t>(max_depth_, static_cast<std::size_t>(depth));
  }

  std::vector<Instr> code_;
  std::size_t max_depth_ = 1;
};

void require_subset(const Expr& expr, const std::vector<std::string>& allowed) {
  for (const auto& v : free_vars(expr)) {
    if (std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
      std::string names;
      for (const auto& a : allowed) names += (names.empty() ? "" : ", ") + a;
      throw BindError("free variable '" + v + "' is not one of {" + names + "} in '" +
                      expr.print() + "'");
    }
  }
}

BoxCheck sample_box(const BivariateFn& fn, const Box& box, int n, bool lower_triangle_only,
                    const std::function<bool(double)>& accept) {
  if (n < 2) throw std::invalid_argument("grid needs at least 2 points per axis");
  if (!(box.hi1 > box.lo1) || !(box.hi2 > box.lo2)) {
    throw std::invalid_argument("degenerate sampling box");
  }
  BoxCheck out;
  out.pass = true;
  out.min_value = std::numeric_limits<double>::infinity();
  out.max_value = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const double u = i == n - 1 ? box.hi1 : box.lo1 + (box.hi1 - box.lo1) * i / (n - 1);
    for (int j = 0; j < n; ++j) {
      const double v = j == n - 1 ? box.hi2 : box.lo2 + (box.hi2 - box.lo2) * j / (n - 1);
      if (lower_triangle_only && v > u) continue;
      double value = 0.0;
      try {
        value = fn(u, v);
      } catch (const EvalError&) {
        out.pass = false;
        continue;
      }
      out.min_value = std::min(out.min_value, value);
      out.max_value = std::max(out.max_value, value);
      if (!accept(value)) out.pass = false;
    }
  }
  return out;
}

}  // namespace

Expr Expr::constant(double value) {
  auto n = std::make_shared<ExprNode>();
  n->kind = NodeKind::Constant;
  n->value = value;
  return Expr(std::move(n));
}

Expr Expr::variable(std::string name) {
  auto n = std::make_shared<ExprNode>();
  n->kind = NodeKind::Variable;
  n->name = std::move(name);
  return Expr(std::move(n));
}

Expr Expr::negate(Expr child) {
  auto n = std::make_shared<ExprNode>();
  n->kind = NodeKind::Negate;
  n->children.push_back(std::move(child));
  return Expr(std::move(n));
}

Expr Expr::binary(BinaryOp op, Expr lhs, Expr rhs) {
  auto n = std::make_shared<ExprNode>();
  n->kind = NodeKind::Binary;
  n->op = op;
  n->children.push_back(std::move(lhs));
  n->children.push_back(std::move(rhs));
  return Expr(std::move(n));
}

Expr Expr::call(Builtin fn, std::vector<Expr> args) {
  if (static_cast<int>(args.size()) != builtin_info(fn).arity) {
    throw std::invalid_argument("wrong arity for " + std::string(builtin_info(fn).name));
  }
  auto n = std::make_shared<ExprNode>();
  n->kind = NodeKind::Call;
  n->fn = fn;
  n->children = std::move(args);
  return Expr(std::move(n));
}

std::string Expr::print() const {
  std::string out;
  print_node(*root_, out);
  return out;
}

Expr parse(std::string_view source) { return Parser(source).run(); }

double evaluate(const Expr& expr, const EvalScope& scope) { return eval_node(expr.node(), scope); }

std::set<std::string> free_vars(const Expr& expr) {
  std::set<std::string> out;
  collect_vars(expr.node(), out);
  return out;
}

UnivariateFn bind_univariate(const Expr& expr, const std::string& var) {
  require_subset(expr, {var});
  auto program = std::make_shared<const Program>(expr, std::vector<std::string>{var});
  return [program](double v) { return program->run(std::array<double, 1>{v}); };
}

BivariateFn bind_bivariate(const Expr& expr, const std::string& var1, const std::string& var2) {
  require_subset(expr, {var1, var2});
  auto program = std::make_shared<const Program>(expr, std::vector<std::string>{var1, var2});
  return [program](double u, double v) { return program->run(std::array<double, 2>{u, v}); };
}

BoxCheck check_positive_on_box(const BivariateFn& fn, const Box& box, int n, double floor,
                               bool lower_triangle_only) {
  return sample_box(fn, box, n, lower_triangle_only, [floor](double v) { return v > floor; });
}

BoxCheck check_bounded_on_box(const BivariateFn& fn, const Box& box, int n, double floor,
                              double ceiling, bool lower_triangle_only) {
  return sample_box(fn, box, n, lower_triangle_only,
                    [floor, ceiling](double v) { return v > floor && v < ceiling; });
}

}  // namespace vofrac
