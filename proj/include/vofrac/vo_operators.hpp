#pragma once

// Left Riemann-Liouville operators of variable order alpha(t, s):
//
//   I^alpha f(t) = int_a^t (t-s)^(alpha(t,s)-1) / Gamma(alpha(t,s)) f(s) ds
//   D^alpha f(t) = d/dt I^(1-alpha) f(t),   0 < alpha < 1

#include <cstdint>
#include <map>
#include <memory>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <utility>

#include "vofrac/exprlang.hpp"
#include "vofrac/quadrature.hpp"

namespace vofrac {

struct OperatorValue {
  double value = 0.0;
  double err_estimate = 0.0;
  bool converged = true;
};

/// Thrown when an order function leaves its admissible codomain on the
/// working triangle a <= s <= t <= upper.
class OrderCodomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Memo of unit integrals I^alpha(1)(t), keyed by operator fingerprint and t.
/// Lives for one run; concurrent duplicate computation is harmless because
/// values are deterministic.
class UnitIntegralMemo {
 public:
  bool lookup(const std::string& fingerprint, double t, OperatorValue& out) const;
  void store(const std::string& fingerprint, double t, const OperatorValue& value);
  std::size_t size() const;

 private:
  using Key = std::pair<std::string, std::uint64_t>;
  mutable std::shared_mutex mutex_;
  std::map<Key, OperatorValue> values_;
};

/// Number of grid points per axis used to validate order functions.
inline constexpr int kOrderCheckGrid = 65;

class VOIntegralOperator {
 public:
  /// Order given as an expression in t and s, validated positive on the
  /// triangle a <= s <= t <= upper.
  VOIntegralOperator(double a, const Expr& order, double upper, QuadSpec spec = {},
                     std::shared_ptr<UnitIntegralMemo> memo = nullptr);

  /// Order given as a function handle. `fingerprint` must identify the order
  /// function uniquely within a run; it keys the unit-integral memo.
  VOIntegralOperator(double a, BivariateFn order, std::string fingerprint, double upper,
                     QuadSpec spec = {}, std::shared_ptr<UnitIntegralMemo> memo = nullptr);

  double a() const { return a_; }
  double upper() const { return upper_; }
  const QuadSpec& spec() const { return spec_; }
  double order(double t, double s) const { return order_(t, s); }
  const BivariateFn& order_fn() const { return order_; }
  const std::string& order_fingerprint() const { return order_key_; }
  const std::shared_ptr<UnitIntegralMemo>& memo() const { return memo_; }

  /// Identity used by the unit-integral memo: order, lower limit and policy.
  std::string fingerprint() const;

  VOIntegralOperator with_spec(const QuadSpec& spec) const;

 private:
  double a_;
  double upper_;
  BivariateFn order_;
  std::string order_key_;
  QuadSpec spec_;
  std::shared_ptr<UnitIntegralMemo> memo_;
};

enum class FdMode { Central, Forward };

class VODerivativeOperator {
 public:
  /// Order validated inside (0, 1) on the triangle up to upper + 2h, the
  /// furthest point a finite-difference stencil reaches.
  VODerivativeOperator(double a, const Expr& order, double upper, QuadSpec spec = {},
                       double fd_step = 1e-5, FdMode fd_mode = FdMode::Central,
                       std::shared_ptr<UnitIntegralMemo> memo = nullptr);

  double a() const { return integral_.a(); }
  double fd_step() const { return fd_step_; }
  FdMode fd_mode() const { return fd_mode_; }
  /// The order 1 - alpha integral the derivative differentiates.
  const VOIntegralOperator& complementary_integral() const { return integral_; }

  /// Absolute step used at t.
  double step_at(double t) const;

 private:
  double fd_step_;
  FdMode fd_mode_;
  VOIntegralOperator integral_;
};

OperatorValue vo_integral(const VOIntegralOperator& op, const UnivariateFn& f, double t);

/// vo_integral with f = 1, memoised when the operator carries a memo.
OperatorValue vo_integral_unit(const VOIntegralOperator& op, double t);

OperatorValue vo_derivative(const VODerivativeOperator& op, const UnivariateFn& f, double t);

/// Gamma(mu+1) / Gamma(mu+1+alpha) (t-a)^(mu+alpha): constant-order integral
/// of (s-a)^mu.
double constant_order_power_oracle(double alpha, double mu, double a, double t);

/// Gamma(mu+1) / Gamma(mu+1-alpha) (t-a)^(mu-alpha): constant-order
/// derivative of (s-a)^mu.
double constant_order_power_derivative_oracle(double alpha, double mu, double a, double t);

}  // namespace vofrac
