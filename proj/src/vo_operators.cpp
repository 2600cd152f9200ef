#include "vofrac/vo_operators.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>

#include "vofrac/specialfn.hpp"

namespace vofrac {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Box working_triangle(double a, double upper) {
  // A zero-width working interval still needs a non-degenerate sampling box.
  const double hi = upper > a ? upper : a + std::max(1.0, std::fabs(a)) * 1e-12;
  return {a, hi, a, hi};
}

void validate_positive(const BivariateFn& order, const std::string& label, double a, double upper) {
  const BoxCheck check =
      check_positive_on_box(order, working_triangle(a, upper), kOrderCheckGrid, 0.0, true);
  if (!check.pass) {
    throw OrderCodomainError("order '" + label + "' is not positive on a <= s <= t <= " +
                             num(upper) + " (minimum sampled value " + num(check.min_value) + ")");
  }
}

}  // namespace

bool UnitIntegralMemo::lookup(const std::string& fingerprint, double t, OperatorValue& out) const {
  std::shared_lock lock(mutex_);
  const auto it = values_.find({fingerprint, std::bit_cast<std::uint64_t>(t)});
  if (it == values_.end()) return false;
  out = it->second;
  return true;
}

void UnitIntegralMemo::store(const std::string& fingerprint, double t, const OperatorValue& value) {
  std::unique_lock lock(mutex_);
  values_.try_emplace({fingerprint, std::bit_cast<std::uint64_t>(t)}, value);
}

std::size_t UnitIntegralMemo::size() const {
  std::shared_lock lock(mutex_);
  return values_.size();
}

VOIntegralOperator::VOIntegralOperator(double a, const Expr& order, double upper, QuadSpec spec,
                                       std::shared_ptr<UnitIntegralMemo> memo)
    : VOIntegralOperator(a, bind_bivariate(order, "t", "s"), order.print(), upper, spec,
                         std::move(memo)) {}

VOIntegralOperator::VOIntegralOperator(double a, BivariateFn order, std::string fingerprint,
                                       double upper, QuadSpec spec,
                                       std::shared_ptr<UnitIntegralMemo> memo)
    : a_(a),
      upper_(upper),
      order_(std::move(order)),
      order_key_(std::move(fingerprint)),
      spec_(spec),
      memo_(std::move(memo)) {
  if (!std::isfinite(a_) || !std::isfinite(upper_)) {
    throw std::invalid_argument("operator limits must be finite");
  }
  if (upper_ < a_) throw std::invalid_argument("operator working interval has upper < a");
  spec_.validate();
  validate_positive(order_, order_key_, a_, upper_);
}

std::string VOIntegralOperator::fingerprint() const {
  return order_key_ + "|a=" + num(a_) + "|" + num(spec_.rel_tol) + "," + num(spec_.abs_tol) +
         "," + std::to_string(spec_.panel_order) + "," + std::to_string(spec_.max_panels) + "," +
         num(spec_.grading_ratio) + "," + num(spec_.min_exponent_guard);
}

VOIntegralOperator VOIntegralOperator::with_spec(const QuadSpec& spec) const {
  VOIntegralOperator out = *this;
  spec.validate();
  out.spec_ = spec;
  return out;
}

VODerivativeOperator::VODerivativeOperator(double a, const Expr& order, double upper,
                                           QuadSpec spec, double fd_step, FdMode fd_mode,
                                           std::shared_ptr<UnitIntegralMemo> memo)
    : fd_step_(fd_step),
      fd_mode_(fd_mode),
      integral_([&] {
        if (!(fd_step > 0.0)) throw std::invalid_argument("fd_step must be positive");
        const BivariateFn alpha = bind_bivariate(order, "t", "s");
        const double reach = upper + 2.5 * fd_step * std::max(1.0, std::fabs(upper));
        const BoxCheck check = check_bounded_on_box(alpha, working_triangle(a, reach),
                                                    kOrderCheckGrid, 0.0, 1.0, true);
        if (!check.pass) {
          throw OrderCodomainError("derivative order '" + order.print() +
                                   "' leaves (0, 1) on a <= s <= t <= " + num(reach) +
                                   " (sampled range [" + num(check.min_value) + ", " +
                                   num(check.max_value) + "])");
        }
        return VOIntegralOperator(
            a, [alpha](double t, double s) { return 1.0 - alpha(t, s); },
            "1-(" + order.print() + ")", reach, spec, std::move(memo));
      }()) {}

double VODerivativeOperator::step_at(double t) const {
  const double h = fd_step_ * std::max(1.0, std::fabs(t));
  // Round to a step that is exactly representable around t.
  return (t + h) - t;
}

OperatorValue vo_integral(const VOIntegralOperator& op, const UnivariateFn& f, double t) {
  if (!std::isfinite(t)) throw std::invalid_argument("evaluation point must be finite");
  if (t < op.a()) throw std::invalid_argument("evaluation point " + num(t) + " lies below a = " + num(op.a()));
  if (t == op.a()) return {0.0, 0.0, true};
  if (t > op.upper()) {
    throw std::out_of_range("evaluation point " + num(t) + " lies beyond the validated range (upper " +
                            num(op.upper()) + ")");
  }
  const BivariateFn& alpha = op.order_fn();
  const double exponent = alpha(t, t) - 1.0;
  const auto integrand = [&](double u) {
    const double s = t - u;
    return vo_kernel_at_distance(u, alpha(t, s)) * f(s);
  };
  const QuadResult q = integrate_singular_at_zero(integrand, t - op.a(), exponent, op.spec());
  return {q.value, q.err_estimate, q.converged};
}

OperatorValue vo_integral_unit(const VOIntegralOperator& op, double t) {
  const auto& memo = op.memo();
  if (!memo) return vo_integral(op, [](double) { return 1.0; }, t);
  const std::string key = op.fingerprint();
  OperatorValue out;
  if (memo->lookup(key, t, out)) return out;
  out = vo_integral(op, [](double) { return 1.0; }, t);
  memo->store(key, t, out);
  return out;
}

OperatorValue vo_derivative(const VODerivativeOperator& op, const UnivariateFn& f, double t) {
  const double a = op.a();
  if (!(t > a)) throw DomainError("derivative requires t > a (t = " + num(t) + ", a = " + num(a) + ")");
  const double h = op.step_at(t);
  if (!(h >= 1e2 * kEps * std::fabs(t)) || h == 0.0) {
    throw DomainError("finite-difference step underflow at t = " + num(t));
  }
  const VOIntegralOperator& integral = op.complementary_integral();
  auto u = [&](double tau) { return vo_integral(integral, f, tau); };

  OperatorValue out;
  if (op.fd_mode() == FdMode::Central && t - h > a) {
    const OperatorValue up = u(t + h);
    const OperatorValue down = u(t - h);
    out.value = (up.value - down.value) / (2.0 * h);
    double truncation = 0.0;
    bool wide_ok = true;
    if (t - 2.0 * h > a) {
      const OperatorValue up2 = u(t + 2.0 * h);
      const OperatorValue down2 = u(t - 2.0 * h);
      truncation = std::fabs(out.value - (up2.value - down2.value) / (4.0 * h)) / 3.0;
      wide_ok = up2.converged && down2.converged;
    } else {
      const OperatorValue mid = u(t);
      truncation = std::fabs(out.value - (up.value - mid.value) / h);
      wide_ok = mid.converged;
    }
    out.err_estimate = (up.err_estimate + down.err_estimate) / (2.0 * h) + truncation;
    out.converged = up.converged && down.converged && wide_ok;
    return out;
  }

  // Forward differences, also the fallback when t - h would cross a.
  const OperatorValue mid = u(t);
  const OperatorValue up = u(t + h);
  const OperatorValue up2 = u(t + 2.0 * h);
  out.value = (up.value - mid.value) / h;
  const double wide = (up2.value - mid.value) / (2.0 * h);
  // Doubled: near a the step can exceed t - a and the h/2h gap undershoots.
  out.err_estimate = (up.err_estimate + mid.err_estimate) / h + 2.0 * std::fabs(out.value - wide);
  out.converged = mid.converged && up.converged && up2.converged;
  return out;
}

double constant_order_power_oracle(double alpha, double mu, double a, double t) {
  if (!(alpha > 0.0)) throw DomainError("oracle requires alpha > 0");
  if (!(mu > -1.0)) throw DomainError("oracle requires mu > -1");
  if (!(t > a)) throw DomainError("oracle requires t > a");
  return std::exp(log_gamma(mu + 1.0) - log_gamma(mu + 1.0 + alpha) +
                  (mu + alpha) * std::log(t - a));
}

double constant_order_power_derivative_oracle(double alpha, double mu, double a, double t) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("derivative oracle requires 0 < alpha < 1");
  if (!(mu > -1.0)) throw DomainError("oracle requires mu > -1");
  if (!(t > a)) throw DomainError("oracle requires t > a");
  return std::exp(log_gamma(mu + 1.0) - log_gamma(mu + 1.0 - alpha) +
                  (mu - alpha) * std::log(t - a));
}

}  // namespace vofrac
