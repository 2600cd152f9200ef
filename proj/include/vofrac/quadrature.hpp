#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

namespace vofrac {

using UnivariateFn = std::function<double(double)>;

struct QuadSpec {
  double rel_tol = 1e-8;
  double abs_tol = 1e-12;
  int panel_order = 15;  ///< Kronrod nodes per panel; even values are rounded up.
  int max_panels = 2000;
  double grading_ratio = 0.15;
  double min_exponent_guard = 1e-3;  ///< smallest exponent + 1 the graded tail accepts

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;

  /// Same policy with both tolerances divided by `factor`.
  QuadSpec tightened(double factor) const;
};

struct QuadResult {
  double value = 0.0;
  double err_estimate = 0.0;
  int panels_used = 0;
  bool converged = false;
};

class DivergentIntegralError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Gauss-Kronrod rule on [-1, 1]: 2m+1 Kronrod nodes with the embedded
/// m-point Gauss rule. Nodes are stored for x >= 0 only, ascending, with
/// the centre node first.
struct GaussKronrodRule {
  std::vector<double> nodes;
  std::vector<double> kronrod_weights;
  std::vector<double> gauss_weights;  ///< zero where a node is Kronrod-only

  int size() const { return 2 * static_cast<int>(nodes.size()) - 1; }
};

/// Rule with `points` Kronrod nodes (rounded up to odd, minimum 3). Rules
/// are built once per size and cached.
const GaussKronrodRule& gauss_kronrod_rule(int points);

/// Globally adaptive bisection on [lo, hi]. Non-convergence is reported
/// through QuadResult::converged, never thrown.
QuadResult integrate_adaptive(const UnivariateFn& f, double lo, double hi, const QuadSpec& spec);

/// Integral of f over [lo, hi] where f behaves like C (hi - x)^exponent_at_hi
/// near hi. Uses a geometric mesh towards hi plus a closed-form tail.
QuadResult integrate_upper_singular(const UnivariateFn& f, double lo, double hi,
                                    double exponent_at_hi, const QuadSpec& spec);

/// Distance form of integrate_upper_singular: integrates g(u) for u in
/// (0, length], singular like u^exponent at u = 0. Callers that can evaluate
/// their integrand from the distance itself should prefer this overload,
/// since the geometric mesh may then reach distances far below one ulp of
/// the endpoint.
QuadResult integrate_singular_at_zero(const UnivariateFn& g, double length, double exponent,
                                      const QuadSpec& spec);

}  // namespace vofrac
