#pragma once

#include <stdexcept>

namespace vofrac {

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Gamma function on the positive real axis. Throws DomainError for
/// x <= 0 and for x > 171.6, where the result overflows a double.
double gamma(double x);

/// ln Gamma(x) for x > 0.
double log_gamma(double x);

/// One evaluation point of the variable-order kernel; requires t > s and
/// alpha_value > 0.
struct KernelPoint {
  double t;
  double s;
  double alpha_value;
};

/// (t - s)^(alpha - 1) / Gamma(alpha), evaluated in log space.
double vo_kernel(const KernelPoint& p);

/// Same kernel expressed through the distance d = t - s > 0 directly, which
/// keeps full precision when s is within a few ulps of t.
double vo_kernel_at_distance(double distance, double alpha_value);

}  // namespace vofrac
