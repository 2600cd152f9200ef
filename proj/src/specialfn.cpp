#include "vofrac/specialfn.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <string>

namespace vofrac {

namespace {

// Lanczos approximation, g = 607/128 with 15 terms (Godfrey's coefficient
// set). Relative error is a few ulps on the positive real axis.
constexpr double kLanczosG = 607.0 / 128.0;
constexpr std::array<double, 15> kLanczosCoeff{
    0.99999999999999709182,     57.156235665862923517,      -59.597960355475491248,
    14.136097974741747174,      -0.49191381609762019978,    .33994649984811888699e-4,
    .46523628927048575665e-4,   -.98374475304879564677e-4,  .15808870322491248884e-3,
    -.21026444172410488319e-3,  .21743961811521264320e-3,   -.16431810653676389022e-3,
    .84418223983852743293e-4,   -.26190838401581408670e-4,  .36899182659531622704e-5,
};

constexpr double kMaxGammaArg = 171.6;

double lanczos_sum(double z) {
  double sum = kLanczosCoeff[0];
  for (std::size_t k = 1; k < kLanczosCoeff.size(); ++k) {
    sum += kLanczosCoeff[k] / (z + static_cast<double>(k));
  }
  return sum;
}

void require_positive(double x, const char* fn) {
  if (!(x > 0.0)) {
    throw DomainError(std::string(fn) + " requires a positive argument, got " + std::to_string(x));
  }
}

}  // namespace

double gamma(double x) {
  require_positive(x, "gamma");
  if (x > kMaxGammaArg) {
    throw std::overflow_error("gamma overflows for x = " + std::to_string(x) +
                              "; use log_gamma");
  }
  if (x < 0.5) return gamma(x + 1.0) / x;
  const double z = x - 1.0;
  const double t = z + kLanczosG + 0.5;
  // t^(z+1/2) is split in two factors so that x near 171 does not overflow.
  const double half_power = std::pow(t, 0.5 * (z + 0.5));
  return std::sqrt(2.0 * std::numbers::pi) * lanczos_sum(z) * (half_power * std::exp(-t)) *
         half_power;
}

double log_gamma(double x) {
  require_positive(x, "log_gamma");
  if (x == 1.0 || x == 2.0) return 0.0;
  if (x < 0.5) return log_gamma(x + 1.0) - std::log(x);
  if (x < 16.0) return std::log(gamma(x));
  const double z = x - 1.0;
  const double t = z + kLanczosG + 0.5;
  return 0.5 * std::log(2.0 * std::numbers::pi) + std::log(lanczos_sum(z)) +
         (z + 0.5) * std::log(t) - t;
}

double vo_kernel_at_distance(double distance, double alpha_value) {
  if (!(distance > 0.0)) throw DomainError("kernel requires t > s");
  if (!(alpha_value > 0.0)) {
    throw DomainError("kernel order must be positive, got " + std::to_string(alpha_value));
  }
  if (alpha_value == 1.0) return 1.0;
  return std::exp((alpha_value - 1.0) * std::log(distance) - log_gamma(alpha_value));
}

double vo_kernel(const KernelPoint& p) { return vo_kernel_at_distance(p.t - p.s, p.alpha_value); }

}  // namespace vofrac
