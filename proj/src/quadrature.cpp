#include "vofrac/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <queue>
#include <string>

#include <boost/math/special_functions/legendre.hpp>
#include <boost/math/special_functions/legendre_stieltjes.hpp>

namespace vofrac {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr int kMaxRulePoints = 201;
// Geometric levels generated before the tail estimate is trusted.
constexpr int kMinGradedLevels = 4;
// Smallest distance to the singular endpoint the distance form will reach.
constexpr double kMinDistance = 1e-280;

GaussKronrodRule build_rule(int points) {
  const unsigned gauss_order = static_cast<unsigned>((points - 1) / 2);
  std::vector<double> gauss_zeros = boost::math::legendre_p_zeros<double>(gauss_order);
  const boost::math::legendre_stieltjes<double> stieltjes(gauss_order + 1);
  const std::vector<double> kronrod_zeros = stieltjes.zeros();

  struct Node {
    double x;
    bool gauss;
  };
  std::vector<Node> all;
  for (double x : gauss_zeros) all.push_back({x, true});
  for (double x : kronrod_zeros) all.push_back({x, false});
  std::sort(all.begin(), all.end(), [](const Node& a, const Node& b) { return a.x < b.x; });

  GaussKronrodRule rule;
  for (const Node& n : all) {
    const double x = n.x;
    rule.nodes.push_back(x);
    if (n.gauss) {
      const double dp = boost::math::legendre_p_prime(gauss_order, x);
      const double gw = 2.0 / ((1.0 - x * x) * dp * dp);
      rule.gauss_weights.push_back(gw);
      rule.kronrod_weights.push_back(gw + 2.0 / (static_cast<double>(gauss_order + 1) * dp *
                                                 stieltjes(x)));
    } else {
      rule.gauss_weights.push_back(0.0);
      rule.kronrod_weights.push_back(
          2.0 / (static_cast<double>(gauss_order + 1) *
                 boost::math::legendre_p(static_cast<int>(gauss_order), x) * stieltjes.prime(x)));
    }
  }
  return rule;
}

struct Panel {
  double lo;
  double hi;
  double value;
  double err;
};

Panel eval_panel(const UnivariateFn& f, double lo, double hi, const GaussKronrodRule& rule) {
  const double centre = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  const std::size_t n = rule.nodes.size();

  std::array<double, kMaxRulePoints> fv{};
  const double fc = f(centre);
  double resk = rule.kronrod_weights[0] * fc;
  double resg = rule.gauss_weights[0] * fc;
  double resabs = std::fabs(resk);
  for (std::size_t i = 1; i < n; ++i) {
    const double dx = half * rule.nodes[i];
    const double f1 = f(centre - dx);
    const double f2 = f(centre + dx);
    fv[2 * i - 2] = f1;
    fv[2 * i - 1] = f2;
    resk += rule.kronrod_weights[i] * (f1 + f2);
    resg += rule.gauss_weights[i] * (f1 + f2);
    resabs += rule.kronrod_weights[i] * (std::fabs(f1) + std::fabs(f2));
  }
  const double mean = 0.5 * resk;
  double resasc = rule.kronrod_weights[0] * std::fabs(fc - mean);
  for (std::size_t i = 1; i < n; ++i) {
    resasc += rule.kronrod_weights[i] *
              (std::fabs(fv[2 * i - 2] - mean) + std::fabs(fv[2 * i - 1] - mean));
  }
  const double scale = std::fabs(half);
  resasc *= scale;
  resabs *= scale;

  // QUADPACK's scaling of |K - G|.
  double err = std::fabs((resk - resg) * half);
  if (resasc != 0.0 && err != 0.0) err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  if (resabs > std::numeric_limits<double>::min() / (50.0 * kEps)) {
    err = std::max(50.0 * kEps * resabs, err);
  }
  if (!std::isfinite(resk * half) || !std::isfinite(err)) {
    throw std::domain_error("non-finite integrand value on [" + std::to_string(lo) + ", " +
                            std::to_string(hi) + "]");
  }
  return {lo, hi, resk * half, err};
}

double tolerance_for(const QuadSpec& spec, double value) {
  return std::max(spec.abs_tol, spec.rel_tol * std::fabs(value));
}

// Global adaptive refinement over an initial set of evaluated panels. The
// fixed contribution (a closed-form tail) enters the stopping test but is
// never refined.
QuadResult refine(const UnivariateFn& f, std::vector<Panel> panels, const QuadSpec& spec,
                  const GaussKronrodRule& rule, double fixed_value, double fixed_err,
                  bool allow_convergence) {
  auto worse = [&panels](std::size_t a, std::size_t b) {
    if (panels[a].err != panels[b].err) return panels[a].err < panels[b].err;
    return panels[a].lo > panels[b].lo;
  };
  std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(worse)> queue(worse);
  for (std::size_t i = 0; i < panels.size(); ++i) queue.push(i);

  auto totals = [&] {
    double value = fixed_value;
    double err = fixed_err;
    for (const Panel& p : panels) {
      value += p.value;
      err += p.err;
    }
    return std::pair{value, err};
  };

  bool stalled = false;
  for (;;) {
    const auto [value, err] = totals();
    const double tol = tolerance_for(spec, value);
    if (err <= tol) break;
    if (fixed_err > tol || static_cast<int>(panels.size()) >= spec.max_panels || queue.empty()) {
      stalled = true;
      break;
    }
    const std::size_t worst = queue.top();
    queue.pop();
    const Panel p = panels[worst];
    const double mid = 0.5 * (p.lo + p.hi);
    if (!(mid > p.lo && mid < p.hi)) continue;  // cannot split further
    panels[worst] = eval_panel(f, p.lo, mid, rule);
    panels.push_back(eval_panel(f, mid, p.hi, rule));
    queue.push(worst);
    queue.push(panels.size() - 1);
  }

  std::sort(panels.begin(), panels.end(), [](const Panel& a, const Panel& b) { return a.lo < b.lo; });
  QuadResult out;
  out.value = 0.0;
  out.err_estimate = 0.0;
  for (const Panel& p : panels) {
    out.value += p.value;
    out.err_estimate += p.err;
  }
  out.value += fixed_value;
  out.err_estimate += fixed_err;
  out.panels_used = static_cast<int>(panels.size());
  out.converged = allow_convergence && !stalled &&
                  out.err_estimate <= tolerance_for(spec, out.value);
  return out;
}

}  // namespace

void QuadSpec::validate() const {
  if (!(rel_tol > 0.0 && rel_tol < 1.0)) throw std::invalid_argument("rel_tol must lie in (0, 1)");
  if (!(abs_tol > 0.0)) throw std::invalid_argument("abs_tol must be positive");
  if (!(grading_ratio > 0.0 && grading_ratio < 1.0)) {
    throw std::invalid_argument("grading_ratio must lie in (0, 1)");
  }
  if (panel_order < 2 || panel_order > kMaxRulePoints) {
    throw std::invalid_argument("panel_order must lie in [2, " + std::to_string(kMaxRulePoints) + "]");
  }
  if (max_panels < 1) throw std::invalid_argument("max_panels must be at least 1");
  if (!(min_exponent_guard > 0.0 && min_exponent_guard < 1.0)) {
    throw std::invalid_argument("min_exponent_guard must lie in (0, 1)");
  }
}

QuadSpec QuadSpec::tightened(double factor) const {
  QuadSpec out = *this;
  out.rel_tol /= factor;
  out.abs_tol /= factor;
  return out;
}

const GaussKronrodRule& gauss_kronrod_rule(int points) {
  points = std::max(points, 3);
  if (points % 2 == 0) ++points;
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<const GaussKronrodRule>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[points];
  if (!slot) slot = std::make_unique<const GaussKronrodRule>(build_rule(points));
  return *slot;
}

QuadResult integrate_adaptive(const UnivariateFn& f, double lo, double hi, const QuadSpec& spec) {
  spec.validate();
  if (!(lo < hi)) throw std::invalid_argument("integrate_adaptive requires lo < hi");
  const GaussKronrodRule& rule = gauss_kronrod_rule(spec.panel_order);
  return refine(f, {eval_panel(f, lo, hi, rule)}, spec, rule, 0.0, 0.0, true);
}

namespace {

QuadResult graded_singular(const UnivariateFn& g, double length, double exponent,
                           const QuadSpec& spec, double floor_distance) {
  spec.validate();
  if (!(exponent > -1.0)) {
    throw DivergentIntegralError("endpoint exponent " + std::to_string(exponent) +
                                 " <= -1: integral diverges");
  }
  if (!(length > 0.0)) throw std::invalid_argument("integration length must be positive");
  const GaussKronrodRule& rule = gauss_kronrod_rule(spec.panel_order);
  const double power = exponent + 1.0;

  // Panels [d_{k+1}, d_k] with d_k = length * ratio^k, generated until the
  // frozen-coefficient tail over (0, d_K] is resolved.
  std::vector<Panel> panels;
  double d_prev = length;
  double coeff_prev = g(length) / std::pow(length, exponent);
  double panels_sum = 0.0;
  double tail = 0.0;
  double tail_err = std::numeric_limits<double>::infinity();
  int level = 0;
  const int max_levels = std::max(1, spec.max_panels / 2);
  for (;;) {
    const double d_next = d_prev * spec.grading_ratio;
    panels.push_back(eval_panel(g, d_next, d_prev, rule));
    panels_sum += panels.back().value;
    ++level;

    const double coeff = g(d_next) / std::pow(d_next, exponent);
    const double tail_scale = std::pow(d_next, power) / power;
    tail = coeff * tail_scale;
    tail_err = std::fabs(coeff - coeff_prev) * tail_scale + 10.0 * kEps * std::fabs(tail);
    if (!std::isfinite(tail) || !std::isfinite(tail_err)) {
      throw std::domain_error("non-finite integrand near the singular endpoint");
    }
    d_prev = d_next;
    coeff_prev = coeff;

    const double target = 0.1 * tolerance_for(spec, panels_sum + tail);
    if (level >= kMinGradedLevels && tail_err <= target) break;
    if (level >= max_levels || d_next * spec.grading_ratio < floor_distance) break;
  }
  std::reverse(panels.begin(), panels.end());

  const bool resolvable = power >= spec.min_exponent_guard;
  return refine(g, std::move(panels), spec, rule, tail, tail_err, resolvable);
}

}  // namespace

QuadResult integrate_singular_at_zero(const UnivariateFn& g, double length, double exponent,
                                      const QuadSpec& spec) {
  return graded_singular(g, length, exponent, spec, std::max(kMinDistance, length * 1e-300));
}

QuadResult integrate_upper_singular(const UnivariateFn& f, double lo, double hi,
                                    double exponent_at_hi, const QuadSpec& spec) {
  if (!(lo < hi)) throw std::invalid_argument("integrate_upper_singular requires lo < hi");
  // Distances below a few hundred ulps of hi are not representable as
  // hi - u; the mesh stops there and the tail formula covers the rest.
  const double min_distance = 256.0 * kEps * std::max(std::fabs(hi), std::fabs(lo));
  const auto g = [&f, hi](double u) { return f(hi - u); };
  return graded_singular(g, hi - lo, exponent_at_hi, spec, min_distance);
}

}  // namespace vofrac
