#include "vofrac/identity_catalog.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

namespace vofrac {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kQuotientFloor = 1e-6;
constexpr int kQuotientSamples = 256;
constexpr double kInverseFloor = 1e-12;
constexpr double kNestedTightening = 10.0;

constexpr std::array<IdentityInfo, 19> kInventory{{
    {IdentityId::ThmMain, "THM_MAIN", Classification::Exact, "f g alpha beta c s",
     "product expansion with the nested mixed term"},
    {IdentityId::ProdI, "PROD_I", Classification::Asserted, "f g alpha beta c (s=t)",
     "product rule type I"},
    {IdentityId::ProdII, "PROD_II", Classification::Asserted, "f g alpha beta (c=a, s=t)",
     "product rule type II"},
    {IdentityId::ProdIII, "PROD_III", Classification::Asserted, "f g alpha (beta=alpha, c=a, s=t)",
     "product rule type III"},
    {IdentityId::ProdIV, "PROD_IV", Classification::Asserted, "f alpha (g=f, beta=alpha, c=a, s=t)",
     "product rule type IV"},
    {IdentityId::QuotI, "QUOT_I", Classification::Asserted, "f h alpha beta c (g=1/h, s=t)",
     "quotient rule type I"},
    {IdentityId::QuotII, "QUOT_II", Classification::Asserted, "f h alpha beta (g=1/h, c=a, s=t)",
     "quotient rule type II"},
    {IdentityId::QuotIII, "QUOT_III", Classification::Asserted, "f h alpha (g=1/h, c=a, s=t)",
     "quotient rule type III"},
    {IdentityId::QuotIV, "QUOT_IV", Classification::Asserted, "h alpha (f=g=1/h, c=a, s=t)",
     "quotient rule type IV"},
    {IdentityId::PowerN, "POWER_N", Classification::Asserted, "f alpha n", "power rule"},
    {IdentityId::ChainI, "CHAIN_I", Classification::Asserted, "f g alpha beta c",
     "chain rule type I"},
    {IdentityId::ChainII, "CHAIN_II", Classification::Asserted, "f g alpha c (beta=alpha)",
     "chain rule type II"},
    {IdentityId::ChainIII, "CHAIN_III", Classification::Asserted, "f g alpha (beta=alpha, c=a)",
     "chain rule type III"},
    {IdentityId::ChainIV, "CHAIN_IV", Classification::Asserted, "f alpha (g=f, beta=alpha, c=a)",
     "chain rule type IV"},
    {IdentityId::ThmDiff, "THM_DIFF", Classification::Exact, "f g alpha beta c s",
     "mixed term from sums and differences"},
    {IdentityId::CorDiffSq, "COR_DIFF_SQ", Classification::Asserted, "f alpha beta c s",
     "squared nested difference"},
    {IdentityId::CorDiffZero, "COR_DIFF_ZERO", Classification::Asserted, "f g alpha beta c (s=t)",
     "sum/difference combination claimed to vanish"},
    {IdentityId::ThmBivar, "THM_BIVAR", Classification::Asserted, "F G alpha beta c s",
     "nested integral of a product of two-variable functions"},
    {IdentityId::DerivProdIII, "DERIV_PROD_III", Classification::Asserted,
     "f g alpha in (0,1) [symmetrized]", "derivative product rule type III"},
}};

// ---------------------------------------------------------------------------
// Value with first-order error bound. Each operation adds a rounding term.

struct Measured {
  double v = 0.0;
  double e = 0.0;
  bool ok = true;
};

Measured measured(const OperatorValue& o) { return {o.value, o.err_estimate, o.converged}; }
Measured exact(double v) { return {v, 0.0, true}; }

Measured rounded(double v, double e, bool ok) { return {v, e + 2.0 * kEps * std::fabs(v), ok}; }

Measured operator+(Measured x, Measured y) { return rounded(x.v + y.v, x.e + y.e, x.ok && y.ok); }
Measured operator-(Measured x, Measured y) { return rounded(x.v - y.v, x.e + y.e, x.ok && y.ok); }
Measured operator*(Measured x, Measured y) {
  return rounded(x.v * y.v, std::fabs(x.v) * y.e + std::fabs(y.v) * x.e + x.e * y.e, x.ok && y.ok);
}
Measured operator*(double k, Measured x) { return rounded(k * x.v, std::fabs(k) * x.e, x.ok); }
Measured operator/(Measured x, Measured y) {
  const double q = x.v / y.v;
  return rounded(q, (x.e + std::fabs(q) * y.e) / std::fabs(y.v), x.ok && y.ok);
}

Measured inverse_checked(const Measured& x, const char* what) {
  if (!(std::fabs(x.v) >= kInverseFloor)) {
    throw PreconditionError(std::string("ill-conditioned inverse: ") + what + " = " +
                            std::to_string(x.v));
  }
  return exact(1.0) / x;
}

Measured power(Measured x, int n) {
  Measured out = x;
  for (int i = 1; i < n; ++i) out = out * x;
  return out;
}

// ---------------------------------------------------------------------------
// Input handling

enum Field : unsigned {
  kF = 1u << 0,
  kG = 1u << 1,
  kH = 1u << 2,
  kBigF = 1u << 3,
  kBigG = 1u << 4,
  kAlpha = 1u << 5,
  kBeta = 1u << 6,
  kC = 1u << 7,
  kS = 1u << 8,
  kN = 1u << 9,
  kCEqualsA = 1u << 10,  // c may be given but must equal a
  kSEqualsT = 1u << 11,  // s may be given but must equal t
};

unsigned fields_present(const CaseInputs& in) {
  unsigned m = 0;
  if (in.f) m |= kF;
  if (in.g) m |= kG;
  if (in.h) m |= kH;
  if (in.F) m |= kBigF;
  if (in.G) m |= kBigG;
  if (in.alpha) m |= kAlpha;
  if (in.beta) m |= kBeta;
  if (in.c) m |= kC;
  if (in.s) m |= kS;
  if (in.n) m |= kN;
  return m;
}

unsigned fields_required(IdentityId id) {
  switch (id) {
    case IdentityId::ThmMain:
    case IdentityId::ThmDiff: return kF | kG | kAlpha | kBeta | kC | kS;
    case IdentityId::ProdI: return kF | kG | kAlpha | kBeta | kC | kSEqualsT;
    case IdentityId::ProdII: return kF | kG | kAlpha | kBeta | kCEqualsA | kSEqualsT;
    case IdentityId::ProdIII: return kF | kG | kAlpha | kCEqualsA | kSEqualsT;
    case IdentityId::ProdIV: return kF | kAlpha | kCEqualsA | kSEqualsT;
    case IdentityId::QuotI: return kF | kH | kAlpha | kBeta | kC | kSEqualsT;
    case IdentityId::QuotII: return kF | kH | kAlpha | kBeta | kCEqualsA | kSEqualsT;
    case IdentityId::QuotIII: return kF | kH | kAlpha | kCEqualsA | kSEqualsT;
    case IdentityId::QuotIV: return kH | kAlpha | kCEqualsA | kSEqualsT;
    case IdentityId::PowerN: return kF | kAlpha | kN | kCEqualsA | kSEqualsT;
    case IdentityId::ChainI: return kF | kG | kAlpha | kBeta | kC;
    case IdentityId::ChainII: return kF | kG | kAlpha | kC;
    case IdentityId::ChainIII: return kF | kG | kAlpha | kCEqualsA;
    case IdentityId::ChainIV: return kF | kAlpha | kCEqualsA;
    case IdentityId::CorDiffSq: return kF | kAlpha | kBeta | kC | kS;
    case IdentityId::CorDiffZero: return kF | kG | kAlpha | kBeta | kC | kSEqualsT;
    case IdentityId::ThmBivar: return kBigF | kBigG | kAlpha | kBeta | kC | kS;
    case IdentityId::DerivProdIII: return kF | kG | kAlpha;
  }
  return 0;
}

std::string field_names(unsigned mask) {
  static constexpr std::array<std::pair<unsigned, const char*>, 10> names{{
      {kF, "f"}, {kG, "g"}, {kH, "h"}, {kBigF, "F"}, {kBigG, "G"},
      {kAlpha, "alpha"}, {kBeta, "beta"}, {kC, "c"}, {kS, "s"}, {kN, "n"},
  }};
  std::string out;
  for (const auto& [bit, name] : names) {
    if (mask & bit) out += (out.empty() ? "" : ", ") + std::string(name);
  }
  return out;
}

/// Checks the exact input set and returns the effective lower limit c and
/// evaluation point s (which default to a and t where the identity ties them).
struct Limits {
  double c;
  double s;
};

Limits check_inputs(IdentityId id, const CaseInputs& in) {
  const std::string name(identity_info(id).name);
  const unsigned req = fields_required(id);
  const unsigned present = fields_present(in);
  const unsigned hard = req & ~(kCEqualsA | kSEqualsT);
  unsigned optional = 0;
  if (req & kCEqualsA) optional |= kC;
  if (req & kSEqualsT) optional |= kS;
  if (const unsigned missing = hard & ~present) {
    throw PreconditionError(name + ": missing inputs: " + field_names(missing));
  }
  if (const unsigned extra = present & ~(hard | optional)) {
    throw PreconditionError(name + ": unexpected inputs: " + field_names(extra));
  }
  if (!std::isfinite(in.a) || !std::isfinite(in.t)) {
    throw PreconditionError(name + ": a and t must be finite");
  }
  if (!(in.t > in.a)) throw PreconditionError(name + ": requires t > a");
  if ((req & kCEqualsA) && in.c && *in.c != in.a) {
    throw PreconditionError(name + ": requires c = a");
  }
  if ((req & kSEqualsT) && in.s && *in.s != in.t) {
    throw PreconditionError(name + ": requires s = t");
  }
  Limits lim{in.c.value_or(in.a), in.s.value_or(in.t)};
  if (!std::isfinite(lim.c) || !std::isfinite(lim.s)) {
    throw PreconditionError(name + ": c and s must be finite");
  }
  const bool uses_s = (req & (kS | kSEqualsT)) != 0;
  if (uses_s && !(lim.s > lim.c)) throw PreconditionError(name + ": requires s > c");
  if (in.n && *in.n < 2) throw PreconditionError(name + ": requires n >= 2");
  return lim;
}

UnivariateFn univariate(const Expr& e, const char* role) {
  const auto vars = free_vars(e);
  if (vars.size() > 1) {
    throw PreconditionError(std::string(role) + " must depend on at most one variable: '" +
                            e.print() + "'");
  }
  return bind_univariate(e, vars.empty() ? std::string("x") : *vars.begin());
}

UnivariateFn product(UnivariateFn f, UnivariateFn g) {
  return [f = std::move(f), g = std::move(g)](double x) { return f(x) * g(x); };
}

const UnivariateFn kOne = [](double) { return 1.0; };

VOIntegralOperator make_op(const Expr& order, double lower, double upper, const EvalContext& ctx) {
  return VOIntegralOperator(lower, order, upper, ctx.spec, ctx.memo);
}

Measured apply(const VOIntegralOperator& op, const UnivariateFn& f, double t) {
  return measured(vo_integral(op, f, t));
}

Measured unit(const VOIntegralOperator& op, double t) { return measured(vo_integral_unit(op, t)); }

// Outer integral over y of the inner integral over x of integrand(x, y).
// The inner integrals run 10x tighter; their worst error estimate is pushed
// through the outer kernel, whose total mass is the outer unit integral.
Measured nested(const VOIntegralOperator& outer, double outer_point,
                const VOIntegralOperator& inner_op, double inner_point,
                const std::function<double(double, double)>& integrand) {
  const VOIntegralOperator inner = inner_op.with_spec(inner_op.spec().tightened(kNestedTightening));
  double worst_inner = 0.0;
  bool inner_ok = true;
  const auto outer_fn = [&](double y) {
    const OperatorValue v = vo_integral(inner, [&](double x) { return integrand(x, y); }, inner_point);
    worst_inner = std::max(worst_inner, v.err_estimate);
    inner_ok = inner_ok && v.converged;
    return v.value;
  };
  const OperatorValue o = vo_integral(outer, outer_fn, outer_point);
  const OperatorValue mass = vo_integral_unit(outer, outer_point);
  return {o.value, o.err_estimate + (mass.value + mass.err_estimate) * worst_inner,
          o.converged && inner_ok && mass.converged};
}

Measured mixed(const VOIntegralOperator& i_op, double t, const VOIntegralOperator& j_op, double s,
               const UnivariateFn& f, const UnivariateFn& g) {
  // f(y), g(y) are fixed for a given outer node, so the inner integrand only
  // evaluates f and g at x.
  const VOIntegralOperator inner = i_op.with_spec(i_op.spec().tightened(kNestedTightening));
  double worst_inner = 0.0;
  bool inner_ok = true;
  const auto outer_fn = [&](double y) {
    const double fy = f(y);
    const double gy = g(y);
    const OperatorValue v =
        vo_integral(inner, [&](double x) { return (f(x) - fy) * (g(x) - gy); }, t);
    worst_inner = std::max(worst_inner, v.err_estimate);
    inner_ok = inner_ok && v.converged;
    return v.value;
  };
  const OperatorValue o = vo_integral(j_op, outer_fn, s);
  const OperatorValue mass = vo_integral_unit(j_op, s);
  return {o.value, o.err_estimate + (mass.value + mass.err_estimate) * worst_inner,
          o.converged && inner_ok && mass.converged};
}

struct Sides {
  Measured lhs;
  Measured rhs;
  std::optional<Measured> mixed;
  // Correction the residual is reconciled against (kappa * mixed term).
  std::optional<Measured> correction;
};

AuditRecord finalize(IdentityId id, const Sides& sides, const EvalContext& ctx) {
  AuditRecord r;
  r.id = id;
  r.classification = identity_info(id).classification;
  r.lhs = sides.lhs.v;
  r.rhs = sides.rhs.v;
  r.abs_res = std::fabs(r.lhs - r.rhs);
  r.rel_res = r.abs_res / std::max({std::fabs(r.lhs), std::fabs(r.rhs), 1e-300});
  r.err_budget = sides.lhs.e + sides.rhs.e;
  bool ok = sides.lhs.ok && sides.rhs.ok;
  if (sides.mixed) {
    r.mixed_term = sides.mixed->v;
    r.err_budget += sides.mixed->e;
    ok = ok && sides.mixed->ok;
  }
  if (sides.correction) {
    const Measured residual = (sides.lhs - sides.rhs) - *sides.correction;
    r.reconciliation_res = residual.v;
    if (!sides.mixed) r.err_budget += sides.correction->e;
    ok = ok && sides.correction->ok;
  }
  const bool finite = std::isfinite(r.lhs) && std::isfinite(r.rhs) && std::isfinite(r.err_budget);
  if (!ok || !finite) {
    r.status = AuditStatus::Unresolved;
    r.message = finite ? "quadrature did not converge" : "non-finite value";
  } else if (r.classification == Classification::Exact) {
    r.status = within_budget(r, ctx.spec.abs_tol) ? AuditStatus::ExactPass : AuditStatus::ExactFail;
  } else {
    r.status = AuditStatus::AssertedMeasured;
  }
  return r;
}

void check_nonzero_on(const UnivariateFn& h, double lo, double hi, const char* range) {
  for (int i = 0; i < kQuotientSamples; ++i) {
    const double x = i == kQuotientSamples - 1
                         ? hi
                         : lo + (hi - lo) * static_cast<double>(i) / (kQuotientSamples - 1);
    double v = 0.0;
    try {
      v = h(x);
    } catch (const EvalError& e) {
      throw PreconditionError(std::string("h cannot be evaluated on ") + range + ": " + e.what());
    }
    if (!(std::fabs(v) >= kQuotientFloor)) {
      throw PreconditionError(std::string("|h| < 1e-6 on ") + range + " at x = " +
                              std::to_string(x));
    }
  }
}

// Shared body of the product and quotient rules.
AuditRecord product_rule(IdentityId id, int kind, const CaseInputs& in, const Limits& lim,
                         const UnivariateFn& f, const UnivariateFn& g, const EvalContext& ctx) {
  const double t = in.t;
  const VOIntegralOperator i_op = make_op(*in.alpha, in.a, t, ctx);
  const UnivariateFn fg = product(f, g);

  const Measured i_fg = apply(i_op, fg, t);
  const Measured i_1 = unit(i_op, t);
  const Measured i_f = apply(i_op, f, t);
  const Measured i_g = apply(i_op, g, t);

  Sides sides;
  if (kind <= 2) {
    const double c = kind == 1 ? lim.c : in.a;
    if (!(t > c)) throw PreconditionError("product rule requires t > c");
    const VOIntegralOperator j_op = make_op(*in.beta, c, t, ctx);
    const Measured j_fg = apply(j_op, fg, t);
    const Measured j_1 = unit(j_op, t);
    const Measured j_f = apply(j_op, f, t);
    const Measured j_g = apply(j_op, g, t);
    sides.lhs = i_fg * j_1 + i_1 * j_fg;
    sides.rhs = i_g * j_f + i_f * j_g;
    sides.mixed = mixed(i_op, t, j_op, t, f, g);
    sides.correction = sides.mixed;
  } else {
    const Measured inv = inverse_checked(i_1, "I(1)");
    sides.lhs = i_fg;
    sides.rhs = inv * i_g * i_f;
    sides.mixed = mixed(i_op, t, i_op, t, f, g);
    sides.correction = *sides.mixed * (0.5 * inv);
  }
  return finalize(id, sides, ctx);
}

IdentityId product_id(int kind) {
  static constexpr std::array<IdentityId, 4> ids{IdentityId::ProdI, IdentityId::ProdII,
                                                 IdentityId::ProdIII, IdentityId::ProdIV};
  return ids.at(static_cast<std::size_t>(kind - 1));
}

IdentityId quotient_id(int kind) {
  static constexpr std::array<IdentityId, 4> ids{IdentityId::QuotI, IdentityId::QuotII,
                                                 IdentityId::QuotIII, IdentityId::QuotIV};
  return ids.at(static_cast<std::size_t>(kind - 1));
}

IdentityId chain_id(int kind) {
  static constexpr std::array<IdentityId, 4> ids{IdentityId::ChainI, IdentityId::ChainII,
                                                 IdentityId::ChainIII, IdentityId::ChainIV};
  return ids.at(static_cast<std::size_t>(kind - 1));
}

void check_kind(int kind) {
  if (kind < 1 || kind > 4) throw std::invalid_argument("rule kind must be 1..4");
}

}  // namespace

std::span<const IdentityInfo> identity_inventory() { return kInventory; }

const IdentityInfo& identity_info(IdentityId id) {
  for (const auto& info : kInventory) {
    if (info.id == id) return info;
  }
  throw std::logic_error("identity missing from inventory");
}

IdentityId parse_identity_id(std::string_view name) {
  for (const auto& info : kInventory) {
    if (info.name == name) return info.id;
  }
  throw std::invalid_argument("unknown identity id '" + std::string(name) + "'");
}

std::string_view to_string(AuditStatus status) {
  switch (status) {
    case AuditStatus::ExactPass: return "exact-pass";
    case AuditStatus::ExactFail: return "exact-fail";
    case AuditStatus::AssertedMeasured: return "asserted-measured";
    case AuditStatus::Unresolved: return "unresolved";
  }
  return "unresolved";
}

std::string_view to_string(Classification c) {
  return c == Classification::Exact ? "exact" : "asserted";
}

bool within_budget(const AuditRecord& r, double abs_floor) {
  return r.abs_res <= std::max(10.0 * r.err_budget, abs_floor);
}

bool reconciles(const AuditRecord& r, double abs_floor) {
  return r.reconciliation_res &&
         std::fabs(*r.reconciliation_res) <= std::max(10.0 * r.err_budget, abs_floor);
}

OperatorValue mixed_term(const CaseInputs& in, const EvalContext& ctx) {
  if (!in.f || !in.g || !in.alpha || !in.beta || !in.c || !in.s) {
    throw PreconditionError("mixed term needs f, g, alpha, beta, c and s");
  }
  if (!(in.t > in.a) || !(*in.s > *in.c)) throw PreconditionError("mixed term needs t > a, s > c");
  const VOIntegralOperator i_op = make_op(*in.alpha, in.a, in.t, ctx);
  const VOIntegralOperator j_op = make_op(*in.beta, *in.c, *in.s, ctx);
  const Measured m = mixed(i_op, in.t, j_op, *in.s, univariate(*in.f, "f"), univariate(*in.g, "g"));
  return {m.v, m.e, m.ok};
}

AuditRecord eval_thm_main(const CaseInputs& in, const EvalContext& ctx) {
  const Limits lim = check_inputs(IdentityId::ThmMain, in);
  const UnivariateFn f = univariate(*in.f, "f");
  const UnivariateFn g = univariate(*in.g, "g");
  const UnivariateFn fg = product(f, g);
  const VOIntegralOperator i_op = make_op(*in.alpha, in.a, in.t, ctx);
  const VOIntegralOperator j_op = make_op(*in.beta, lim.c, lim.s, ctx);
  const double t = in.t;
  const double s = lim.s;

  Sides sides;
  const Measured m = mixed(i_op, t, j_op, s, f, g);
  sides.lhs = apply(i_op, fg, t) * unit(j_op, s) + unit(i_op, t) * apply(j_op, fg, s);
  sides.rhs = m + apply(i_op, g, t) * apply(j_op, f, s) + apply(i_op, f, t) * apply(j_op, g, s);
  AuditRecord r = finalize(IdentityId::ThmMain, sides, ctx);
  r.mixed_term = m.v;
  return r;
}

AuditRecord eval_product_rule(int kind, const CaseInputs& in, const EvalContext& ctx) {
  check_kind(kind);
  const IdentityId id = product_id(kind);
  const Limits lim = check_inputs(id, in);
  const UnivariateFn f = univariate(*in.f, "f");
  const UnivariateFn g = kind == 4 ? f : univariate(*in.g, "g");
  return product_rule(id, kind, in, lim, f, g, ctx);
}

AuditRecord eval_quotient_rule(int kind, const CaseInputs& in, const EvalContext& ctx) {
  check_kind(kind);
  const IdentityId id = quotient_id(kind);
  const Limits lim = check_inputs(id, in);
  const UnivariateFn h = univariate(*in.h, "h");
  check_nonzero_on(h, in.a, in.t, "[a, t]");
  if (kind == 1) check_nonzero_on(h, std::min(lim.c, in.t), std::max(lim.c, in.t), "[c, t]");
  const UnivariateFn reciprocal = [h](double x) { return 1.0 / h(x); };
  const UnivariateFn f = kind == 4 ? reciprocal : univariate(*in.f, "f");
  return product_rule(id, kind, in, lim, f, reciprocal, ctx);
}

AuditRecord eval_power_rule(const CaseInputs& in, const EvalContext& ctx) {
  check_inputs(IdentityId::PowerN, in);
  const int n = *in.n;
  const UnivariateFn f = univariate(*in.f, "f");
  const UnivariateFn fn = [f, n](double x) {
    const double v = f(x);
    double out = v;
    for (int i = 1; i < n; ++i) out *= v;
    return out;
  };
  const VOIntegralOperator i_op = make_op(*in.alpha, in.a, in.t, ctx);
  const Measured i_1 = unit(i_op, in.t);
  const Measured inv = inverse_checked(i_1, "I(1)");
  const Measured i_f = apply(i_op, f, in.t);

  Sides sides;
  sides.lhs = apply(i_op, fn, in.t);
  // Same association as the type IV product rule, so n = 2 reproduces it.
  sides.rhs = power(inv, n - 1) * power(i_f, n);
  if (n == 2) sides.rhs = inv * i_f * i_f;
  return finalize(IdentityId::PowerN, sides, ctx);
}

AuditRecord eval_chain_rule(int kind, const CaseInputs& in, const EvalContext& ctx) {
  check_kind(kind);
  const IdentityId id = chain_id(kind);
  const Limits lim = check_inputs(id, in);
  const UnivariateFn f = univariate(*in.f, "f");
  const UnivariateFn g = kind == 4 ? f : univariate(*in.g, "g");
  const double t = in.t;
  const double ft = f(t);
  const double c = kind >= 3 ? in.a : lim.c;
  if (!(ft > c)) {
    throw PreconditionError(std::string(identity_info(id).name) + ": requires f(t) > c (f(t) = " +
                            std::to_string(ft) + ", c = " + std::to_string(c) + ")");
  }
  const Expr& beta = kind == 1 ? *in.beta : *in.alpha;
  const VOIntegralOperator i_op =
      make_op(*in.alpha, in.a, kind >= 3 ? std::max(t, ft) : t, ctx);
  const VOIntegralOperator j_op = kind >= 3 ? i_op : make_op(beta, c, ft, ctx);
  const UnivariateFn composed = [f, g](double x) { return g(f(x)); };

  const Measured j_1 = unit(j_op, ft);
  Sides sides;
  sides.lhs = apply(i_op, composed, t);
  sides.rhs = apply(j_op, g, ft) * unit(i_op, t) * inverse_checked(j_1, "I_{c,f(t)}(1)");
  return finalize(id, sides, ctx);
}

AuditRecord eval_thm_diff(const CaseInputs& in, const EvalContext& ctx) {
  const Limits lim = check_inputs(IdentityId::ThmDiff, in);
  const UnivariateFn f = univariate(*in.f, "f");
  const UnivariateFn g = univariate(*in.g, "g");
  const UnivariateFn fg = product(f, g);
  const UnivariateFn diff = [f, g](double x) { return f(x) - g(x); };
  const UnivariateFn sum = [f, g](double x) { return f(x) + g(x); };
  const VOIntegralOperator i_op = make_op(*in.alpha, in.a, in.t, ctx);
  const VOIntegralOperator j_op = make_op(*in.beta, lim.c, lim.s, ctx);
  const double t = in.t;
  const double s = lim.s;

  Sides sides;
  sides.lhs = mixed(i_op, t, j_op, s, f, g);
  sides.rhs = apply(i_op, fg, t) * unit(j_op, s) + unit(i_op, t) * apply(j_op, fg, s) +
              0.5 * (apply(i_op, diff, t) * apply(j_op, diff, s) -
                     apply(i_op, sum, t) * apply(j_op, sum, s));
  AuditRecord r = finalize(IdentityId::ThmDiff, sides, ctx);
  r.mixed_term = sides.lhs.v;
  return r;
}

AuditRecord eval_cor_diff_sq(const CaseInputs& in, const EvalContext& ctx) {
  const Limits lim = check_inputs(IdentityId::CorDiffSq, in);
  const UnivariateFn f = univariate(*in.f, "f");
  const VOIntegralOperator i_op = make_op(*in.alpha, in.a, in.t, ctx);
  const VOIntegralOperator j_op = make_op(*in.beta, lim.c, lim.s, ctx);
  const double t = in.t;
  const double s = lim.s;

  // The square is applied to the whole nested integral J_y[I_x[f(x) - f(y)]].
  const Measured nested_diff =
      nested(j_op, s, i_op, t, [&f](double x, double y) { return f(x) - f(y); });
  const Measured i_1 = unit(i_op, t);
  const Measured j_1 = unit(j_op, s);
  const Measured inv_i = inverse_checked(i_1, "I(1)");
  const Measured inv_j = inverse_checked(j_1, "J(1)");
  const Measured i_f = apply(i_op, f, t);
  const Measured j_f = apply(j_op, f, s);

  Sides sides;
  sides.lhs = inv_i * inv_j * (nested_diff * nested_diff);
  sides.rhs = i_f * i_f * inv_i * j_1 + i_1 * (j_f * j_f) * inv_j - 2.0 * (i_f * j_f);
  return finalize(IdentityId::CorDiffSq, sides, ctx);
}

AuditRecord eval_cor_diff_zero(const CaseInputs& in, const EvalContext& ctx) {
  const Limits lim = check_inputs(IdentityId::CorDiffZero, in);
  const UnivariateFn f = univariate(*in.f, "f");
  const UnivariateFn g = univariate(*in.g, "g");
  const UnivariateFn fg = product(f, g);
  const UnivariateFn diff = [f, g](double x) { return f(x) - g(x); };
  const UnivariateFn sum = [f, g](double x) { return f(x) + g(x); };
  const double t = in.t;
  if (!(t > lim.c)) throw PreconditionError("COR_DIFF_ZERO: requires t > c");
  const VOIntegralOperator i_op = make_op(*in.alpha, in.a, t, ctx);
  const VOIntegralOperator j_op = make_op(*in.beta, lim.c, t, ctx);

  Sides sides;
  sides.lhs = apply(i_op, fg, t) * unit(j_op, t) + unit(i_op, t) * apply(j_op, fg, t) +
              0.5 * (apply(i_op, diff, t) * apply(j_op, diff, t) -
                     apply(i_op, sum, t) * apply(j_op, sum, t));
  sides.rhs = exact(0.0);
  sides.mixed = mixed(i_op, t, j_op, t, f, g);
  sides.correction = sides.mixed;
  return finalize(IdentityId::CorDiffZero, sides, ctx);
}

AuditRecord eval_thm_bivar(const CaseInputs& in, const EvalContext& ctx) {
  const Limits lim = check_inputs(IdentityId::ThmBivar, in);
  const BivariateFn big_f = bind_bivariate(*in.F, "t", "s");
  const BivariateFn big_g = bind_bivariate(*in.G, "t", "s");
  const VOIntegralOperator i_op = make_op(*in.alpha, in.a, in.t, ctx);
  const VOIntegralOperator j_op = make_op(*in.beta, lim.c, lim.s, ctx);
  const double t = in.t;
  const double s = lim.s;

  // Outer integral over x (first argument) with alpha, inner over y with beta.
  const auto nest = [&](const std::function<double(double, double)>& fn) {
    return nested(i_op, t, j_op, s, [&fn](double y, double x) { return fn(x, y); });
  };
  const Measured i_1 = unit(i_op, t);
  const Measured j_1 = unit(j_op, s);

  Sides sides;
  sides.lhs = nest([&](double x, double y) { return big_f(x, y) * big_g(x, y); });
  sides.rhs = inverse_checked(j_1, "J(1)") * inverse_checked(i_1, "I(1)") *
              nest([&](double x, double y) { return big_f(x, y); }) *
              nest([&](double x, double y) { return big_g(x, y); });
  return finalize(IdentityId::ThmBivar, sides, ctx);
}

AuditRecord eval_deriv_prod_iii(const CaseInputs& in, const EvalContext& ctx) {
  check_inputs(IdentityId::DerivProdIII, in);
  const UnivariateFn f = univariate(*in.f, "f");
  const UnivariateFn g = univariate(*in.g, "g");
  const double t = in.t;
  const VODerivativeOperator d_op(in.a, *in.alpha, t, ctx.spec, ctx.fd_step, ctx.fd_mode, ctx.memo);
  const VOIntegralOperator& p_op = d_op.complementary_integral();
  const auto d = [&](const UnivariateFn& fn) { return measured(vo_derivative(d_op, fn, t)); };

  const Measured p_1 = unit(p_op, t);
  const Measured inv = inverse_checked(p_1, "I^(1-alpha)(1)");
  const Measured p_f = apply(p_op, f, t);
  const Measured p_g = apply(p_op, g, t);
  const Measured d_1 = d(kOne);
  const Measured d_f = d(f);

  Sides sides;
  sides.lhs = d(product(f, g));
  const Measured first = -1.0 * (inv * inv * p_g * p_f * d_1);
  const Measured second = inv * p_g * d_f;
  const Measured third = in.symmetrized ? inv * p_f * d(g) : inv * p_g * d_f;
  sides.rhs = first + second + third;
  return finalize(IdentityId::DerivProdIII, sides, ctx);
}

AuditRecord evaluate_identity(IdentityId id, const CaseInputs& in, const EvalContext& ctx) {
  switch (id) {
    case IdentityId::ThmMain: return eval_thm_main(in, ctx);
    case IdentityId::ProdI: return eval_product_rule(1, in, ctx);
    case IdentityId::ProdII: return eval_product_rule(2, in, ctx);
    case IdentityId::ProdIII: return eval_product_rule(3, in, ctx);
    case IdentityId::ProdIV: return eval_product_rule(4, in, ctx);
    case IdentityId::QuotI: return eval_quotient_rule(1, in, ctx);
    case IdentityId::QuotII: return eval_quotient_rule(2, in, ctx);
    case IdentityId::QuotIII: return eval_quotient_rule(3, in, ctx);
    case IdentityId::QuotIV: return eval_quotient_rule(4, in, ctx);
    case IdentityId::PowerN: return eval_power_rule(in, ctx);
    case IdentityId::ChainI: return eval_chain_rule(1, in, ctx);
    case IdentityId::ChainII: return eval_chain_rule(2, in, ctx);
    case IdentityId::ChainIII: return eval_chain_rule(3, in, ctx);
    case IdentityId::ChainIV: return eval_chain_rule(4, in, ctx);
    case IdentityId::ThmDiff: return eval_thm_diff(in, ctx);
    case IdentityId::CorDiffSq: return eval_cor_diff_sq(in, ctx);
    case IdentityId::CorDiffZero: return eval_cor_diff_zero(in, ctx);
    case IdentityId::ThmBivar: return eval_thm_bivar(in, ctx);
    case IdentityId::DerivProdIII: return eval_deriv_prod_iii(in, ctx);
  }
  throw std::logic_error("unhandled identity id");
}

void check_required_inputs(IdentityId id, const CaseInputs& in) { check_inputs(id, in); }

std::vector<AuditRecord> run_bank(std::span<const BankCase> bank, const EvalContext& ctx,
                                  int workers, std::vector<double>* wall_time_ms) {
  std::vector<AuditRecord> out(bank.size());
  if (wall_time_ms) wall_time_ms->assign(bank.size(), 0.0);
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t i = next++; i < bank.size(); i = next++) {
      const BankCase& c = bank[i];
      const auto start = std::chrono::steady_clock::now();
      try {
        out[i] = evaluate_identity(c.id, c.inputs, ctx);
      } catch (const std::exception& e) {
        AuditRecord r;
        r.id = c.id;
        r.classification = identity_info(c.id).classification;
        r.lhs = r.rhs = r.abs_res = r.rel_res = r.err_budget = kNaN;
        r.status = AuditStatus::Unresolved;
        r.message = e.what();
        out[i] = std::move(r);
      }
      if (wall_time_ms) {
        (*wall_time_ms)[i] =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      }
    }
  };
  const std::size_t threads =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), bank.size());
  if (threads <= 1) {
    work();
    return out;
  }
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(work);
  pool.clear();
  return out;
}

}  // namespace vofrac
