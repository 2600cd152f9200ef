#include <bit>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "vofrac/identity_catalog.hpp"

using namespace vofrac;

namespace {

CaseInputs anchor_inputs() {
  CaseInputs in;
  in.f = parse("x");
  in.g = parse("x");
  in.alpha = parse("1");
  in.beta = parse("1");
  in.a = 0.0;
  in.c = 0.0;
  in.t = 1.0;
  in.s = 1.0;
  return in;
}

CaseInputs with_s_equal_t(CaseInputs in) {
  in.s.reset();
  return in;
}

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

const char* kFunctions[] = {"x", "x^2", "sin(3*x)", "exp(-x)", "1/(1+x^2)", "x+1", "cos(x)-x"};
const char* kOrders[] = {"1", "0.5", "0.6+0.2*sin(t*s)", "0.8+0.3*t-0.1*s", "1.4+0.2*t*s"};

// Random exact-identity inputs with a mix of constant and variable orders.
CaseInputs random_inputs(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> fpick(0, std::size(kFunctions) - 1);
  std::uniform_int_distribution<std::size_t> opick(0, std::size(kOrders) - 1);
  std::uniform_real_distribution<double> point(0.5, 1.6);
  std::uniform_real_distribution<double> lower(0.0, 0.3);
  CaseInputs in;
  in.f = parse(kFunctions[fpick(rng)]);
  in.g = parse(kFunctions[fpick(rng)]);
  in.alpha = parse(kOrders[opick(rng)]);
  in.beta = parse(kOrders[opick(rng)]);
  in.a = 0.0;
  in.c = lower(rng);
  in.t = point(rng);
  in.s = point(rng);
  return in;
}

}  // namespace

TEST(Inventory, NamesAndClassification) {
  const auto inv = identity_inventory();
  EXPECT_EQ(inv.size(), 19u);
  std::set<std::string_view> names;
  for (const IdentityInfo& info : inv) {
    names.insert(info.name);
    EXPECT_EQ(parse_identity_id(info.name), info.id);
    const bool exact = info.id == IdentityId::ThmMain || info.id == IdentityId::ThmDiff;
    EXPECT_EQ(info.classification, exact ? Classification::Exact : Classification::Asserted) << info.name;
  }
  EXPECT_EQ(names.size(), inv.size());
  EXPECT_THROW(parse_identity_id("PROD_V"), std::invalid_argument);
  EXPECT_EQ(to_string(AuditStatus::ExactPass), "exact-pass");
  EXPECT_EQ(to_string(Classification::Asserted), "asserted");
}

TEST(Anchor, ElementaryValues) {
  const EvalContext ctx;
  const CaseInputs in = anchor_inputs();

  const AuditRecord main = eval_thm_main(in, ctx);
  EXPECT_NEAR(main.lhs, 2.0 / 3.0, 1e-9);
  EXPECT_NEAR(main.rhs, 2.0 / 3.0, 1e-9);
  EXPECT_EQ(main.status, AuditStatus::ExactPass);
  ASSERT_TRUE(main.mixed_term);
  EXPECT_NEAR(*main.mixed_term, 1.0 / 6.0, 1e-9);

  const AuditRecord diff = eval_thm_diff(in, ctx);
  EXPECT_NEAR(diff.lhs, 1.0 / 6.0, 1e-9);
  EXPECT_NEAR(diff.rhs, 1.0 / 6.0, 1e-9);
  EXPECT_EQ(diff.status, AuditStatus::ExactPass);

  const OperatorValue m = mixed_term(in, ctx);
  EXPECT_NEAR(m.value, 1.0 / 6.0, 1e-10);

  CaseInputs p3 = with_s_equal_t(in);
  p3.beta.reset();
  p3.c.reset();
  const AuditRecord prod3 = eval_product_rule(3, p3, ctx);
  EXPECT_NEAR(prod3.lhs - prod3.rhs, 1.0 / 12.0, 1e-9);
  EXPECT_EQ(prod3.status, AuditStatus::AssertedMeasured);
  ASSERT_TRUE(prod3.reconciliation_res);
  EXPECT_NEAR(*prod3.reconciliation_res, 0.0, 1e-9);

  const AuditRecord zero = eval_cor_diff_zero(with_s_equal_t(in), ctx);
  EXPECT_NEAR(zero.lhs, 1.0 / 6.0, 1e-9);
  EXPECT_EQ(zero.rhs, 0.0);
  EXPECT_NEAR(zero.abs_res, 1.0 / 6.0, 1e-9);
  ASSERT_TRUE(zero.mixed_term);
  EXPECT_LE(std::fabs(zero.abs_res - *zero.mixed_term), 10.0 * zero.err_budget);
  EXPECT_TRUE(reconciles(zero, ctx.spec.abs_tol));
}

TEST(Anchor, Bivariate) {
  const EvalContext ctx;
  CaseInputs in = anchor_inputs();
  in.f.reset();
  in.g.reset();
  in.F = parse("t");
  in.G = parse("s");
  const AuditRecord sep = eval_thm_bivar(in, ctx);
  EXPECT_NEAR(sep.lhs, 0.25, 1e-9);
  EXPECT_NEAR(sep.rhs, 0.25, 1e-9);
  EXPECT_LE(sep.abs_res, 1e-8);
  in.F = parse("t+s");
  in.G = parse("t+s");
  const AuditRecord sum = eval_thm_bivar(in, ctx);
  EXPECT_NEAR(sum.lhs, 7.0 / 6.0, 1e-8);
  EXPECT_NEAR(sum.rhs, 1.0, 1e-8);
  EXPECT_NEAR(sum.abs_res, 1.0 / 6.0, 1e-8);
}

// f = x^2, g = x, alpha = 1, a = 0, t = 1: LHS = 1/3, RHS = 1/2.
TEST(Anchor, ChainRule) {
  CaseInputs in;
  in.f = parse("x^2");
  in.g = parse("x");
  in.alpha = parse("1");
  in.t = 1.0;
  const AuditRecord r = eval_chain_rule(3, in, EvalContext{});
  EXPECT_NEAR(r.lhs, 1.0 / 3.0, 1e-10);
  EXPECT_NEAR(r.rhs, 0.5, 1e-10);
}

TEST(Anchor, DerivativeProduct) {
  const EvalContext ctx;
  CaseInputs in;
  in.f = parse("x");
  in.g = parse("1");
  in.alpha = parse("0.5");
  in.t = 1.0;
  in.symmetrized = true;
  const AuditRecord sym = eval_deriv_prod_iii(in, ctx);
  const double oracle = 1.0 / std::tgamma(1.5);
  EXPECT_NEAR(sym.lhs, oracle, 1e-6);
  EXPECT_NEAR(sym.rhs, oracle, 1e-6);

  in.f = parse("2");
  in.g = parse("3");
  in.symmetrized = false;
  const AuditRecord consts = eval_deriv_prod_iii(in, ctx);
  EXPECT_LE(consts.abs_res, 10.0 * consts.err_budget);
  EXPECT_NEAR(consts.lhs, 6.0 / std::tgamma(0.5), 1e-6);

  in.f = parse("0");
  const AuditRecord zero = eval_deriv_prod_iii(in, ctx);
  EXPECT_LE(zero.abs_res, ctx.spec.abs_tol);
}

TEST(Preconditions, InputSets) {
  const EvalContext ctx;
  CaseInputs in = anchor_inputs();
  CaseInputs missing = in;
  missing.g.reset();
  EXPECT_THROW(eval_thm_main(missing, ctx), PreconditionError);
  CaseInputs extra = in;
  extra.h = parse("x");
  EXPECT_THROW(eval_thm_main(extra, ctx), PreconditionError);
  CaseInputs unequal = in;
  unequal.s = 0.8;
  EXPECT_THROW(eval_product_rule(1, unequal, ctx), PreconditionError);
  CaseInputs shifted = with_s_equal_t(in);
  shifted.c = 0.2;
  EXPECT_THROW(eval_product_rule(2, shifted, ctx), PreconditionError);
  EXPECT_NO_THROW(eval_product_rule(1, shifted, ctx));
  CaseInputs flat = in;
  flat.t = 0.0;
  EXPECT_THROW(eval_thm_main(flat, ctx), PreconditionError);
  EXPECT_THROW(eval_product_rule(5, in, ctx), std::invalid_argument);

  CaseInputs power;
  power.f = parse("x");
  power.alpha = parse("0.5");
  power.n = 1;
  EXPECT_THROW(eval_power_rule(power, ctx), PreconditionError);

  CaseInputs two_vars = with_s_equal_t(in);
  two_vars.beta.reset();
  two_vars.c.reset();
  two_vars.f = parse("x+y");
  EXPECT_THROW(eval_product_rule(3, two_vars, ctx), PreconditionError);
}

TEST(Preconditions, QuotientAndChain) {
  const EvalContext ctx;
  CaseInputs q;
  q.f = parse("x");
  q.h = parse("x+0.5");
  q.alpha = parse("0.5");
  q.t = 1.0;
  EXPECT_NO_THROW(eval_quotient_rule(3, q, ctx));
  q.h = parse("sin(x)");
  EXPECT_THROW(eval_quotient_rule(3, q, ctx), PreconditionError);

  CaseInputs c;
  c.f = parse("x-2");
  c.g = parse("x");
  c.alpha = parse("1");
  c.c = 0.0;
  c.t = 1.0;
  EXPECT_THROW(eval_chain_rule(2, c, ctx), PreconditionError);
}

// Exactness over random inputs mixing constant and variable orders.
TEST(Property, ExactIdentitiesHold) {
  std::mt19937_64 rng(2026);
  const EvalContext ctx;
  std::vector<BankCase> bank;
  for (int i = 0; i < 10; ++i) {
    const CaseInputs in = random_inputs(rng);
    bank.push_back({IdentityId::ThmMain, in});
    bank.push_back({IdentityId::ThmDiff, in});
  }
  const auto records = run_bank(bank, ctx, 2);
  ASSERT_EQ(records.size(), 20u);
  for (const AuditRecord& r : records) {
    EXPECT_EQ(r.status, AuditStatus::ExactPass) << r.message << " " << r.abs_res << " " << r.err_budget;
    EXPECT_TRUE(within_budget(r, ctx.spec.abs_tol));
  }
}

TEST(Property, ProductReconciliation) {
  std::mt19937_64 rng(77);
  const EvalContext ctx;
  for (int i = 0; i < 6; ++i) {
    CaseInputs in = random_inputs(rng);
    in.s.reset();
    for (int kind = 1; kind <= 4; ++kind) {
      CaseInputs k = in;
      if (kind >= 2) k.c.reset();
      if (kind >= 3) k.beta.reset();
      if (kind == 4) k.g.reset();
      const AuditRecord r = eval_product_rule(kind, k, ctx);
      EXPECT_TRUE(reconciles(r, ctx.spec.abs_tol)) << kind << " " << *r.reconciliation_res;
    }
  }
}

TEST(Property, DiffZeroMatchesMixedTerm) {
  std::mt19937_64 rng(99);
  const EvalContext ctx;
  for (int i = 0; i < 6; ++i) {
    CaseInputs in = random_inputs(rng);
    in.s.reset();
    const AuditRecord r = eval_cor_diff_zero(in, ctx);
    ASSERT_TRUE(r.mixed_term);
    EXPECT_LE(std::fabs(r.lhs - *r.mixed_term), std::max(10.0 * r.err_budget, ctx.spec.abs_tol));
  }
}

TEST(Property, PowerTwoMatchesProductFour) {
  std::mt19937_64 rng(5);
  const EvalContext ctx;
  for (int i = 0; i < 5; ++i) {
    CaseInputs in = random_inputs(rng);
    CaseInputs p4;
    p4.f = in.f;
    p4.alpha = in.alpha;
    p4.t = in.t;
    CaseInputs pn = p4;
    pn.n = 2;
    const AuditRecord a = eval_product_rule(4, p4, ctx);
    const AuditRecord b = eval_power_rule(pn, ctx);
    EXPECT_LE(std::fabs(a.lhs - b.lhs), 10.0 * (a.err_budget + b.err_budget));
    EXPECT_LE(std::fabs(a.rhs - b.rhs), 10.0 * (a.err_budget + b.err_budget));
  }
}

TEST(Property, DiffSquaredConstantCollapses) {
  const EvalContext ctx;
  CaseInputs in = anchor_inputs();
  in.g.reset();
  in.f = parse("2.5");
  in.alpha = parse("0.6+0.2*sin(t*s)");
  in.c = 0.1;
  in.s = 0.9;
  const AuditRecord r = eval_cor_diff_sq(in, ctx);
  EXPECT_LE(r.abs_res, 10.0 * r.err_budget);
}

TEST(Bank, OrderDeterminismAndFailures) {
  const EvalContext ctx;
  EXPECT_TRUE(run_bank({}, ctx, 4).empty());
  std::mt19937_64 rng(1);
  const CaseInputs in = random_inputs(rng);
  CaseInputs broken = in;
  broken.f.reset();
  const std::vector<BankCase> bank{{IdentityId::ThmMain, in}, {IdentityId::ThmMain, broken},
                                   {IdentityId::ThmMain, in}, {IdentityId::ThmDiff, in}};
  const auto serial = run_bank(bank, ctx, 1);
  const auto parallel = run_bank(bank, EvalContext{}, 4);
  ASSERT_EQ(serial.size(), 4u);
  EXPECT_EQ(serial[1].status, AuditStatus::Unresolved);
  EXPECT_NE(serial[1].message.find("missing"), std::string::npos);
  EXPECT_TRUE(same_bits(serial[0].lhs, serial[2].lhs));
  EXPECT_TRUE(same_bits(serial[0].rhs, serial[2].rhs));
  for (std::size_t i = 0; i < serial.size(); ++i) {
    EXPECT_EQ(serial[i].id, parallel[i].id);
    EXPECT_EQ(serial[i].status, parallel[i].status);
    if (serial[i].status != AuditStatus::Unresolved) {
      EXPECT_TRUE(same_bits(serial[i].lhs, parallel[i].lhs));
      EXPECT_TRUE(same_bits(serial[i].err_budget, parallel[i].err_budget));
    }
  }
}
