#pragma once

// Leibniz-type identities for variable-order integrals, each evaluated as a
// left-hand side and a right-hand side. Two identities are algebraic
// rearrangements and must hold to quadrature accuracy ("exact"); the rest
// drop the nested mixed term and are only measured ("asserted").
//
// Notation: I = I^alpha with lower limit a evaluated at t, J = I^beta with
// lower limit c evaluated at s, and the mixed term
//
//   M = J_y[ I_x[ (f(x) - f(y)) (g(x) - g(y)) ] ].

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vofrac/exprlang.hpp"
#include "vofrac/quadrature.hpp"
#include "vofrac/vo_operators.hpp"

namespace vofrac {

enum class IdentityId {
  ThmMain,
  ProdI,
  ProdII,
  ProdIII,
  ProdIV,
  QuotI,
  QuotII,
  QuotIII,
  QuotIV,
  PowerN,
  ChainI,
  ChainII,
  ChainIII,
  ChainIV,
  ThmDiff,
  CorDiffSq,
  CorDiffZero,
  ThmBivar,
  DerivProdIII,
};

enum class Classification { Exact, Asserted };

enum class AuditStatus { ExactPass, ExactFail, AssertedMeasured, Unresolved };

struct IdentityInfo {
  IdentityId id;
  std::string_view name;
  Classification classification;
  std::string_view required_inputs;
  std::string_view summary;
};

std::span<const IdentityInfo> identity_inventory();
const IdentityInfo& identity_info(IdentityId id);
/// Throws std::invalid_argument naming the offending id.
IdentityId parse_identity_id(std::string_view name);
std::string_view to_string(AuditStatus status);
std::string_view to_string(Classification c);

class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Inputs of one identity evaluation. Univariate functions may use any single
/// variable name; F and G and the orders are expressions in t and s.
struct CaseInputs {
  std::optional<Expr> f, g, h, F, G;
  std::optional<Expr> alpha, beta;
  double a = 0.0;
  std::optional<double> c;
  double t = 1.0;
  std::optional<double> s;
  std::optional<int> n;
  /// Derivative product rule only: swap the duplicated last term to the
  /// f-integral / g-derivative form.
  bool symmetrized = false;
};

struct EvalContext {
  QuadSpec spec;
  double fd_step = 1e-5;
  FdMode fd_mode = FdMode::Central;
  std::shared_ptr<UnitIntegralMemo> memo = std::make_shared<UnitIntegralMemo>();
};

struct AuditRecord {
  IdentityId id = IdentityId::ThmMain;
  double lhs = 0.0;
  double rhs = 0.0;
  double abs_res = 0.0;
  double rel_res = 0.0;
  Classification classification = Classification::Asserted;
  AuditStatus status = AuditStatus::Unresolved;
  std::optional<double> mixed_term;
  std::optional<double> reconciliation_res;
  double err_budget = 0.0;
  std::string message;
};

/// abs_res <= max(10 * err_budget, abs_floor).
bool within_budget(const AuditRecord& r, double abs_floor);

/// Same test for the reconciliation residual; false when there is none.
bool reconciles(const AuditRecord& r, double abs_floor);

OperatorValue mixed_term(const CaseInputs& in, const EvalContext& ctx);

AuditRecord eval_thm_main(const CaseInputs& in, const EvalContext& ctx);
AuditRecord eval_product_rule(int kind, const CaseInputs& in, const EvalContext& ctx);
AuditRecord eval_quotient_rule(int kind, const CaseInputs& in, const EvalContext& ctx);
AuditRecord eval_power_rule(const CaseInputs& in, const EvalContext& ctx);
AuditRecord eval_chain_rule(int kind, const CaseInputs& in, const EvalContext& ctx);
AuditRecord eval_thm_diff(const CaseInputs& in, const EvalContext& ctx);
AuditRecord eval_cor_diff_sq(const CaseInputs& in, const EvalContext& ctx);
AuditRecord eval_cor_diff_zero(const CaseInputs& in, const EvalContext& ctx);
AuditRecord eval_thm_bivar(const CaseInputs& in, const EvalContext& ctx);
AuditRecord eval_deriv_prod_iii(const CaseInputs& in, const EvalContext& ctx);

/// Checks the input set an identity requires (missing or unexpected inputs,
/// t > a, c = a or s = t where tied). Throws PreconditionError.
void check_required_inputs(IdentityId id, const CaseInputs& in);

/// Dispatches on id. Precondition and evaluation failures propagate.
AuditRecord evaluate_identity(IdentityId id, const CaseInputs& in, const EvalContext& ctx);

struct BankCase {
  IdentityId id;
  CaseInputs inputs;
};

/// Evaluates every case on up to `workers` threads. Output order matches
/// input order; a failing case becomes an Unresolved record carrying the
/// error message. When `wall_time_ms` is given it receives the per-case
/// evaluation time in milliseconds.
std::vector<AuditRecord> run_bank(std::span<const BankCase> bank, const EvalContext& ctx,
                                  int workers, std::vector<double>* wall_time_ms = nullptr);

}  // namespace vofrac
