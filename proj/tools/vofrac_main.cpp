// vofrac: evaluate variable-order fractional integrals and derivatives, and
// audit Leibniz-type identities from a JSON config.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "vofrac/audit.hpp"
#include "vofrac/identity_catalog.hpp"
#include "vofrac/vo_operators.hpp"

using namespace vofrac;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumeric = 2;

struct Globals {
  std::optional<double> rel_tol;
  std::optional<double> abs_tol;
  std::optional<int> workers;
  bool strict = false;
};

struct PointOptions {
  double a = 0.0;
  std::string alpha;
  std::string f;
  double t = 1.0;
  double fd_step = 1e-5;
  std::string fd_mode = "central";
  std::optional<int> panel_order;
  std::optional<int> max_panels;
  std::optional<double> grading_ratio;
};

QuadSpec quad_from(const Globals& g, const PointOptions& p) {
  QuadSpec spec;
  if (g.rel_tol) spec.rel_tol = *g.rel_tol;
  if (g.abs_tol) spec.abs_tol = *g.abs_tol;
  if (p.panel_order) spec.panel_order = *p.panel_order;
  if (p.max_panels) spec.max_panels = *p.max_panels;
  if (p.grading_ratio) spec.grading_ratio = *p.grading_ratio;
  spec.validate();
  return spec;
}

UnivariateFn bind_function(const std::string& text) {
  const Expr e = parse(text);
  const auto vars = free_vars(e);
  if (vars.size() > 1) throw BindError("f must depend on at most one variable: '" + text + "'");
  return bind_univariate(e, vars.empty() ? std::string("x") : *vars.begin());
}

void print_value(const OperatorValue& v) {
  std::printf("value %s\nerr_estimate %s\nconverged %s\n", format_number(v.value).c_str(),
              format_number(v.err_estimate).c_str(), v.converged ? "true" : "false");
}

int cmd_eval(const Globals& g, const PointOptions& p, bool derivative) {
  OperatorValue v;
  try {
    const QuadSpec spec = quad_from(g, p);
    const Expr alpha = parse(p.alpha);
    const UnivariateFn f = bind_function(p.f);
    if (derivative) {
      if (p.fd_mode != "central" && p.fd_mode != "forward") {
        throw std::invalid_argument("--fd-mode must be central or forward");
      }
      const VODerivativeOperator op(p.a, alpha, p.t, spec, p.fd_step,
                                    p.fd_mode == "central" ? FdMode::Central : FdMode::Forward);
      v = vo_derivative(op, f, p.t);
    } else {
      const VOIntegralOperator op(p.a, alpha, p.t, spec);
      v = vo_integral(op, f, p.t);
    }
  } catch (const EvalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DivergentIntegralError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  print_value(v);
  if (!v.converged) {
    std::cerr << "error: quadrature did not converge\n";
    return kExitNumeric;
  }
  return kExitOk;
}

int cmd_audit(const Globals& g, const std::string& path, const std::string& csv,
              const std::string& json) {
  RunConfig cfg;
  try {
    cfg = load_run_config(path);
    if (g.rel_tol) cfg.quad.rel_tol = *g.rel_tol;
    if (g.abs_tol) cfg.quad.abs_tol = *g.abs_tol;
    cfg.quad.validate();
    if (g.workers) cfg.workers = *g.workers;
    if (g.strict) cfg.strict = true;
    if (!csv.empty()) cfg.csv_path = csv;
    if (!json.empty()) cfg.json_path = json;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  const AuditOutcome outcome = run_audit(cfg);
  try {
    write_reports(cfg, outcome);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  for (const ReportRow& row : outcome.rows) {
    if (!row.message.empty()) {
      std::cerr << row.identity_id << " " << row.case_label << ": " << row.message << "\n";
    }
  }
  std::printf("rows %zu\nexact-pass %d\nexact-fail %d\nasserted-measured %d\nunresolved %d\n",
              outcome.rows.size(), outcome.exact_pass, outcome.exact_fail,
              outcome.asserted_measured, outcome.unresolved);
  return outcome.exit_code;
}

int cmd_list() {
  for (const IdentityInfo& info : identity_inventory()) {
    std::printf("%-15s %-9s %s\n", std::string(info.name).c_str(),
                std::string(to_string(info.classification)).c_str(),
                std::string(info.required_inputs).c_str());
  }
  return kExitOk;
}

void add_point_options(CLI::App* cmd, PointOptions& p, bool derivative) {
  cmd->add_option("--a", p.a, "lower limit")->default_val(0.0);
  cmd->add_option("--alpha", p.alpha, "order expression in t and s")->required();
  cmd->add_option("--f", p.f, "integrand expression in one variable")->required();
  cmd->add_option("--t", p.t, "evaluation point")->default_val(1.0);
  cmd->add_option("--panel-order", p.panel_order, "Gauss-Kronrod points per panel");
  cmd->add_option("--max-panels", p.max_panels, "panel budget");
  cmd->add_option("--grading-ratio", p.grading_ratio, "geometric mesh ratio");
  if (derivative) {
    cmd->add_option("--fd-step", p.fd_step, "relative finite-difference step")->default_val(1e-5);
    cmd->add_option("--fd-mode", p.fd_mode, "central or forward")->default_val("central");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variable-order fractional operators and identity audits"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals globals;
  app.add_option("--rel-tol", globals.rel_tol, "relative quadrature tolerance");
  app.add_option("--abs-tol", globals.abs_tol, "absolute quadrature tolerance");
  app.add_option("--workers", globals.workers, "audit worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--strict", globals.strict, "exit 3 when an exact identity fails");

  PointOptions int_opts;
  CLI::App* eval_int = app.add_subcommand("eval-int", "evaluate I^alpha f(t)");
  add_point_options(eval_int, int_opts, false);

  PointOptions der_opts;
  CLI::App* eval_der = app.add_subcommand("eval-der", "evaluate D^alpha f(t)");
  add_point_options(eval_der, der_opts, true);

  std::string config_path;
  std::string csv_path;
  std::string json_path;
  CLI::App* audit = app.add_subcommand("audit", "run identity audits from a JSON config");
  audit->add_option("config", config_path, "config file")->required();
  audit->add_option("--csv", csv_path, "CSV report path (overrides the config)");
  audit->add_option("--json", json_path, "JSON report path (overrides the config)");

  CLI::App* list = app.add_subcommand("list", "list the identity catalog");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (*eval_int) return cmd_eval(globals, int_opts, false);
  if (*eval_der) return cmd_eval(globals, der_opts, true);
  if (*audit) return cmd_audit(globals, config_path, csv_path, json_path);
  if (*list) return cmd_list();
  return kExitConfig;
}
