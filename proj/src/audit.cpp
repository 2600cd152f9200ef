#include "vofrac/audit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace vofrac {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

const json& require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  return j;
}

double number_at(const json& obj, const char* key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(where + "." + key + " must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(where + "." + key + " must be finite");
  return x;
}

int integer_at(const json& obj, const char* key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_number_integer()) throw ConfigError(where + "." + key + " must be an integer");
  return v.get<int>();
}

std::string string_at(const json& obj, const char* key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_string()) throw ConfigError(where + "." + key + " must be a string");
  return v.get<std::string>();
}

bool bool_at(const json& obj, const char* key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_boolean()) throw ConfigError(where + "." + key + " must be a boolean");
  return v.get<bool>();
}

Expr parse_expression(const std::string& text, const std::string& where) {
  try {
    return parse(text);
  } catch (const ParseError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

QuadSpec parse_quad(const json& j, QuadSpec spec) {
  require_object(j, "quad");
  reject_unknown_keys(j, {"rel_tol", "abs_tol", "panel_order", "max_panels", "grading_ratio",
                          "min_exponent_guard"},
                      "quad");
  if (j.contains("rel_tol")) spec.rel_tol = number_at(j, "rel_tol", "quad");
  if (j.contains("abs_tol")) spec.abs_tol = number_at(j, "abs_tol", "quad");
  if (j.contains("panel_order")) spec.panel_order = integer_at(j, "panel_order", "quad");
  if (j.contains("max_panels")) spec.max_panels = integer_at(j, "max_panels", "quad");
  if (j.contains("grading_ratio")) spec.grading_ratio = number_at(j, "grading_ratio", "quad");
  if (j.contains("min_exponent_guard")) {
    spec.min_exponent_guard = number_at(j, "min_exponent_guard", "quad");
  }
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("quad: ") + e.what());
  }
  return spec;
}

NamedOperator parse_operator(const std::string& name, const json& j) {
  const std::string where = "operators." + name;
  require_object(j, where);
  reject_unknown_keys(j, {"a", "alpha", "codomain"}, where);
  NamedOperator op;
  if (j.contains("a")) op.a = number_at(j, "a", where);
  if (!j.contains("alpha")) throw ConfigError(where + ": missing 'alpha'");
  op.alpha = parse_expression(string_at(j, "alpha", where), where + ".alpha");
  for (const auto& v : free_vars(op.alpha)) {
    if (v != "t" && v != "s") {
      throw ConfigError(where + ".alpha: unknown variable '" + v + "' (orders use t and s)");
    }
  }
  if (j.contains("codomain")) {
    const std::string tag = string_at(j, "codomain", where);
    if (tag == "positive") {
      op.codomain = OrderCodomain::Positive;
    } else if (tag == "unit-interval") {
      op.codomain = OrderCodomain::UnitInterval;
    } else {
      throw ConfigError(where + ".codomain: expected 'positive' or 'unit-interval', got '" + tag +
                        "'");
    }
  }
  return op;
}

void check_codomain(const std::string& name, const NamedOperator& op, double upper) {
  const BivariateFn fn = bind_bivariate(op.alpha, "t", "s");
  const double hi = upper > op.a ? upper : op.a + 1.0;
  const Box box{op.a, hi, op.a, hi};
  const BoxCheck check = op.codomain == OrderCodomain::UnitInterval
                             ? check_bounded_on_box(fn, box, kOrderCheckGrid, 0.0, 1.0, true)
                             : check_positive_on_box(fn, box, kOrderCheckGrid, 0.0, true);
  if (!check.pass) {
    throw ConfigError("operators." + name + ": order '" + op.alpha.print() + "' leaves its " +
                      (op.codomain == OrderCodomain::UnitInterval ? "(0, 1)" : "positive") +
                      " codomain on a <= s <= t <= " + format_number(hi) + " (sampled range [" +
                      format_number(check.min_value) + ", " + format_number(check.max_value) +
                      "])");
  }
}

std::string fmt_or_empty(const std::optional<double>& v) {
  return v && std::isfinite(*v) ? format_number(*v) : std::string();
}

json json_or_null(const std::optional<double>& v) {
  return v && std::isfinite(*v) ? json(*v) : json(nullptr);
}

std::optional<double> finite(double v) {
  return std::isfinite(v) ? std::optional<double>(v) : std::nullopt;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

RunConfig parse_run_config(const json& doc) {
  require_object(doc, "config");
  reject_unknown_keys(doc, {"quad", "fd_step", "fd_mode", "workers", "strict", "record_timing",
                            "operators", "functions", "cases", "output"},
                      "config");
  RunConfig cfg;
  try {
    if (doc.contains("quad")) cfg.quad = parse_quad(doc.at("quad"), cfg.quad);
    if (doc.contains("fd_step")) {
      cfg.fd_step = number_at(doc, "fd_step", "config");
      if (!(cfg.fd_step > 0.0)) throw ConfigError("config.fd_step must be positive");
    }
    if (doc.contains("fd_mode")) {
      const std::string mode = string_at(doc, "fd_mode", "config");
      if (mode == "central") {
        cfg.fd_mode = FdMode::Central;
      } else if (mode == "forward") {
        cfg.fd_mode = FdMode::Forward;
      } else {
        throw ConfigError("config.fd_mode: expected 'central' or 'forward', got '" + mode + "'");
      }
    }
    if (doc.contains("workers")) {
      cfg.workers = integer_at(doc, "workers", "config");
      if (cfg.workers < 1) throw ConfigError("config.workers must be at least 1");
    }
    if (doc.contains("strict")) cfg.strict = bool_at(doc, "strict", "config");
    if (doc.contains("record_timing")) cfg.record_timing = bool_at(doc, "record_timing", "config");
    if (doc.contains("output")) {
      const json& out = require_object(doc.at("output"), "output");
      reject_unknown_keys(out, {"csv", "json"}, "output");
      if (out.contains("csv")) cfg.csv_path = string_at(out, "csv", "output");
      if (out.contains("json")) cfg.json_path = string_at(out, "json", "output");
    }

    std::map<std::string, NamedOperator> operators;
    if (doc.contains("operators")) {
      for (const auto& [name, value] : require_object(doc.at("operators"), "operators").items()) {
        operators.emplace(name, parse_operator(name, value));
      }
    }
    std::map<std::string, Expr> functions;
    if (doc.contains("functions")) {
      for (const auto& [name, value] : require_object(doc.at("functions"), "functions").items()) {
        if (!value.is_string()) throw ConfigError("functions." + name + " must be a string");
        functions.emplace(name, parse_expression(value.get<std::string>(), "functions." + name));
      }
    }

    std::map<std::string, double> operator_reach;
    if (!doc.contains("cases")) throw ConfigError("config: missing 'cases'");
    const json& cases = doc.at("cases");
    if (!cases.is_array()) throw ConfigError("config.cases must be an array");
    for (std::size_t i = 0; i < cases.size(); ++i) {
      const std::string where = "cases[" + std::to_string(i) + "]";
      const json& c = require_object(cases[i], where);
      reject_unknown_keys(c, {"label", "identity", "inputs", "points"}, where);
      const std::string label =
          c.contains("label") ? string_at(c, "label", where) : "case" + std::to_string(i);
      if (!c.contains("identity")) throw ConfigError(where + ": missing 'identity'");
      const std::string id_name = string_at(c, "identity", where);
      IdentityId id;
      try {
        id = parse_identity_id(id_name);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(where + ": " + e.what());
      }

      CaseInputs base;
      const json inputs = c.contains("inputs") ? c.at("inputs") : json::object();
      require_object(inputs, where + ".inputs");
      reject_unknown_keys(inputs, {"f", "g", "h", "F", "G", "alpha", "beta", "c", "n", "symmetrized"},
                          where + ".inputs");
      const auto function = [&](const char* key) -> std::optional<Expr> {
        if (!inputs.contains(key)) return std::nullopt;
        const std::string name = string_at(inputs, key, where + ".inputs");
        const auto it = functions.find(name);
        if (it == functions.end()) {
          throw ConfigError(where + ".inputs." + key + ": unknown function '" + name + "'");
        }
        return it->second;
      };
      const auto op = [&](const char* key) -> const std::pair<const std::string, NamedOperator>* {
        if (!inputs.contains(key)) return nullptr;
        const std::string name = string_at(inputs, key, where + ".inputs");
        const auto it = operators.find(name);
        if (it == operators.end()) {
          throw ConfigError(where + ".inputs." + key + ": unknown operator '" + name + "'");
        }
        return &*it;
      };
      base.f = function("f");
      base.g = function("g");
      base.h = function("h");
      base.F = function("F");
      base.G = function("G");
      const auto* alpha = op("alpha");
      const auto* beta = op("beta");
      if (alpha) {
        base.alpha = alpha->second.alpha;
        base.a = alpha->second.a;
      }
      if (beta) {
        base.beta = beta->second.alpha;
        base.c = beta->second.a;
      }
      if (inputs.contains("c")) {
        const double c_value = number_at(inputs, "c", where + ".inputs");
        if (beta && c_value != beta->second.a) {
          throw ConfigError(where + ".inputs.c conflicts with the lower limit of operator '" +
                            beta->first + "'");
        }
        base.c = c_value;
      }
      if (inputs.contains("n")) base.n = integer_at(inputs, "n", where + ".inputs");
      if (inputs.contains("symmetrized")) {
        base.symmetrized = bool_at(inputs, "symmetrized", where + ".inputs");
        if (base.symmetrized && id != IdentityId::DerivProdIII) {
          throw ConfigError(where + ": 'symmetrized' applies to DERIV_PROD_III only");
        }
      }

      if (!c.contains("points") || !c.at("points").is_array() || c.at("points").empty()) {
        throw ConfigError(where + ": 'points' must be a non-empty array");
      }
      const json& points = c.at("points");
      for (std::size_t k = 0; k < points.size(); ++k) {
        const std::string pw = where + ".points[" + std::to_string(k) + "]";
        const json& p = require_object(points[k], pw);
        reject_unknown_keys(p, {"t", "s"}, pw);
        if (!p.contains("t")) throw ConfigError(pw + ": missing 't'");
        CaseInputs in = base;
        in.t = number_at(p, "t", pw);
        if (p.contains("s")) in.s = number_at(p, "s", pw);
        try {
          check_required_inputs(id, in);
        } catch (const PreconditionError& e) {
          throw ConfigError(pw + ": " + e.what());
        }
        if (alpha) {
          double& reach = operator_reach[alpha->first];
          reach = std::max(reach, in.t);
        }
        if (beta) {
          double& reach = operator_reach[beta->first];
          reach = std::max(reach, in.s.value_or(in.t));
        }
        const std::string row_label = points.size() > 1 ? label + "@" + std::to_string(k) : label;
        cfg.cases.push_back({row_label, {id, in}});
      }
    }
    for (const auto& [name, op] : operators) {
      const auto it = operator_reach.find(name);
      check_codomain(name, op, it == operator_reach.end() ? op.a : it->second);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_run_config(doc);
}

ReportRow make_row(const PlannedCase& planned, const AuditRecord& record,
                   std::optional<double> wall_time_ms) {
  ReportRow row;
  row.identity_id = std::string(identity_info(record.id).name);
  row.case_label = planned.label;
  row.t = planned.bank.inputs.t;
  row.s = planned.bank.inputs.s;
  row.lhs = finite(record.lhs);
  row.rhs = finite(record.rhs);
  row.abs_res = finite(record.abs_res);
  row.rel_res = finite(record.rel_res);
  row.mixed_term = record.mixed_term;
  row.reconciliation_res = record.reconciliation_res;
  row.status = std::string(to_string(record.status));
  row.err_budget = finite(record.err_budget);
  row.wall_time_ms = wall_time_ms;
  row.message = record.message;
  return row;
}

std::string report_csv(const std::vector<ReportRow>& rows) {
  std::ostringstream out;
  for (std::size_t i = 0; i < kReportColumns.size(); ++i) {
    out << (i ? "," : "") << kReportColumns[i];
  }
  out << "\n";
  for (const ReportRow& r : rows) {
    out << csv_field(r.identity_id) << ',' << csv_field(r.case_label) << ',' << format_number(r.t)
        << ',' << fmt_or_empty(r.s) << ',' << fmt_or_empty(r.lhs) << ',' << fmt_or_empty(r.rhs)
        << ',' << fmt_or_empty(r.abs_res) << ',' << fmt_or_empty(r.rel_res) << ','
        << fmt_or_empty(r.mixed_term) << ',' << fmt_or_empty(r.reconciliation_res) << ','
        << r.status << ',' << fmt_or_empty(r.err_budget) << ',' << fmt_or_empty(r.wall_time_ms)
        << "\n";
  }
  return out.str();
}

json report_json(const std::vector<ReportRow>& rows) {
  json out = json::array();
  for (const ReportRow& r : rows) {
    json row = json::object();
    row["identity_id"] = r.identity_id;
    row["case_label"] = r.case_label;
    row["t"] = r.t;
    row["s"] = json_or_null(r.s);
    row["lhs"] = json_or_null(r.lhs);
    row["rhs"] = json_or_null(r.rhs);
    row["abs_res"] = json_or_null(r.abs_res);
    row["rel_res"] = json_or_null(r.rel_res);
    row["mixed_term"] = json_or_null(r.mixed_term);
    row["reconciliation_res"] = json_or_null(r.reconciliation_res);
    row["status"] = r.status;
    row["err_budget"] = json_or_null(r.err_budget);
    row["wall_time_ms"] = json_or_null(r.wall_time_ms);
    if (!r.message.empty()) row["message"] = r.message;
    out.push_back(std::move(row));
  }
  return out;
}

int audit_exit_code(const std::vector<AuditRecord>& records, bool strict) {
  const auto unresolved = std::count_if(records.begin(), records.end(), [](const AuditRecord& r) {
    return r.status == AuditStatus::Unresolved;
  });
  if (2 * unresolved > static_cast<std::ptrdiff_t>(records.size())) return 2;
  const bool exact_failed = std::any_of(records.begin(), records.end(), [](const AuditRecord& r) {
    return r.status == AuditStatus::ExactFail;
  });
  return strict && exact_failed ? 3 : 0;
}

AuditOutcome run_audit(const RunConfig& config) {
  std::vector<BankCase> bank;
  std::vector<const PlannedCase*> planned;
  for (const PlannedCase& c : config.cases) {
    bank.push_back(c.bank);
    planned.push_back(&c);
    if (c.bank.inputs.symmetrized) bank.back().inputs.symmetrized = false;
  }
  // The symmetrized derivative variant is reported next to the verbatim row.
  std::vector<PlannedCase> variants;
  variants.reserve(config.cases.size());
  std::vector<BankCase> expanded;
  std::vector<const PlannedCase*> expanded_planned;
  for (std::size_t i = 0; i < bank.size(); ++i) {
    expanded.push_back(bank[i]);
    expanded_planned.push_back(planned[i]);
    if (planned[i]->bank.inputs.symmetrized) {
      variants.push_back({planned[i]->label + "/symmetrized", planned[i]->bank});
      expanded.push_back(variants.back().bank);
      expanded_planned.push_back(&variants.back());
    }
  }

  EvalContext ctx;
  ctx.spec = config.quad;
  ctx.fd_step = config.fd_step;
  ctx.fd_mode = config.fd_mode;

  std::vector<double> times;
  AuditOutcome outcome;
  outcome.records = run_bank(expanded, ctx, config.workers, config.record_timing ? &times : nullptr);
  for (std::size_t i = 0; i < expanded.size(); ++i) {
    const AuditRecord& r = outcome.records[i];
    outcome.rows.push_back(make_row(*expanded_planned[i], r,
                                    config.record_timing ? std::optional(times[i]) : std::nullopt));
    switch (r.status) {
      case AuditStatus::ExactPass: ++outcome.exact_pass; break;
      case AuditStatus::ExactFail: ++outcome.exact_fail; break;
      case AuditStatus::AssertedMeasured: ++outcome.asserted_measured; break;
      case AuditStatus::Unresolved: ++outcome.unresolved; break;
    }
  }
  outcome.exit_code = audit_exit_code(outcome.records, config.strict);
  return outcome;
}

void write_reports(const RunConfig& config, const AuditOutcome& outcome) {
  const auto write = [](const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write report '" + path + "'");
    out << text;
    if (!out) throw std::runtime_error("failed writing report '" + path + "'");
  };
  if (!config.csv_path.empty()) write(config.csv_path, report_csv(outcome.rows));
  if (!config.json_path.empty()) write(config.json_path, report_json(outcome.rows).dump(2) + "\n");
}

}  // namespace vofrac
