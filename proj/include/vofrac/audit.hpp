#pragma once

// Config-driven identity audits: JSON run configuration in, CSV and JSON
// reports out.

#include <array>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "vofrac/identity_catalog.hpp"

namespace vofrac {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class OrderCodomain { Positive, UnitInterval };

struct NamedOperator {
  double a = 0.0;
  Expr alpha = Expr::constant(1.0);
  OrderCodomain codomain = OrderCodomain::Positive;
};

/// One resolved (case, evaluation point) pair.
struct PlannedCase {
  std::string label;
  BankCase bank;
};

struct RunConfig {
  QuadSpec quad;
  double fd_step = 1e-5;
  FdMode fd_mode = FdMode::Central;
  int workers = 1;
  bool strict = false;
  /// Off by default so that reports are byte-identical across runs.
  bool record_timing = false;
  std::vector<PlannedCase> cases;
  std::string csv_path;
  std::string json_path;
};

/// Throws ConfigError on malformed documents, unresolved names, unknown
/// identity ids and cases whose inputs do not match their identity.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);

struct ReportRow {
  std::string identity_id;
  std::string case_label;
  double t = 0.0;
  std::optional<double> s;
  std::optional<double> lhs;
  std::optional<double> rhs;
  std::optional<double> abs_res;
  std::optional<double> rel_res;
  std::optional<double> mixed_term;
  std::optional<double> reconciliation_res;
  std::string status;
  std::optional<double> err_budget;
  std::optional<double> wall_time_ms;
  std::string message;
};

inline constexpr std::array<const char*, 13> kReportColumns{
    "identity_id", "case_label", "t",      "s",          "lhs",          "rhs",
    "abs_res",     "rel_res",    "mixed_term", "reconciliation_res", "status",
    "err_budget",  "wall_time_ms"};

ReportRow make_row(const PlannedCase& planned, const AuditRecord& record,
                   std::optional<double> wall_time_ms);

std::string format_number(double v);
std::string report_csv(const std::vector<ReportRow>& rows);
nlohmann::json report_json(const std::vector<ReportRow>& rows);

struct AuditOutcome {
  std::vector<AuditRecord> records;
  std::vector<ReportRow> rows;
  int exact_pass = 0;
  int exact_fail = 0;
  int asserted_measured = 0;
  int unresolved = 0;
  int exit_code = 0;
};

/// 0 normally, 2 when more than half the rows are unresolved, 3 under
/// strict when an exact identity fails (2 takes precedence).
int audit_exit_code(const std::vector<AuditRecord>& records, bool strict);

/// Runs every planned case and fills the outcome; does not write files.
AuditOutcome run_audit(const RunConfig& config);

/// Writes the CSV and JSON reports named by the config (empty paths skip).
void write_reports(const RunConfig& config, const AuditOutcome& outcome);

}  // namespace vofrac
