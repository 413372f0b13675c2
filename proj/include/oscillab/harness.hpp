#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "oscillab/norms.hpp"

namespace oscillab {

constexpr int kSchemaVersion = 1;

// One sweep: phase, boxes, lambda list and estimator settings. Suite-specific keys stay in
// `extra`.
struct ExperimentConfig {
  std::string id;
  std::string phase;
  int d = 1;
  Params params;
  Box x_box, y_box;
  std::vector<double> lambdas;
  std::vector<std::pair<double, double>> pq;
  double K = 6.0;
  std::string bump = "plateau";
  int starts = 2;
  double tol = 1e-6;
  int max_iter = 300;
  std::uint64_t seed = 0;
  nlohmann::json extra;

  PhasePtr make_phase() const;
  OperatorConfig operator_config(double lambda, Localization loc = {}) const;
};

struct HarnessConfig {
  nlohmann::json raw;  // merged configuration, echoed into reports
  std::uint64_t seed = 0;
  bool full = false;
  std::string out_dir = "oscillab-out";

  const nlohmann::json& section(const std::string& name) const;
  ExperimentConfig experiment(const std::string& id) const;
};

// Built-in configuration; every suite reads its experiments from here.
nlohmann::json default_config_json();
// Defaults merge-patched with `patch`, validated. Throws ConfigError.
HarnessConfig load_config(const nlohmann::json& patch);
HarnessConfig load_config_file(const std::string& path);

struct EstimateRow {
  std::string experiment_id, phase;
  int d = 0;
  double lambda = 0, p = 2, q = 2;
  std::string method;
  double value = 0;
  int iterations = 0;
  bool converged = false;
  std::uint64_t seed = 0;
  double runtime_ms = 0;

  bool operator==(const EstimateRow&) const = default;
};

struct FitRecord {
  std::string id;
  std::string label;
  std::vector<double> lambdas, values;
  double exponent = 0, intercept = 0, r2 = 0;  // pure power law
  double log_exponent = 0, log_power = 0;       // lambda^b (log lambda)^c model
  double target = 0;  // theorem slope drawn as the second guide line

  bool operator==(const FitRecord&) const = default;
};

enum class Outcome { Pass, Fail, Skip };
std::string to_string(Outcome o);

struct CriterionResult {
  std::string id;  // "C1" .. "C12"
  std::string title;
  Outcome outcome = Outcome::Skip;
  std::string measured;   // what was observed
  std::string tolerance;  // the pinned acceptance bound
  double runtime_s = 0;

  bool operator==(const CriterionResult&) const = default;
};

struct SuiteReport {
  std::vector<EstimateRow> rows;
  std::vector<FitRecord> fits;
  std::vector<CriterionResult> criteria;
  nlohmann::json config;
  nlohmann::json environment;

  void merge(SuiteReport other);
  bool all_passed() const;
  bool operator==(const SuiteReport&) const = default;
};

nlohmann::json to_json(const SuiteReport& r);
SuiteReport report_from_json(const nlohmann::json& j);

// The acceptance line for one criterion.
std::string format_criterion(const CriterionResult& c);

// RFC-4180 CSV with the fixed column set; one row per estimate.
std::string to_csv(const std::vector<EstimateRow>& rows);
// SVG 1.1 log-log plot: one data series, the fitted line and the theorem-slope guide.
std::string to_svg(const FitRecord& fit);
// Writes report.csv, report.json and fit_<id>.svg. Throws std::runtime_error on I/O failure.
void emit_report(const SuiteReport& report, const std::string& out_dir);

SuiteReport run_geometry_suite(const HarnessConfig& cfg);         // C1, C2
SuiteReport run_upper_bound_sweep(const HarnessConfig& cfg);      // C3, C4, C5
SuiteReport run_oracle_suite(const HarnessConfig& cfg);           // C12
SuiteReport run_decomposition_sweep(const HarnessConfig& cfg);    // C6
SuiteReport run_sharpness_suite(const HarnessConfig& cfg);        // C7
SuiteReport run_kakeya_suite(const HarnessConfig& cfg);           // C8, C9
SuiteReport run_bilinear_sweep(const HarnessConfig& cfg);         // C10
SuiteReport run_curve_averaging_sweep(const HarnessConfig& cfg);  // C11
SuiteReport run_all(const HarnessConfig& cfg);

nlohmann::json environment_fingerprint();

}  // namespace oscillab
