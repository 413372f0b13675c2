#include "cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <functional>
#include <iostream>
#include <map>

#include "oscillab/harness.hpp"
#include "oscillab/parallel.hpp"

namespace oscillab::cli {

namespace {

using Suite = std::function<SuiteReport(const HarnessConfig&)>;

const std::map<std::string, std::pair<std::string, Suite>>& suites() {
  static const std::map<std::string, std::pair<std::string, Suite>> table = {
      {"geometry", {"fold, curvature and normal-form checks (C1, C2)", run_geometry_suite}},
      {"sweep",
       {"upper-bound scaling sweeps and oracle checks (C3, C4, C5, C12)",
        [](const HarnessConfig& c) {
          SuiteReport r = run_upper_bound_sweep(c);
          r.merge(run_oracle_suite(c));
          return r;
        }}},
      {"decompose", {"dyadic decomposition bands (C6)", run_decomposition_sweep}},
      {"sharpness", {"constant-phase and ball witnesses (C7)", run_sharpness_suite}},
      {"kakeya", {"compression and Kakeya witness (C8, C9)", run_kakeya_suite}},
      {"bilinear", {"bilinear separation sweep (C10)", run_bilinear_sweep}},
      {"curve-avg", {"curve averaging sweep (C11)", run_curve_averaging_sweep}},
      {"all", {"every suite (C1 to C12)", run_all}},
  };
  return table;
}

int finish(const SuiteReport& report, const std::string& out_dir) {
  for (const auto& c : report.criteria) std::cout << format_criterion(c) << "\n";
  std::cout.flush();
  emit_report(report, out_dir);
  std::cerr << "report written to " << out_dir << "\n";
  return report.all_passed() ? 0 : 1;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Oscillatory integral operator laboratory"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_dir = "oscillab-out", input;
  bool quick = false, full = false;
  std::uint64_t seed = 0;
  int threads = 0;
  app.add_option("--config", config_path, "JSON config merged over the built-in defaults")
      ->check(CLI::ExistingFile);
  auto* q = app.add_flag("--quick", quick, "d=1 and small d=2 suites only (default)");
  app.add_flag("--full", full, "also run the large d=2 and the d=3 suites")->excludes(q);
  app.add_option("--out", out_dir, "output directory for CSV, JSON and SVG");
  auto* seed_opt = app.add_option("--seed", seed, "base seed; experiment seeds derive from it");
  app.add_option("--threads", threads, "worker threads (overrides OSCILLAB_THREADS)")
      ->check(CLI::PositiveNumber);

  std::string chosen;
  for (const auto& [name, entry] : suites())
    app.add_subcommand(name, entry.first)->callback([&chosen, name = name] { chosen = name; });
  auto* report_cmd = app.add_subcommand("report", "re-emit CSV and SVG from a saved report.json");
  report_cmd->add_option("input", input, "report.json to read")->required()->check(CLI::ExistingFile);
  report_cmd->callback([&chosen] { chosen = "report"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (threads > 0) set_thread_count(threads);
    if (chosen == "report") {
      std::ifstream in(input);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("report is not valid JSON: ") + e.what());
      }
      return finish(report_from_json(j), out_dir);
    }
    nlohmann::json patch;
    HarnessConfig cfg = config_path.empty() ? load_config(patch) : load_config_file(config_path);
    if (*seed_opt) {
      cfg.seed = seed;
      cfg.raw["seed"] = seed;
    }
    cfg.full = full;
    cfg.raw["full"] = full;
    cfg.out_dir = out_dir;
    return finish(suites().at(chosen).second(cfg), out_dir);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace oscillab::cli
