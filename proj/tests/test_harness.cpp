#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "oscillab/harness.hpp"

using namespace oscillab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
  return n;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("oscillab_test_" + name);
  fs::remove_all(p);
  return p;
}

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "oscillab");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

SuiteReport sample_report() {
  SuiteReport r;
  r.rows.push_back({"circle_l2", "circle_extension", 1, 256, 2, 2, "power-iteration/fft-toeplitz",
                    0.1, 28, true, 17923354455529238239ull, 4.675});
  r.rows.push_back({"odd, \"id\"", "model_fold", 2, 1.0 / 3.0, 2.5, 2.5, "x\ny", 1e-300, 0, false, 0, 0});
  FitRecord f;
  f.id = "fit_a";
  f.label = "model_fold (p, q) = (2, 2)";
  f.lambdas = {64, 128, 256, 512};
  f.values = {0.296, 0.1725, 0.0993, 0.057};
  f.exponent = -0.7917;
  f.intercept = 0.1;
  f.r2 = 0.9999;
  f.log_exponent = -0.8;
  f.log_power = 0.05;
  f.target = -5.0 / 6.0;
  r.fits.push_back(f);
  r.criteria.push_back({"C3", "d=1 L2 scaling", Outcome::Pass, "exponent -0.323", "[-0.38, -0.28]", 9.4});
  r.criteria.push_back({"C4", "d=2 L2 scaling", Outcome::Skip, "requires --full", "not evaluated", 0});
  r.config = default_config_json();
  r.environment = environment_fingerprint();
  return r;
}

}  // namespace

TEST_CASE("report formats") {
  SUBCASE("empty suite gives a header-only CSV") {
    CHECK(to_csv({}) ==
          "experiment_id,phase,d,lambda,p,q,method,value,iterations,converged,seed,runtime_ms\r\n");
  }
  SUBCASE("CSV quotes commas, quotes and line breaks") {
    const std::string csv = to_csv(sample_report().rows);
    CHECK(count(csv, "\r\n") == 3);  // header and two rows; the quoted field keeps its bare \n
    CHECK(csv.find("\"odd, \"\"id\"\"\",model_fold") != std::string::npos);
    CHECK(csv.find("\"x\ny\"") != std::string::npos);
    CHECK(csv.find(",17923354455529238239,") != std::string::npos);
  }
  SUBCASE("one fit gives one data series and two guide lines") {
    const std::string svg = to_svg(sample_report().fits[0]);
    CHECK(svg.rfind("<?xml", 0) == 0);
    CHECK(svg.find("version=\"1.1\"") != std::string::npos);
    CHECK(count(svg, "class=\"series\"") == 1);
    CHECK(count(svg, "class=\"guide") == 2);
    CHECK(count(svg, "<line") == 2);
    CHECK(count(svg, "<circle") == 4);
  }
  SUBCASE("JSON round-trips to an equal report") {
    const SuiteReport r = sample_report();
    const SuiteReport back = report_from_json(json::parse(to_json(r).dump()));
    CHECK(back == r);
    CHECK(to_json(back).dump() == to_json(r).dump());
  }
  SUBCASE("malformed report JSON is a config error") {
    CHECK_THROWS_AS(report_from_json(json::parse(R"({"rows": []})")), ConfigError);
  }
  SUBCASE("criterion lines cite identifier and tolerance") {
    const std::string line = format_criterion(sample_report().criteria[0]);
    CHECK(line.rfind("C3 PASS", 0) == 0);
    CHECK(line.find("[tolerance: [-0.38, -0.28]]") != std::string::npos);
  }
  SUBCASE("emit writes CSV, JSON and one SVG per fit") {
    const fs::path dir = scratch("emit");
    emit_report(sample_report(), dir.string());
    CHECK(fs::exists(dir / "report.csv"));
    CHECK(fs::exists(dir / "report.json"));
    CHECK(fs::exists(dir / "fit_fit_a.svg"));
    CHECK(report_from_json(json::parse(slurp(dir / "report.json"))) == sample_report());
  }
  SUBCASE("unwritable output directory throws") {
    const fs::path file = scratch("blocker");
    std::ofstream(file) << "x";
    CHECK_THROWS_AS(emit_report(sample_report(), (file / "sub").string()), std::runtime_error);
  }
  SUBCASE("fail verdict wins over skips") {
    SuiteReport r = sample_report();
    CHECK(r.all_passed());
    r.criteria[0].outcome = Outcome::Fail;
    CHECK_FALSE(r.all_passed());
  }
}

TEST_CASE("configuration") {
  SUBCASE("defaults validate and every experiment parses") {
    const HarnessConfig cfg = load_config(nullptr);
    for (const auto& [id, body] : cfg.raw["experiments"].items()) {
      const ExperimentConfig e = cfg.experiment(id);
      CHECK(e.id == id);
      CHECK(e.x_box.dim() == e.d);
    }
  }
  SUBCASE("experiment seeds are stable, distinct and follow the base seed") {
    const HarnessConfig a = load_config(nullptr), b = load_config(nullptr);
    CHECK(a.experiment("circle_l2").seed == b.experiment("circle_l2").seed);
    CHECK(a.experiment("circle_l2").seed != a.experiment("bilinear").seed);
    const HarnessConfig c = load_config(json{{"schema_version", 1}, {"seed", 7}});
    CHECK(c.experiment("circle_l2").seed != a.experiment("circle_l2").seed);
  }
  SUBCASE("patches merge over the defaults") {
    const HarnessConfig cfg = load_config(
        json::parse(R"({"schema_version": 1, "experiments": {"circle_l2": {"lambdas": [16, 32]}}})"));
    const ExperimentConfig e = cfg.experiment("circle_l2");
    CHECK(e.lambdas == std::vector<double>{16, 32});
    CHECK(e.phase == "circle_extension");
  }
  SUBCASE("invalid configurations are rejected") {
    const char* bad[] = {
        R"({"experiments": {}})",
        R"({"schema_version": 2})",
        R"({"schema_version": 1, "experiments": {"circle_l2": {"lambdas": [1.5]}}})",
        R"({"schema_version": 1, "experiments": {"circle_l2": {"pq": [[1, 2]]}}})",
        R"({"schema_version": 1, "experiments": {"circle_l2": {"pq": [[2]]}}})",
        R"({"schema_version": 1, "experiments": {"circle_l2": {"phase": "no_such_phase"}}})",
        R"({"schema_version": 1, "experiments": {"circle_l2": {"x_box": {"center": [0, 0], "side": [1, 1]}}}})",
        R"({"schema_version": 1, "experiments": {"circle_l2": {"K": 0}}})",
        R"({"schema_version": 1, "experiments": {"circle_l2": {"bump": "triangle"}}})",
        R"({"schema_version": 1, "experiments": {"circle_l2": {"max_iter": 0}}})",
        R"([1, 2])",
    };
    for (const char* text : bad) {
      INFO(text);
      CHECK_THROWS_AS(load_config(json::parse(text)), ConfigError);
    }
  }
  SUBCASE("decomposition levels beyond lambda^(1/3) are a config error") {
    const HarnessConfig cfg = load_config(json::parse(
        R"({"schema_version": 1, "experiments": {"decompose_circle": {"lambdas": [64], "extra": {"levels": [3]}}}})"));
    CHECK_THROWS_AS(run_decomposition_sweep(cfg), ConfigError);
  }
}

TEST_CASE("geometry suite") {
  SUBCASE("default expectations pass") {
    const SuiteReport r = run_geometry_suite(load_config(nullptr));
    REQUIRE(r.criteria.size() == 2);
    CHECK(r.criteria[0].id == "C1");
    CHECK(r.criteria[0].outcome == Outcome::Pass);
    CHECK(r.criteria[1].id == "C2");
    CHECK(r.criteria[1].outcome == Outcome::Pass);
    CHECK(r.config["schema_version"] == 1);
    CHECK(r.environment.contains("threads"));
  }
  SUBCASE("a wrong expectation fails with a point dump") {
    json patch = json::parse(R"({"schema_version": 1})");
    patch["geometry"]["phases"] = default_config_json()["geometry"]["phases"];
    patch["geometry"]["phases"][0]["expect"]["right"] = "fail";
    const SuiteReport r = run_geometry_suite(load_config(patch));
    CHECK(r.criteria[0].outcome == Outcome::Fail);
    CHECK(r.criteria[0].measured.find("first mismatch x = (") != std::string::npos);
  }
}

TEST_CASE("command line exit codes") {
  const fs::path out = scratch("cli");
  SUBCASE("passing suite exits 0 and writes a report") {
    CHECK(run_cli({"geometry", "--out", out.string(), "--threads", "1"}) == 0);
    CHECK(fs::exists(out / "report.json"));
    SUBCASE("report re-emits the same CSV") {
      const fs::path again = scratch("cli_again");
      CHECK(run_cli({"report", (out / "report.json").string(), "--out", again.string()}) == 0);
      CHECK(slurp(again / "report.csv") == slurp(out / "report.csv"));
    }
  }
  SUBCASE("criterion failure exits 1") {
    json patch = json::parse(R"({"schema_version": 1})");
    patch["geometry"]["phases"] = default_config_json()["geometry"]["phases"];
    patch["geometry"]["phases"][4]["expect"]["right"] = "pass";
    const fs::path cfg = scratch("failing.json");
    std::ofstream(cfg) << patch.dump();
    CHECK(run_cli({"geometry", "--config", cfg.string(), "--out", out.string()}) == 1);
  }
  SUBCASE("configuration errors exit 2") {
    const fs::path cfg = scratch("bad.json");
    std::ofstream(cfg) << R"({"schema_version": 1, "experiments": {"circle_l2": {"lambdas": [1]}}})";
    CHECK(run_cli({"geometry", "--config", cfg.string(), "--out", out.string()}) == 2);
    std::ofstream(cfg) << "{not json";
    CHECK(run_cli({"geometry", "--config", cfg.string()}) == 2);
    CHECK(run_cli({"geometry", "--config", (out / "missing.json").string()}) == 2);
    CHECK(run_cli({"no-such-command"}) == 2);
    CHECK(run_cli({"geometry", "--threads", "0"}) == 2);
    CHECK(run_cli({"geometry", "--quick", "--full"}) == 2);
  }
  SUBCASE("unwritable output exits 2") {
    const fs::path file = scratch("cli_blocker");
    std::ofstream(file) << "x";
    CHECK(run_cli({"geometry", "--out", (file / "sub").string()}) == 2);
  }
}
