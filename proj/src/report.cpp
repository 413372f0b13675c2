#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oscillab/harness.hpp"
#include "oscillab/parallel.hpp"

namespace oscillab {

using nlohmann::json;

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::Pass: return "PASS";
    case Outcome::Fail: return "FAIL";
    case Outcome::Skip: return "SKIP";
  }
  return "?";
}

namespace {

Outcome parse_outcome(const std::string& s) {
  if (s == "PASS") return Outcome::Pass;
  if (s == "FAIL") return Outcome::Fail;
  if (s == "SKIP") return Outcome::Skip;
  throw ConfigError("unknown criterion outcome '" + s + "'");
}

std::string number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

}  // namespace

void SuiteReport::merge(SuiteReport other) {
  for (auto& r : other.rows) rows.push_back(std::move(r));
  for (auto& f : other.fits) fits.push_back(std::move(f));
  for (auto& c : other.criteria) criteria.push_back(std::move(c));
}

bool SuiteReport::all_passed() const {
  return std::none_of(criteria.begin(), criteria.end(),
                      [](const CriterionResult& c) { return c.outcome == Outcome::Fail; });
}

json to_json(const SuiteReport& r) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["rows"] = json::array();
  for (const auto& e : r.rows)
    j["rows"].push_back({{"experiment_id", e.experiment_id}, {"phase", e.phase}, {"d", e.d},
                         {"lambda", e.lambda}, {"p", e.p}, {"q", e.q}, {"method", e.method},
                         {"value", e.value}, {"iterations", e.iterations},
                         {"converged", e.converged}, {"seed", e.seed},
                         {"runtime_ms", e.runtime_ms}});
  j["fits"] = json::array();
  for (const auto& f : r.fits)
    j["fits"].push_back({{"id", f.id}, {"label", f.label}, {"lambdas", f.lambdas},
                         {"values", f.values}, {"exponent", f.exponent},
                         {"intercept", f.intercept}, {"r2", f.r2}, {"log_exponent", f.log_exponent},
                         {"log_power", f.log_power}, {"target", f.target}});
  j["criteria"] = json::array();
  for (const auto& c : r.criteria)
    j["criteria"].push_back({{"id", c.id}, {"title", c.title}, {"outcome", to_string(c.outcome)},
                             {"measured", c.measured}, {"tolerance", c.tolerance},
                             {"runtime_s", c.runtime_s}});
  j["all_passed"] = r.all_passed();
  j["config"] = r.config;
  j["environment"] = r.environment;
  return j;
}

SuiteReport report_from_json(const json& j) {
  try {
    SuiteReport r;
    for (const auto& e : j.at("rows"))
      r.rows.push_back({e.at("experiment_id"), e.at("phase"), e.at("d"), e.at("lambda"), e.at("p"),
                        e.at("q"), e.at("method"), e.at("value"), e.at("iterations"),
                        e.at("converged"), e.at("seed"), e.at("runtime_ms")});
    for (const auto& f : j.at("fits"))
      r.fits.push_back({f.at("id"), f.at("label"), f.at("lambdas"), f.at("values"),
                        f.at("exponent"), f.at("intercept"), f.at("r2"), f.at("log_exponent"),
                        f.at("log_power"), f.at("target")});
    for (const auto& c : j.at("criteria"))
      r.criteria.push_back({c.at("id"), c.at("title"), parse_outcome(c.at("outcome")),
                            c.at("measured"), c.at("tolerance"), c.at("runtime_s")});
    r.config = j.value("config", json());
    r.environment = j.value("environment", json());
    return r;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed report JSON: ") + e.what());
  }
}

std::string format_criterion(const CriterionResult& c) {
  std::ostringstream s;
  s << c.id << " " << to_string(c.outcome) << "  " << c.title << ": " << c.measured
    << " [tolerance: " << c.tolerance << "]";
  char buf[32];
  std::snprintf(buf, sizeof buf, " (%.1f s)", c.runtime_s);
  s << buf;
  return s.str();
}

std::string to_csv(const std::vector<EstimateRow>& rows) {
  std::string out =
      "experiment_id,phase,d,lambda,p,q,method,value,iterations,converged,seed,runtime_ms\r\n";
  for (const auto& r : rows) {
    out += csv_field(r.experiment_id) + ',' + csv_field(r.phase) + ',' + std::to_string(r.d) + ',' +
           number(r.lambda) + ',' + number(r.p) + ',' + number(r.q) + ',' + csv_field(r.method) +
           ',' + number(r.value) + ',' + std::to_string(r.iterations) + ',' +
           (r.converged ? "true" : "false") + ',' + std::to_string(r.seed) + ',' +
           number(r.runtime_ms) + "\r\n";
  }
  return out;
}

std::string to_svg(const FitRecord& fit) {
  constexpr double W = 640, H = 440, L = 70, R = 20, T = 40, B = 50;
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < fit.lambdas.size(); ++i) {
    if (fit.lambdas[i] > 0 && fit.values[i] > 0) {
      lx.push_back(std::log10(fit.lambdas[i]));
      ly.push_back(std::log10(fit.values[i]));
    }
  }
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (!lx.empty()) {
    x0 = *std::min_element(lx.begin(), lx.end());
    x1 = *std::max_element(lx.begin(), lx.end());
    y0 = *std::min_element(ly.begin(), ly.end());
    y1 = *std::max_element(ly.begin(), ly.end());
  }
  const double padx = std::max(0.05, 0.05 * (x1 - x0)), pady = std::max(0.05, 0.1 * (y1 - y0));
  x0 -= padx, x1 += padx, y0 -= pady, y1 += pady;
  auto px = [&](double v) { return L + (v - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double v) { return H - B - (v - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream s;
  s.precision(6);
  s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << W << "\" height=\""
    << H << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n"
    << "<title>" << xml_escape(fit.id + ": " + fit.label) << "</title>\n"
    << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\""
    << H - T - B << "\" fill=\"none\" stroke=\"#444\"/>\n"
    << "<text x=\"" << W / 2 << "\" y=\"" << H - 12
    << "\" text-anchor=\"middle\" font-size=\"13\">log10 lambda</text>\n"
    << "<text x=\"16\" y=\"" << H / 2 << "\" font-size=\"13\" transform=\"rotate(-90 16 " << H / 2
    << ")\" text-anchor=\"middle\">log10 norm</text>\n"
    << "<text x=\"" << L << "\" y=\"24\" font-size=\"13\">" << xml_escape(fit.label)
    << "  fitted " << fit.exponent << ", theory " << fit.target << "</text>\n";

  // Guide lines through the data centroid: the fitted slope and the theorem slope.
  double cx = 0, cy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) cx += lx[i], cy += ly[i];
  if (!lx.empty()) cx /= lx.size(), cy /= ly.size();
  const double fit_cy = lx.empty() ? cy : fit.intercept / std::log(10.0) + fit.exponent * cx;
  auto guide = [&](const char* cls, const char* color, double slope, double yc) {
    const double a = x0 + padx, b = x1 - padx;
    s << "<line class=\"guide " << cls << "\" x1=\"" << px(a) << "\" y1=\""
      << py(yc + slope * (a - cx)) << "\" x2=\"" << px(b) << "\" y2=\"" << py(yc + slope * (b - cx))
      << "\" stroke=\"" << color << "\" stroke-dasharray=\"6 4\"/>\n";
  };
  guide("fit", "#1f77b4", fit.exponent, fit_cy);
  guide("theory", "#d62728", fit.target, cy);

  s << "<g class=\"series\" fill=\"#000\">\n<polyline fill=\"none\" stroke=\"#000\" points=\"";
  for (std::size_t i = 0; i < lx.size(); ++i) s << (i ? " " : "") << px(lx[i]) << ',' << py(ly[i]);
  s << "\"/>\n";
  for (std::size_t i = 0; i < lx.size(); ++i)
    s << "<circle cx=\"" << px(lx[i]) << "\" cy=\"" << py(ly[i]) << "\" r=\"3\"/>\n";
  s << "</g>\n</svg>\n";
  return s.str();
}

void emit_report(const SuiteReport& report, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + out_dir + "': " + ec.message());
  write_file(fs::path(out_dir) / "report.csv", to_csv(report.rows));
  write_file(fs::path(out_dir) / "report.json", to_json(report).dump(2) + "\n");
  for (const auto& f : report.fits) write_file(fs::path(out_dir) / ("fit_" + f.id + ".svg"), to_svg(f));
}

json environment_fingerprint() {
  json env;
#ifdef __VERSION__
  env["compiler"] = __VERSION__;
#endif
  env["cxx_standard"] = static_cast<long>(__cplusplus);
  env["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                 "." + std::to_string(EIGEN_MINOR_VERSION);
  env["threads"] = thread_count();
#ifdef NDEBUG
  env["build"] = "release";
#else
  env["build"] = "debug";
#endif
  env["schema_version"] = kSchemaVersion;
  return env;
}

}  // namespace oscillab
