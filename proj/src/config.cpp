#include <fstream>
#include <sstream>

#include "oscillab/harness.hpp"

namespace oscillab {

using nlohmann::json;

namespace {

// Boxes are {"center": [...], "side": [...]} or {"lo": [...], "hi": [...]}.
Eigen::VectorXd to_vector(const json& j, const std::string& what) {
  if (!j.is_array()) throw ConfigError(what + ": expected an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(what + ": expected an array of numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

Box parse_box(const json& j, int d, const std::string& what) {
  if (!j.is_object()) throw ConfigError(what + ": expected an object");
  Box b;
  if (j.contains("center") && j.contains("side")) {
    b = Box::centered(to_vector(j["center"], what + ".center"), to_vector(j["side"], what + ".side"));
  } else if (j.contains("lo") && j.contains("hi")) {
    b = Box(to_vector(j["lo"], what + ".lo"), to_vector(j["hi"], what + ".hi"));
  } else {
    throw ConfigError(what + ": needs center/side or lo/hi");
  }
  if (b.dim() != d || b.hi.size() != d)
    throw ConfigError(what + ": dimension " + std::to_string(b.dim()) + " does not match d = " +
                      std::to_string(d));
  if (!((b.hi - b.lo).array() > 0).all()) throw ConfigError(what + ": empty box");
  return b;
}

// FNV-1a, so experiment seeds do not depend on the standard library's hash.
std::uint64_t stable_hash(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

ExperimentConfig parse_experiment(const std::string& id, const json& j, std::uint64_t base_seed) {
  if (!j.is_object()) throw ConfigError("experiment '" + id + "' must be an object");
  ExperimentConfig e;
  e.id = id;
  const std::string where = "experiments." + id;
  e.phase = get_or<std::string>(j, "phase", "");
  e.d = get_or<int>(j, "d", 0);
  if (e.phase.empty()) throw ConfigError(where + ": missing phase");
  if (e.d < 1 || e.d > 3) throw ConfigError(where + ": d must be 1, 2 or 3");
  if (j.contains("params")) {
    if (!j["params"].is_object()) throw ConfigError(where + ".params must be an object");
    for (const auto& [k, v] : j["params"].items()) {
      if (!v.is_number()) throw ConfigError(where + ".params." + k + " must be a number");
      e.params[k] = v.get<double>();
    }
  }
  e.x_box = parse_box(j.value("x_box", json()), e.d, where + ".x_box");
  e.y_box = parse_box(j.value("y_box", json()), e.d, where + ".y_box");
  e.lambdas = get_or<std::vector<double>>(j, "lambdas", {});
  for (double l : e.lambdas)
    if (!(l >= 2.0) || !std::isfinite(l))
      throw ConfigError(where + ": every lambda must be >= 2 (got " + std::to_string(l) + ")");
  for (const auto& pq : j.value("pq", json::array())) {
    if (!pq.is_array() || pq.size() != 2 || !pq[0].is_number() || !pq[1].is_number())
      throw ConfigError(where + ".pq: entries must be [p, q]");
    const double p = pq[0].get<double>(), q = pq[1].get<double>();
    if (!(p > 1.0 && q > 1.0 && std::isfinite(p) && std::isfinite(q)))
      throw ConfigError(where + ".pq: (p, q) must lie in (1, inf)^2");
    e.pq.emplace_back(p, q);
  }
  e.K = get_or<double>(j, "K", 6.0);
  if (!(e.K > 0)) throw ConfigError(where + ".K must be positive");
  e.bump = get_or<std::string>(j, "bump", "plateau");
  try {
    parse_bump_kind(e.bump);
  } catch (const std::exception& ex) {
    throw ConfigError(where + ".bump: " + ex.what());
  }
  e.starts = get_or<int>(j, "starts", 2);
  e.tol = get_or<double>(j, "tol", 1e-6);
  e.max_iter = get_or<int>(j, "max_iter", 300);
  if (e.starts < 0 || !(e.tol > 0) || e.max_iter < 1)
    throw ConfigError(where + ": starts >= 0, tol > 0 and max_iter >= 1 required");
  e.seed = j.contains("seed") ? get_or<std::uint64_t>(j, "seed", 0) : base_seed ^ stable_hash(id);
  e.extra = j.value("extra", json::object());
  try {
    e.make_phase();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& ex) {
    throw ConfigError(where + ": " + ex.what());
  }
  return e;
}

}  // namespace

PhasePtr ExperimentConfig::make_phase() const {
  try {
    return oscillab::make_phase(phase, d, params);
  } catch (const std::invalid_argument& ex) {
    throw ConfigError("experiment '" + id + "': " + ex.what());
  }
}

OperatorConfig ExperimentConfig::operator_config(double lambda, Localization loc) const {
  Bump b;
  b.kind = parse_bump_kind(bump);
  return make_config(make_phase(), lambda, x_box, y_box, b, loc);
}

const json& HarnessConfig::section(const std::string& name) const {
  if (!raw.contains(name)) throw ConfigError("config has no section '" + name + "'");
  return raw.at(name);
}

ExperimentConfig HarnessConfig::experiment(const std::string& id) const {
  const json& ex = section("experiments");
  if (!ex.contains(id)) throw ConfigError("config has no experiment '" + id + "'");
  return parse_experiment(id, ex.at(id), seed);
}

json default_config_json() {
  return R"({
  "schema_version": 1,
  "seed": 20240601,
  "geometry": {
    "samples": 200,
    "scrambles": 20,
    "phases": [
      {"name": "model_fold", "d": 2,
       "x_box": {"center": [0, 0], "side": [0.6, 0.6]}, "y_prime_box": {"center": [0], "side": [0.6]},
       "fold_bracket": [-1, 1], "expect": {"left": "pass", "right": "pass", "curvature": "pass"}},
      {"name": "sphere_extension", "d": 2,
       "x_box": {"center": [0, 0], "side": [0.6, 0.6]}, "y_prime_box": {"center": [0], "side": [0.6]},
       "fold_bracket": [-0.65, 0.65], "expect": {"left": "pass", "right": "pass", "curvature": "pass"}},
      {"name": "circle_extension", "d": 1,
       "x_box": {"center": [1.5707963267948966], "side": [1.0]}, "y_prime_box": {"center": [], "side": []},
       "fold_bracket": [-1, 1], "expect": {"left": "pass", "right": "pass", "curvature": "any"}},
      {"name": "curve_avg", "d": 3,
       "x_box": {"center": [0, 0, 0], "side": [0.8, 0.8, 0.8]}, "y_prime_box": {"center": [0, 1], "side": [0.8, 0.8]},
       "fold_bracket": [-2, 2], "expect": {"left": "pass", "right": "pass", "curvature": "conic"}},
      {"name": "one_sided_fold", "d": 2,
       "x_box": {"center": [0, 0], "side": [0.6, 0.6]}, "y_prime_box": {"center": [0], "side": [0.6]},
       "fold_bracket": [-1, 1], "expect": {"left": "pass", "right": "fail", "curvature": "any"}}
    ]
  },
  "compression": {"alpha": 0.125, "j": [6, 7, 8, 9, 10, 11, 12]},
  "experiments": {
    "circle_l2": {
      "phase": "circle_extension", "d": 1,
      "x_box": {"center": [1.5707963267948966], "side": [2]}, "y_box": {"center": [0], "side": [2]},
      "lambdas": [256, 512, 1024, 2048, 4096, 8192, 16384], "pq": [[2, 2]],
      "K": 6, "tol": 1e-7, "max_iter": 400
    },
    "circle_lp": {
      "phase": "circle_extension", "d": 1,
      "x_box": {"center": [1.5707963267948966], "side": [2]}, "y_box": {"center": [0], "side": [2]},
      "lambdas": [256, 512, 1024, 2048, 4096], "pq": [[3, 3]],
      "K": 6, "starts": 2, "tol": 1e-6, "max_iter": 200
    },
    "fold_l2": {
      "phase": "model_fold", "d": 2,
      "x_box": {"center": [0, 0], "side": [1, 2]}, "y_box": {"center": [0, 0], "side": [1, 2]},
      "lambdas": [64, 128, 256, 512, 1024], "pq": [[2, 2]],
      "K": 4, "tol": 1e-6, "max_iter": 200, "extra": {"full_only": true}
    },
    "fold_lp": {
      "phase": "model_fold", "d": 2,
      "x_box": {"center": [0, 0], "side": [1, 2]}, "y_box": {"center": [0, 0], "side": [1, 2]},
      "lambdas": [64, 128, 256, 512, 1024], "pq": [[2.5, 2.5]],
      "K": 4, "starts": 0, "tol": 1e-6, "max_iter": 150, "extra": {"full_only": true}
    },
    "decompose_circle": {
      "phase": "circle_extension", "d": 1,
      "x_box": {"center": [1.5707963267948966], "side": [0.5]}, "y_box": {"center": [0], "side": [1.5]},
      "lambdas": [65536], "K": 6, "tol": 1e-6, "max_iter": 250,
      "extra": {"levels": [0, 1, 2, 3, 4, 5]}
    },
    "decompose_fold": {
      "phase": "model_fold", "d": 2,
      "x_box": {"center": [0, 0], "side": [1, 1]}, "y_box": {"center": [0, 0], "side": [1, 1]},
      "lambdas": [512], "K": 4, "tol": 1e-5, "max_iter": 120,
      "extra": {"levels": [0, 1, 2, 3]}
    },
    "sharpness": {
      "phase": "model_fold", "d": 2,
      "x_box": {"center": [0, 0], "side": [1, 2]}, "y_box": {"center": [0, 0], "side": [1, 2]},
      "lambdas": [128, 256, 512, 1024, 2048], "pq": [[2, 3]],
      "extra": {"eps": 0.1, "c0": 1.0, "tube_samples": 9}
    },
    "kakeya": {
      "phase": "model_fold", "d": 2,
      "x_box": {"center": [0, 0], "side": [1, 2]}, "y_box": {"center": [0, 0], "side": [1, 2]},
      "lambdas": [4096, 8192, 16384], "pq": [[2, 3]],
      "extra": {"eps": 0.1, "direction_scale": 1.0, "plate_scale": 0.5, "tube_samples": 5}
    },
    "bilinear": {
      "phase": "circle_extension", "d": 1,
      "x_box": {"center": [1.5707963267948966], "side": [3]}, "y_box": {"center": [0], "side": [3]},
      "lambdas": [256, 512, 1024, 2048, 4096], "K": 4, "starts": 2, "tol": 1e-7, "max_iter": 300,
      "extra": {"delta": 0.5}
    },
    "curve_avg": {
      "phase": "curve_avg", "d": 3,
      "x_box": {"center": [0, 0, 0], "side": [1, 1, 1]}, "y_box": {"center": [0, 0, 6], "side": [1, 1, 1]},
      "lambdas": [16, 32, 64, 128], "pq": [[2, 3], [2, 2]],
      "K": 4, "starts": 0, "tol": 1e-4, "max_iter": 300, "extra": {"full_only": true}
    },
    "oracle": {
      "phase": "circle_extension", "d": 1,
      "x_box": {"center": [1.5707963267948966], "side": [1]}, "y_box": {"center": [0], "side": [1.5]},
      "lambdas": [64], "tol": 1e-13, "max_iter": 20000,
      "extra": {"instances": [
        {"phase": "circle_extension", "d": 1, "lambda": 200,
         "x_box": {"center": [1.5707963267948966], "side": [1]}, "y_box": {"center": [0], "side": [1.5]}},
        {"phase": "model_fold", "d": 2, "lambda": 12,
         "x_box": {"center": [0, 0], "side": [1, 2]}, "y_box": {"center": [0, 0], "side": [1, 2]}},
        {"phase": "sphere_extension", "d": 2, "lambda": 20,
         "x_box": {"center": [0, 0], "side": [0.8, 0.8]}, "y_box": {"center": [0, 0], "side": [0.8, 0.8]}},
        {"phase": "curve_avg", "d": 3, "lambda": 6, "points_per_axis": 10,
         "x_box": {"center": [0, 0, 0], "side": [1, 1, 1]}, "y_box": {"center": [0, 0, 1], "side": [1, 1, 1]}}
      ]}
    }
  }
})"_json;
}

HarnessConfig load_config(const json& patch) {
  if (!patch.is_null() && !patch.is_object()) throw ConfigError("config must be a JSON object");
  json merged = default_config_json();
  if (!patch.is_null()) {
    if (!patch.contains("schema_version"))
      throw ConfigError("config is missing schema_version");
    merged.merge_patch(patch);
  }
  if (!merged["schema_version"].is_number_integer() ||
      merged["schema_version"].get<int>() != kSchemaVersion)
    throw ConfigError("unsupported schema_version (expected " + std::to_string(kSchemaVersion) + ")");
  HarnessConfig cfg;
  cfg.raw = merged;
  cfg.seed = get_or<std::uint64_t>(merged, "seed", 0);
  if (!merged.contains("experiments") || !merged["experiments"].is_object())
    throw ConfigError("config needs an 'experiments' object");
  // Validate every experiment up front so errors surface before any suite runs.
  for (const auto& [id, body] : merged["experiments"].items()) parse_experiment(id, body, cfg.seed);
  return cfg;
}

HarnessConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return load_config(j);
}

}  // namespace oscillab
