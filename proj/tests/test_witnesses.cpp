#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "oscillab/norms.hpp"
#include "oscillab/witnesses.hpp"

using namespace oscillab;
using Eigen::Vector2d;
using Eigen::VectorXd;

namespace {

VectorXd vec(std::initializer_list<double> v) {
  VectorXd r(static_cast<int>(v.size()));
  int i = 0;
  for (double a : v) r[i++] = a;
  return r;
}

const Box kFoldBox(vec({-0.5, -1.0}), vec({0.5, 1.0}));

OperatorConfig fold_config(double lambda) {
  return make_config(make_phase("model_fold", 2), lambda, kFoldBox, kFoldBox);
}

// Pixel-center raster of a union of rectangles, independent of the row intervals.
double raster_union(const std::vector<Rectangle>& rects, double h) {
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& r : rects) {
    const double ex = r.half_length * std::abs(r.direction.x()) + r.half_width * std::abs(r.direction.y());
    x0 = std::min(x0, r.center.x() - ex);
    x1 = std::max(x1, r.center.x() + ex);
    y0 = std::min(y0, r.y_min());
    y1 = std::max(y1, r.y_max());
  }
  long hits = 0;
  for (double y = y0 + h / 2; y < y1; y += h)
    for (double x = x0 + h / 2; x < x1; x += h)
      for (const auto& r : rects)
        if (r.contains(Vector2d(x, y))) {
          ++hits;
          break;
        }
  return hits * h * h;
}

}  // namespace

TEST_CASE("rectangle geometry") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Rectangle r = Rectangle::along_slope(Vector2d(u(rng), u(rng)), 0.5 * u(rng),
                                               0.05 + 0.1 * std::abs(u(rng)), 0.3 + 0.2 * std::abs(u(rng)));
    const double y = r.center.y() + 0.6 * u(rng);
    double lo, hi;
    if (r.row_interval(y, lo, hi)) {
      CHECK(r.contains(Vector2d(lo, y), 1e-12));
      CHECK(r.contains(Vector2d(hi, y), 1e-12));
      CHECK(r.contains(Vector2d(0.5 * (lo + hi), y)));
      CHECK_FALSE(r.contains(Vector2d(lo - 1e-6, y)));
      CHECK_FALSE(r.contains(Vector2d(hi + 1e-6, y)));
    } else {
      for (double x = -3; x <= 3; x += 1e-3) CHECK_FALSE(r.contains(Vector2d(x, y)));
    }
  }
  const Rectangle r = Rectangle::along_slope(Vector2d(0, 0), 0.0, 0.1, 0.5);
  CHECK(r.area() == doctest::Approx(0.2));
  CHECK(union_measure({r}, 0.01) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("union measure against a pixel raster") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Rectangle> rects;
  for (int i = 0; i < 6; ++i)
    rects.push_back(Rectangle::along_slope(Vector2d(0.2 * u(rng), 0.2 * u(rng)), 0.4 * u(rng), 0.05, 0.4));
  const double rows = union_measure(rects, 0.1 / 8);
  const double pixels = raster_union(rects, 0.002);
  CHECK(std::abs(rows - pixels) / pixels < 0.01);
  double sum = 0.0;
  for (const auto& r : rects) sum += r.area();
  CHECK(rows <= sum);
}

TEST_CASE("besicovitch compression") {
  SUBCASE("single rectangle is left alone") {
    RectangleFamily fam;
    fam.delta = 0.01;
    fam.alpha = 0.1;
    fam.rects.push_back(Rectangle::along_slope(Vector2d(0, 0), 0.0, 0.005, 0.5));
    const CompressionResult c = besicovitch_compress(fam);
    CHECK(c.ratio == 1.0);
    CHECK(c.translations[0] == 0.0);
  }
  SUBCASE("two parallel rectangles are made to coincide") {
    RectangleFamily fam;
    fam.delta = 0.01;
    fam.alpha = 0.1;
    fam.rects.assign(2, Rectangle::along_slope(Vector2d(0, 0), 0.03, 0.005, 0.5));
    fam.rects[1].center.x() = 0.02;
    const CompressionResult c = besicovitch_compress(fam);
    CHECK(c.ratio <= 1.0);
    CHECK(c.ratio == doctest::Approx(0.5).epsilon(1e-3));
    for (double v : c.translations) CHECK(std::abs(v) <= fam.alpha);
  }
  SUBCASE("directions outside the fan are rejected") {
    RectangleFamily fam = RectangleFamily::fan(Vector2d(0, 0), 0.01, 0.05, 1.0);
    fam.rects[0].direction = Vector2d(0.013, 1.0).normalized();
    CHECK_THROWS_AS(besicovitch_compress(fam), ConfigError);
    fam = RectangleFamily::fan(Vector2d(0, 0), 0.01, 0.05, 1.0);
    fam.alpha = 0.02;
    CHECK_THROWS_AS(besicovitch_compress(fam), ConfigError);
  }
  SUBCASE("ratio decays like 1 / log(alpha / delta)") {
    const double alpha = 0.125;
    std::vector<double> scaled;
    double previous = 1.0;
    for (int j = 5; j <= 9; ++j) {
      const double delta = alpha * std::ldexp(1.0, -j);
      const RectangleFamily fam = RectangleFamily::fan(Vector2d(0, 0), delta, alpha, 1.0);
      const CompressionResult c = besicovitch_compress(fam);
      CHECK(c.union_measure <= c.sum_measure);
      CHECK(c.ratio <= previous * 1.05);
      CHECK(c.refinement_change < 0.02);
      for (double v : c.translations) CHECK(std::abs(v) <= alpha);
      previous = c.ratio;
      scaled.push_back(c.ratio * std::log(alpha / delta));
    }
    const auto [lo, hi] = std::minmax_element(scaled.begin(), scaled.end());
    CHECK(*hi / *lo <= 3.0);
  }
}

TEST_CASE("pointwise evaluation matches the grid operator") {
  const OperatorConfig cfg = fold_config(40.0);
  const GridSpec xg{Box::cube(2, 0.3), {5, 6}, 6.0}, yg{Box::cube(2, 0.4), {12, 10}, 6.0};
  const DiscreteFunction f =
      DiscreteFunction::sample(yg, [](const VectorXd& y) { return cd(std::cos(3 * y[0]), y[1]); });
  const DirectOperator op(cfg, xg, yg);
  const Eigen::VectorXcd grid_values = op.apply(f.values);
  std::vector<VectorXd> pts;
  for (Eigen::Index j = 0; j < xg.size(); ++j) pts.push_back(xg.point(j));
  const Eigen::VectorXcd point_values = evaluate_at_points(cfg, f, pts);
  CHECK((grid_values - point_values).norm() <= 1e-12 * grid_values.norm());
  OperatorConfig localized = cfg;
  localized.localization = Localization::near_fold();
  CHECK_THROWS_AS(evaluate_at_points(localized, f, pts), ConfigError);
}

TEST_CASE("constant-phase witness") {
  SUBCASE("phases cancel at the tube center") {
    const OperatorConfig cfg = fold_config(300.0);
    const WitnessRecipe w = build_constant_phase_witness(cfg);
    const DiscreteFunction f = w.local_function(0);
    const VectorXd x0 = cfg.cutoff.x_box.center();
    cd expected = 0.0;
    for (Eigen::Index k = 0; k < f.size(); ++k)
      if (f.values[k] != cd(0.0)) expected += cfg.cutoff(x0, f.grid.point(k)) * f.grid.cell_volume();
    const cd t0 = evaluate_at_points(cfg, f, {x0})[0];
    CHECK(expected.real() > 0.0);
    CHECK(std::abs(t0 - expected) <= 1e-12 * expected.real());
  }
  SUBCASE("circle phase: tube minimum against the center value, stable in lambda") {
    const auto circle = make_phase("circle_extension", 1);
    std::vector<double> cs;
    for (double lam : {1024.0, 4096.0, 16384.0}) {
      const OperatorConfig cfg = make_config(circle, lam, Box::cube(1, 0.25), Box::cube(1, 0.75));
      const WitnessRecipe w = build_constant_phase_witness(cfg);
      const TubeReport rep = verify_tube_lower_bound(w, cfg);
      const double center = std::abs(evaluate_at_points(cfg, w.local_function(0), {VectorXd::Zero(1)})[0]);
      CHECK(rep.min_overall >= 0.5 * center);
      CHECK_FALSE(rep.degenerate);
      cs.push_back(rep.c_min);
    }
    CHECK(*std::max_element(cs.begin(), cs.end()) / *std::min_element(cs.begin(), cs.end()) <= 3.0);
  }
  SUBCASE("certified ratio scales like lambda^{-d/q}") {
    std::vector<double> lams, ratios;
    for (double lam : {128.0, 256.0, 512.0, 1024.0, 2048.0}) {
      const OperatorConfig cfg = fold_config(lam);
      const WitnessRecipe w = build_constant_phase_witness(cfg);
      lams.push_back(lam);
      ratios.push_back(certified_ratio(w, verify_tube_lower_bound(w, cfg), 2.0, 3.0));
    }
    CHECK(std::abs(fit_scaling_law(lams, ratios).exponent + 2.0 / 3.0) <= 0.06);
  }
  SUBCASE("ball outside the domain") {
    const OperatorConfig cfg = make_config(make_phase("model_fold", 2), 100.0, kFoldBox, Box::cube(2, 0.05));
    CHECK_THROWS_AS(build_constant_phase_witness(cfg), ConfigError);
  }
}

TEST_CASE("ball witness") {
  SUBCASE("center value against the cutoff integral") {
    const OperatorConfig cfg = fold_config(256.0);
    const WitnessRecipe w = build_ball_witness(cfg);
    CHECK(w.pieces[0].radius == doctest::Approx(0.1 / std::cbrt(256.0)));
    const DiscreteFunction f = w.local_function(0);
    double integral = 0.0;
    for (Eigen::Index k = 0; k < f.size(); ++k)
      if (f.values[k] != cd(0.0)) integral += cfg.cutoff(VectorXd::Zero(2), f.grid.point(k)) * f.grid.cell_volume();
    CHECK(std::abs(evaluate_at_points(cfg, f, {VectorXd::Zero(2)})[0]) >= 0.9 * integral);
  }
  SUBCASE("tube constants and ratio exponent") {
    std::vector<double> lams, ratios, cs;
    for (double lam : {128.0, 256.0, 512.0, 1024.0, 2048.0}) {
      const OperatorConfig cfg = fold_config(lam);
      const WitnessRecipe w = build_ball_witness(cfg);
      const TubeReport rep = verify_tube_lower_bound(w, cfg);
      const Box& tube = w.pieces[0].tube.box;
      CHECK(tube.side()[0] == doctest::Approx(2 * 0.025 * std::pow(lam, -2.0 / 3.0)));
      CHECK(tube.side()[1] == doctest::Approx(2 * 0.025 * std::pow(lam, -1.0 / 3.0)));
      lams.push_back(lam);
      cs.push_back(rep.c_min);
      ratios.push_back(certified_ratio(w, rep, 2.0, 3.0));
    }
    CHECK(*std::max_element(cs.begin(), cs.end()) / *std::min_element(cs.begin(), cs.end()) <= 3.0);
    CHECK(std::abs(fit_scaling_law(lams, ratios).exponent + 2.0 / 3.0) <= 0.06);
  }
  SUBCASE("phases outside normal form are rejected") {
    const OperatorConfig cfg = make_config(make_phase("one_sided_fold", 2), 256.0, kFoldBox, kFoldBox);
    CHECK_THROWS_AS(build_ball_witness(cfg), PreconditionError);
  }
}

TEST_CASE("tube report edge cases") {
  SUBCASE("lambda = 0 reduces to the integral of chi f at the center") {
    const OperatorConfig cfg = fold_config(0.0);
    const WitnessRecipe w = build_constant_phase_witness(cfg);
    const TubeReport rep = verify_tube_lower_bound(w, cfg);
    const DiscreteFunction f = w.local_function(0);
    cd integral = 0.0;
    for (Eigen::Index k = 0; k < f.size(); ++k)
      integral += cfg.cutoff(VectorXd::Zero(2), f.grid.point(k)) * f.values[k] * f.grid.cell_volume();
    CHECK(rep.min_overall == doctest::Approx(std::abs(integral)).epsilon(1e-12));
    CHECK_FALSE(rep.degenerate);
  }
  SUBCASE("zero function is flagged") {
    const OperatorConfig cfg = fold_config(256.0);
    WitnessRecipe w = build_ball_witness(cfg);
    w.pieces[0].sign = 0.0;
    const TubeReport rep = verify_tube_lower_bound(w, cfg);
    CHECK(rep.min_overall == 0.0);
    CHECK(rep.degenerate);
  }
  SUBCASE("mismatched operator") {
    const WitnessRecipe w = build_ball_witness(fold_config(256.0));
    CHECK_THROWS_AS(verify_tube_lower_bound(w, fold_config(512.0)), ConfigError);
  }
}

TEST_CASE("tube family witness") {
  SUBCASE("scale and phase requirements") {
    CHECK_THROWS_AS(build_kakeya_witness(fold_config(2048.0)), ScaleError);
    const OperatorConfig one_sided = make_config(make_phase("one_sided_fold", 2), 8192.0, kFoldBox, kFoldBox);
    CHECK_THROWS_AS(build_kakeya_witness(one_sided), ConfigError);
  }
  SUBCASE("construction properties") {
    const OperatorConfig cfg = fold_config(4096.0);
    KakeyaOptions opt;
    opt.seed = 3;
    const KakeyaWitness k = build_kakeya_witness(cfg, opt);
    CHECK(k.overlapping_nodes == 0);
    // Disjoint supports: nonzero nodes of the combination equal the summed ball counts.
    Eigen::Index nonzero = 0, expected = 0;
    for (Eigen::Index j = 0; j < k.combined.size(); ++j) {
      nonzero += k.combined.values[j] != cd(0.0);
      for (const auto& p : k.recipe.pieces) expected += p.in_support(k.combined.grid.point(j));
    }
    CHECK(nonzero == expected);
    CHECK(k.combined.values.cwiseAbs().maxCoeff() == doctest::Approx(1.0));

    int plus = 0;
    for (const auto& p : k.recipe.pieces) {
      CHECK(std::abs(p.sign) == 1.0);
      plus += p.sign > 0;
      CHECK(p.tube.rect.half_width / p.tube.rect.half_length == doctest::Approx(k.delta));
    }
    CHECK(plus > 0);
    CHECK(plus < static_cast<int>(k.recipe.pieces.size()));

    for (const auto& plate : k.plates) {
      CHECK(plate.compression.union_measure <= plate.compression.sum_measure);
      for (double v : plate.compression.translations)
        CHECK(std::abs(v) <= k.alpha * 2 * plate.family.rects[0].half_length);
    }

    const TubeReport rep = verify_tube_lower_bound(k.recipe, cfg);
    CHECK_FALSE(rep.degenerate);
    CHECK(rep.c_max / rep.c_min <= 3.0);

    const KakeyaWitness again = build_kakeya_witness(cfg, opt);
    CHECK((again.combined.values - k.combined.values).norm() == 0.0);
    opt.seed = 4;
    const KakeyaWitness other = build_kakeya_witness(cfg, opt);
    CHECK((other.combined.values - k.combined.values).norm() > 0.0);
  }
  SUBCASE("plate measures against the summed tube measure") {
    std::vector<double> scaled;
    for (double lam : {4096.0, 8192.0, 16384.0}) {
      const KakeyaWitness k = build_kakeya_witness(fold_config(lam));
      const auto& c = k.plates[k.plates.size() / 2].compression;
      scaled.push_back(c.union_measure * std::pow(lam, 5.0 / 6.0) * std::log(lam));
      if (lam == 16384.0) CHECK(c.union_measure * 2.0 <= c.sum_measure);
    }
    CHECK(*std::max_element(scaled.begin(), scaled.end()) / *std::min_element(scaled.begin(), scaled.end()) <= 3.0);
  }
}
