#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "oscillab/geometry.hpp"

using namespace oscillab;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kPi = 3.14159265358979323846;

VectorXd vec(std::initializer_list<double> v) {
  VectorXd r(static_cast<int>(v.size()));
  int i = 0;
  for (double a : v) r[i++] = a;
  return r;
}

MatrixXd random_rotation(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  MatrixXd A(d, d);
  for (int i = 0; i < d * d; ++i) A.data()[i] = n01(rng);
  Eigen::HouseholderQR<MatrixXd> qr(A);
  MatrixXd Q = qr.householderQ();
  return Q;
}

// Q diag(s) R with singular values in [0.5, 2].
MatrixXd random_well_conditioned(int d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.5, 2.0);
  VectorXd s(d);
  for (int i = 0; i < d; ++i) s[i] = u(rng);
  return random_rotation(d, rng) * s.asDiagonal() * random_rotation(d, rng);
}

}  // namespace

TEST_CASE("fold conditions") {
  SUBCASE("model fold at the origin is a two-sided fold") {
    const PhasePtr ph = make_phase("model_fold", 2);
    const FoldReport r = check_fold_conditions(*ph, vec({0, 0}), vec({0, 0}));
    CHECK(r.left_fold == Verdict::Pass);
    CHECK(r.right_fold == Verdict::Pass);
    CHECK(r.curvature == Verdict::Pass);
    CHECK(std::abs(r.left_quantity) == doctest::Approx(1.0));
    CHECK(std::abs(r.right_quantity) == doctest::Approx(1.0));
    CHECK(r.a.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.b.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(r.b[1]) == doctest::Approx(1.0));
    CHECK(std::abs(r.a[1]) == doctest::Approx(1.0));
  }
  SUBCASE("one-sided fold fails on the right") {
    const PhasePtr ph = make_phase("one_sided_fold", 2);
    for (double x1 : {-0.3, 0.0, 0.2}) {
      const FoldReport r = check_fold_conditions(*ph, vec({x1, 0.1}), vec({0.25, 0.0}));
      CHECK(r.left_fold == Verdict::Pass);
      CHECK(r.right_fold == Verdict::Fail);
    }
  }
  SUBCASE("circle at x - y = pi/2") {
    const PhasePtr ph = make_phase("circle_extension", 1);
    const FoldReport r = check_fold_conditions(*ph, vec({0.4}), vec({0.4 - kPi / 2}));
    CHECK(r.left_fold == Verdict::Pass);
    CHECK(r.right_fold == Verdict::Pass);
    CHECK(std::abs(r.det_derivative_y) == doctest::Approx(1.0));
    CHECK(std::abs(r.det_derivative_x) == doctest::Approx(1.0));
  }
  SUBCASE("curve averaging phase folds on both sides") {
    const PhasePtr ph = make_phase("curve_avg", 3);
    const FoldReport r = check_fold_conditions(*ph, vec({0.2, 0, 0}), vec({0, -0.2, 1.0}));
    CHECK(r.left_fold == Verdict::Pass);
    CHECK(r.right_fold == Verdict::Pass);
  }
  SUBCASE("off the fold the verdicts are not applicable") {
    const PhasePtr ph = make_phase("model_fold", 2);
    const FoldReport r = check_fold_conditions(*ph, vec({0, 0.3}), vec({0, 0}));
    CHECK(r.left_fold == Verdict::NotApplicable);
    CHECK(r.right_fold == Verdict::NotApplicable);
    CHECK(r.a.norm() == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("corank two is rejected") {
    CallablePhase ph(
        "corank2", 2,
        [](const VectorXd& x, const VectorXd& y) { return x[0] * x[0] * y[0] * y[0] + x[1] * y[1] * y[1]; },
        Box::cube(2, 1), Box::cube(2, 1));
    CHECK_THROWS_AS(check_fold_conditions(ph, vec({0, 0}), vec({0, 0})), CorankError);
  }
}

TEST_CASE("fold surface solver") {
  SUBCASE("model fold: g = x_d") {
    const PhasePtr ph = make_phase("model_fold", 2);
    CHECK(solve_fold_surface(*ph, vec({0.1, 0.3}), vec({0.7}), -1, 1) ==
          doctest::Approx(0.3).epsilon(1e-13));
  }
  SUBCASE("circle: fold at y = x - pi/2") {
    const PhasePtr ph = make_phase("circle_extension", 1);
    const double x = 0.3;
    const double y = solve_fold_surface(*ph, vec({x}), VectorXd(0), x - 2, x);
    CHECK(y == doctest::Approx(x - kPi / 2).epsilon(1e-13));
    CHECK(std::abs(std::cos(x - y)) <= 1e-12);
    CHECK_THROWS_AS(solve_fold_surface(*ph, vec({x}), VectorXd(0), x - 5, x + 2),
                    AmbiguousRootError);
  }
  SUBCASE("curve averaging: y2 = -y3 (x1 - y1)") {
    const PhasePtr ph = make_phase("curve_avg", 3);
    CHECK(solve_fold_surface(*ph, vec({0.2, 0.1, -0.1}), vec({0.0, 1.0}), -1, 1) ==
          doctest::Approx(-0.2).epsilon(1e-12));
  }
  SUBCASE("no root") {
    const PhasePtr ph = make_phase("dot_product", 2);
    CHECK_THROWS_AS(solve_fold_surface(*ph, vec({0, 0}), vec({0}), -1, 1), NoRootError);
  }
  SUBCASE("sphere: root agrees with <Xi, Gamma> = 0") {
    const PhasePtr ph = make_phase("sphere_extension", 2);
    const auto& sp = dynamic_cast<const SphereExtensionPhase&>(*ph);
    const VectorXd x = vec({0.15, -0.2});
    const double g = solve_fold_surface(*ph, x, vec({0.1}), -0.5, 0.5);
    CHECK(std::abs(sp.embed_x(x).dot(sp.embed_y(vec({0.1, g})))) < 1e-12);
  }
}

TEST_CASE("curvature condition") {
  const Box ybox = Box::cube(2, 0.4);
  SUBCASE("model fold: paraboloid") {
    const PhasePtr ph = make_phase("model_fold", 2);
    for (double x2 : {-0.2, 0.0, 0.1}) {
      const CurvatureReport r = check_curvature_condition(*ph, vec({0.05, x2}), ybox, 25);
      CHECK(r.verdict == Verdict::Pass);
      CHECK(r.points == 25);
      // II = 2 a_d with unit cokernel a ~ (-2 y1, 1), so the margin is 2 / sqrt(1 + 4 y1^2).
      CHECK(r.margin >= 2.0 / std::sqrt(1.0 + 4 * 0.16) - 1e-12);
      CHECK(r.margin < 2.0);
    }
    const PhasePtr ph3 = make_phase("model_fold", 3);
    CHECK(check_curvature_condition(*ph3, vec({0, 0, 0.1}), Box::cube(3, 0.4), 25).verdict ==
          Verdict::Pass);
  }
  SUBCASE("sphere extension") {
    const PhasePtr ph = make_phase("sphere_extension", 2);
    for (double x1 : {-0.2, 0.0, 0.3}) {
      const CurvatureReport r = check_curvature_condition(*ph, vec({x1, 0.1}), ybox, 25);
      CHECK(r.verdict == Verdict::Pass);
      CHECK(r.margin > 1e-2);
    }
  }
  SUBCASE("no fold in the box") {
    const PhasePtr ph = make_phase("dot_product", 2);
    CHECK(check_curvature_condition(*ph, vec({0, 0}), ybox, 9).verdict == Verdict::NotApplicable);
  }
  SUBCASE("curve averaging: fibres are cones, one curvature vanishes") {
    const PhasePtr ph = make_phase("curve_avg", 3);
    const Box box(vec({-0.4, -0.6, 0.6}), vec({0.4, 0.6, 1.4}));
    const CurvatureReport r = check_curvature_condition(*ph, vec({0.1, 0, 0}), box, 25);
    CHECK(r.verdict == Verdict::Fail);
    CHECK(r.min_rank == 1);
    CHECK(r.max_rank == 1);
    CHECK(r.consistent_sign);
  }
}

TEST_CASE("normal form") {
  SUBCASE("model fold at the origin: identity maps") {
    const PhasePtr ph = make_phase("model_fold", 2);
    const NormalForm nf = normalize_phase_at_point(ph, vec({0, 0}), vec({0, 0}));
    CHECK(nf.ok());
    CHECK(nf.max_vanishing_residual() == 0.0);
    CHECK(nf.rotation_left.isIdentity(1e-15));
    CHECK(nf.rotation_right.isIdentity(1e-15));
    CHECK(nf.alpha.norm() == 0.0);
    CHECK(nf.beta.norm() == 0.0);
    CHECK(nf.B.norm() == 0.0);
  }
  SUBCASE("model fold at a fold point away from the origin") {
    const PhasePtr ph = make_phase("model_fold", 2);
    const NormalForm nf = normalize_phase_at_point(ph, vec({0.2, -0.1}), vec({0.3, -0.1}));
    CHECK(nf.ok());
    CHECK(nf.max_vanishing_residual() <= 1e-12);
  }
  SUBCASE("sphere extension at a fold point: nontrivial rotations") {
    const PhasePtr ph = make_phase("sphere_extension", 2);
    const VectorXd x = vec({0.2, -0.15});
    const VectorXd y = vec({0.1, solve_fold_surface(*ph, x, vec({0.1}), -0.5, 0.5)});
    const NormalForm nf = normalize_phase_at_point(ph, x, y);
    CHECK(nf.max_vanishing_residual() <= 1e-8);
    CHECK(nf.min_nonzero_quantity() >= 1e-4);
    CHECK_FALSE(nf.rotation_right.isIdentity(1e-6));
  }
  SUBCASE("model fold precomposed with a random rotation of x") {
    std::mt19937_64 rng(99);
    const PhasePtr mf = make_phase("model_fold", 2);
    const MatrixXd R = random_rotation(2, rng);
    auto rotated = std::make_shared<PulledBackPhase>(
        mf, QuadraticMap::affine(VectorXd::Zero(2), R),
        QuadraticMap::affine(VectorXd::Zero(2), MatrixXd::Identity(2, 2)), false);
    const NormalForm nf = normalize_phase_at_point(rotated, vec({0, 0}), vec({0, 0}));
    CHECK(nf.max_vanishing_residual() <= 1e-8);
    CHECK(nf.min_nonzero_quantity() >= 1e-4);
  }
  SUBCASE("20 seeded affine scrambles of the model fold") {
    const PhasePtr mf = make_phase("model_fold", 2);
    for (unsigned seed = 0; seed < 20; ++seed) {
      std::mt19937_64 rng(1000 + seed);
      std::uniform_real_distribution<double> u(-0.3, 0.3);
      const MatrixXd A = random_well_conditioned(2, rng), C = random_well_conditioned(2, rng);
      const VectorXd x0 = vec({u(rng), u(rng)}), y0 = vec({u(rng), u(rng)});
      // psi(x, y) = phi(A (x - x0), C (y - y0)) folds at (x0, y0).
      auto scrambled = std::make_shared<PulledBackPhase>(
          mf, QuadraticMap::affine(-A * x0, A), QuadraticMap::affine(-C * y0, C), false);
      const NormalForm nf = normalize_phase_at_point(scrambled, x0, y0);
      INFO("seed " << seed);
      CHECK(nf.max_vanishing_residual() <= 1e-8);
      CHECK(nf.min_nonzero_quantity() >= 1e-4);
    }
  }
  SUBCASE("degenerate one-sided fold is rejected") {
    const PhasePtr ph = make_phase("one_sided_fold", 2);
    CHECK_THROWS_AS(normalize_phase_at_point(ph, vec({0, 0}), vec({0, 0})), FoldDegeneracyError);
  }
  SUBCASE("curvature verdict is invariant under the normal form change of variables") {
    for (const auto& name : {std::string("model_fold"), std::string("sphere_extension")}) {
      const PhasePtr ph = make_phase(name, 2);
      const VectorXd x = vec({0.1, 0.05});
      const VectorXd y = vec({0.05, solve_fold_surface(*ph, x, vec({0.05}), -0.5, 0.5)});
      const NormalForm nf = normalize_phase_at_point(ph, x, y);
      const Verdict before =
          check_curvature_condition(*ph, x, Box::centered(y, VectorXd::Constant(2, 0.3)), 9).verdict;
      const Verdict after =
          check_curvature_condition(*nf.phase, VectorXd::Zero(2), Box::cube(2, 0.1), 9).verdict;
      INFO(name);
      CHECK(before == Verdict::Pass);
      CHECK(after == before);
      CHECK(check_fold_conditions(*nf.phase, VectorXd::Zero(2), VectorXd::Zero(2)).curvature ==
            Verdict::Pass);
    }
  }
}
