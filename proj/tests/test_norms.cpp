#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "oscillab/fast_operator.hpp"
#include "oscillab/norms.hpp"

using namespace oscillab;
using Eigen::VectorXcd;
using Eigen::VectorXd;

namespace {

constexpr double kPi = 3.14159265358979323846;

VectorXd vec(std::initializer_list<double> v) {
  VectorXd r(static_cast<int>(v.size()));
  int i = 0;
  for (double a : v) r[i++] = a;
  return r;
}

// T f = a(x) * sum_k b_k f_k * cell_y.
class RankOneOperator : public LinearOperator {
 public:
  RankOneOperator(GridSpec xg, GridSpec yg, VectorXcd a, VectorXcd b)
      : xg_(std::move(xg)), yg_(std::move(yg)), a_(std::move(a)), b_(std::move(b)) {}
  const GridSpec& x_grid() const override { return xg_; }
  const GridSpec& y_grid() const override { return yg_; }
  VectorXcd apply(const VectorXcd& f) const override {
    return a_ * (b_.transpose() * f)(0) * yg_.cell_volume();
  }
  VectorXcd adjoint(const VectorXcd& u) const override {
    return b_.conjugate() * (a_.adjoint() * u)(0) * xg_.cell_volume();
  }
  std::string method() const override { return "rank-one"; }

 private:
  GridSpec xg_, yg_;
  VectorXcd a_, b_;
};

RankOneOperator make_rank_one() {
  const GridSpec xg{Box::cube(1, 1.0), {40}, 6.0}, yg{Box::cube(1, 0.5), {30}, 6.0};
  VectorXcd a(40), b(30);
  for (int i = 0; i < 40; ++i) a[i] = std::polar(1.0 + std::cos(xg.coord(0, i)), 3.0 * xg.coord(0, i));
  for (int k = 0; k < 30; ++k) b[k] = std::polar(0.5 + yg.coord(0, k) * yg.coord(0, k), -2.0 * yg.coord(0, k));
  return RankOneOperator(xg, yg, a, b);
}

OperatorConfig small_circle(double lambda, double scale = 1.0) {
  OperatorConfig c = make_config(make_phase("circle_extension", 1), lambda,
                                 Box(vec({kPi / 2 - 0.25}), vec({kPi / 2 + 0.25})), Box::cube(1, 0.75));
  c.cutoff.scale = scale;
  return c;
}

double svd_norm(const LinearOperator& op) {
  const Eigen::MatrixXcd M = assemble_dense(op);
  const double wx = op.x_grid().cell_volume(), wy = op.y_grid().cell_volume();
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(std::sqrt(wx / wy) * M);
  return svd.singularValues()[0];
}

}  // namespace

TEST_CASE("discrete norms") {
  const GridSpec g{Box::cube(2, 0.5), {10, 10}, 6.0};
  const double w = g.cell_volume();
  SUBCASE("constant on a box of volume V has L^p norm c V^(1/p)") {
    const VectorXcd c = VectorXcd::Constant(g.size(), cd(0, 3.0));
    for (double p : {1.0, 1.5, 2.0, 3.0, 7.0})
      CHECK(lp_norm(c, p, w) == doctest::Approx(3.0 * std::pow(1.0, 1.0 / p)).epsilon(1e-13));
    CHECK(lp_norm(c, kInf, w) == 3.0);
  }
  SUBCASE("indicator of a set of measure 0.25: weak L^2 quasi-norm 0.5") {
    VectorXcd v = VectorXcd::Zero(g.size());
    for (int k = 0; k < 25; ++k) v[k * 4] = 1.0;
    CHECK(weak_norm(v, 2.0, w) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(indicator_lorentz_norm(0.25, 2.0) == doctest::Approx(0.5));
  }
  SUBCASE("weak quasi-norm equals brute force over thresholds") {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> coin(0, 2);
    for (int trial = 0; trial < 20; ++trial) {
      VectorXcd v(g.size());
      for (Eigen::Index k = 0; k < v.size(); ++k) {
        const int c = coin(rng);
        v[k] = c == 0 ? 0.0 : (c == 1 ? 1.0 : cd(0, -4.0));  // two-level step function
      }
      const double q = 1.5 + trial * 0.2;
      double brute = 0.0;
      for (double alpha : {1.0, 4.0}) {
        double meas = 0.0;
        for (Eigen::Index k = 0; k < v.size(); ++k) meas += std::abs(v[k]) >= alpha ? w : 0.0;
        brute = std::max(brute, alpha * std::pow(meas, 1.0 / q));
      }
      CHECK(weak_norm(v, q, w) == doctest::Approx(brute).epsilon(1e-13));
    }
  }
  SUBCASE("duality map") {
    VectorXcd v(3);
    v << cd(3, 4), 0.0, cd(-2, 0);
    const VectorXcd j = duality_map(v, 3.0);
    CHECK(std::abs(j[0] - cd(3, 4) * 5.0) < 1e-13);
    CHECK(j[1] == cd(0.0));
    CHECK(std::abs(j[2] - cd(-4, 0)) < 1e-13);
    CHECK(dual_exponent(2.5) == doctest::Approx(5.0 / 3.0));
  }
}

TEST_CASE("power iteration") {
  SUBCASE("matches the dense singular value") {
    const OperatorConfig cfg = small_circle(32.0);
    const OperatorPtr op = make_operator(cfg);
    const NormEstimate est = l2_norm_power_iteration(*op, {1e-12, 2000, 7});
    CHECK(est.converged);
    const double oracle = svd_norm(*op);
    CHECK(est.value == doctest::Approx(oracle).epsilon(1e-6));
    CHECK(dense_l2_norm(*op).value == doctest::Approx(oracle).epsilon(1e-10));
    CHECK(evaluate_ratio(*op, est.witness.values, 2, 2) == doctest::Approx(est.value).epsilon(1e-10));
  }
  SUBCASE("homogeneity in the cutoff") {
    const OperatorPtr a = make_operator(small_circle(64.0));
    const OperatorPtr b = make_operator(small_circle(64.0, 2.0));
    const double va = l2_norm_power_iteration(*a, {1e-10, 500, 3}).value;
    const double vb = l2_norm_power_iteration(*b, {1e-10, 500, 3}).value;
    CHECK(vb == doctest::Approx(2.0 * va).epsilon(1e-12));
  }
  SUBCASE("Rayleigh quotients never decrease") {
    const OperatorPtr op = make_operator(small_circle(200.0));
    const NormEstimate est = l2_norm_power_iteration(*op, {1e-12, 300, 1});
    for (std::size_t i = 1; i < est.history.size(); ++i)
      CHECK(est.history[i] >= est.history[i - 1] * (1 - 1e-12));
  }
}

TEST_CASE("duality-power lower bounds") {
  SUBCASE("rank-one kernel: ||a||_q ||b||_{p'}") {
    const RankOneOperator op = make_rank_one();
    for (auto [p, q] : {std::pair{2.0, 2.0}, {2.5, 2.5}, {2.0, 3.0}, {1.5, 4.0}}) {
      BoydOptions opt;
      opt.starts = 2;
      opt.tol = 1e-12;
      const NormEstimate est = boyd_pq_lower_bound(op, p, q, opt);
      const GridSpec& xg = op.x_grid();
      const GridSpec& yg = op.y_grid();
      VectorXcd av(40), bv(30);
      for (int i = 0; i < 40; ++i) av[i] = std::polar(1.0 + std::cos(xg.coord(0, i)), 3.0 * xg.coord(0, i));
      for (int k = 0; k < 30; ++k) bv[k] = std::polar(0.5 + yg.coord(0, k) * yg.coord(0, k), -2.0 * yg.coord(0, k));
      const double exact = lp_norm(av, q, xg.cell_volume()) * lp_norm(bv, dual_exponent(p), yg.cell_volume());
      INFO("p = " << p << ", q = " << q);
      CHECK(est.value == doctest::Approx(exact).epsilon(1e-8));
    }
  }
  SUBCASE("p = q = 2 agrees with power iteration") {
    const OperatorPtr op = make_operator(small_circle(128.0));
    const double pi = l2_norm_power_iteration(*op, {1e-12, 2000, 2}).value;
    BoydOptions opt;
    opt.starts = 2;
    opt.tol = 1e-12;
    opt.max_iter = 2000;
    const NormEstimate est = boyd_pq_lower_bound(*op, 2.0, 2.0, opt);
    CHECK(est.value == doctest::Approx(pi).epsilon(1e-6));
    for (std::size_t i = 1; i < est.history.size(); ++i)
      CHECK(est.history[i] >= est.history[i - 1] * (1 - 1e-12));
    CHECK(est.damping_events == 0);
  }
  SUBCASE("accepted steps never decrease beyond tolerance; restarts are monotone") {
    const OperatorPtr op = make_operator(small_circle(300.0));
    BoydOptions opt;
    opt.starts = 2;
    opt.seed = 5;
    const NormEstimate two = boyd_pq_lower_bound(*op, 1.8, 3.5, opt);
    for (std::size_t i = 1; i < two.history.size(); ++i)
      CHECK(two.history[i] >= two.history[i - 1] * (1 - opt.tol));
    opt.starts = 3;
    const NormEstimate three = boyd_pq_lower_bound(*op, 1.8, 3.5, opt);
    CHECK(three.value >= two.value);
    CHECK(three.restarts == 3);
    opt.seed_witnesses = {three.witness.values};
    CHECK(boyd_pq_lower_bound(*op, 1.8, 3.5, opt).value >= three.value * (1 - 1e-12));
    // The stored witness reproduces the value through the direct operator.
    const DirectOperator direct(small_circle(300.0), op->x_grid(), op->y_grid());
    CHECK(evaluate_ratio(direct, three.witness.values, 1.8, 3.5) ==
          doctest::Approx(three.value).epsilon(1e-10));
  }
  SUBCASE("errors") {
    const RankOneOperator op = make_rank_one();
    CHECK_THROWS_AS(boyd_pq_lower_bound(op, 1.0, 2.0), ConfigError);
    BoydOptions opt;
    opt.starts = 0;
    opt.seed_witnesses = {VectorXcd::Zero(30)};
    CHECK_THROWS_AS(boyd_pq_lower_bound(op, 2.0, 2.0, opt), DegenerateStartError);
  }
}

TEST_CASE("bilinear lower bounds") {
  SUBCASE("same support: bounded by ||T||^2 with equality at the top singular vector") {
    const OperatorPtr op = make_operator(small_circle(64.0));
    const double top = l2_norm_power_iteration(*op, {1e-13, 3000, 1}).value;
    const Box all = Box::cube(1, 1.0);
    BilinearOptions opt;
    opt.tol = 1e-10;
    opt.max_iter = 2000;
    const NormEstimate est = bilinear_norm_lower_bound(*op, all, all, opt);
    CHECK(est.value <= top * top * (1 + 1e-9));
    CHECK(est.value >= top * top * (1 - 1e-4));
  }
  SUBCASE("rank-one kernel closed form") {
    const RankOneOperator op = make_rank_one();
    const Box left(vec({-0.5}), vec({-0.1})), right(vec({0.1}), vec({0.5}));
    const NormEstimate est = bilinear_norm_lower_bound(op, left, right);
    const GridSpec& xg = op.x_grid();
    const GridSpec& yg = op.y_grid();
    VectorXcd av(40), bv(30);
    for (int i = 0; i < 40; ++i) av[i] = std::polar(1.0 + std::cos(xg.coord(0, i)), 3.0 * xg.coord(0, i));
    for (int k = 0; k < 30; ++k) bv[k] = std::polar(0.5 + yg.coord(0, k) * yg.coord(0, k), -2.0 * yg.coord(0, k));
    const VectorXd ml = support_mask(yg, left), mr = support_mask(yg, right);
    const double exact = std::pow(lp_norm(av, 2.0, xg.cell_volume()), 2) *
                         lp_norm(bv.cwiseProduct(ml), 2.0, yg.cell_volume()) *
                         lp_norm(bv.cwiseProduct(mr), 2.0, yg.cell_volume());
    CHECK(est.value == doctest::Approx(exact).epsilon(1e-8));
    // Supports are respected.
    CHECK(est.witness.values.cwiseProduct(VectorXd::Ones(30) - ml).norm() == 0.0);
    CHECK(est.witness_g.values.cwiseProduct(VectorXd::Ones(30) - mr).norm() == 0.0);
  }
  SUBCASE("empty support is a configuration error") {
    const RankOneOperator op = make_rank_one();
    CHECK_THROWS_AS(bilinear_norm_lower_bound(op, Box(vec({3.0}), vec({4.0})), Box::cube(1, 1)),
                    ConfigError);
  }
}

TEST_CASE("scaling fits") {
  std::vector<double> lams;
  for (int k = 6; k <= 12; ++k) lams.push_back(std::ldexp(1.0, k));
  SUBCASE("exact power law") {
    std::vector<double> v;
    for (double l : lams) v.push_back(3.0 * std::pow(l, -0.8));
    const ScalingFit fit = fit_scaling_law(lams, v);
    CHECK(fit.exponent == doctest::Approx(-0.8).epsilon(1e-12));
    CHECK(std::exp(fit.intercept) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(fit.r2 == doctest::Approx(1.0));
    CHECK(fit.predict(100.0) == doctest::Approx(3.0 * std::pow(100.0, -0.8)).epsilon(1e-12));
  }
  SUBCASE("power times log") {
    std::vector<double> v;
    for (double l : lams) v.push_back(std::pow(l, -0.8) * std::pow(std::log(l), 0.4));
    CHECK(std::abs(fit_scaling_law(lams, v).exponent + 0.8) <= 0.07);
    const ScalingFit ptl = fit_scaling_law(lams, v, FitModel::PowerTimesLog);
    CHECK(std::abs(ptl.log_power - 0.4) <= 0.1);
    CHECK(std::abs(ptl.exponent + 0.8) <= 1e-8);
  }
  SUBCASE("5% multiplicative noise") {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> n01;
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> v;
      for (double l : lams) v.push_back(std::pow(l, -0.8) * (1.0 + 0.05 * n01(rng)));
      const ScalingFit fit = fit_scaling_law(lams, v);
      CHECK(std::abs(fit.exponent + 0.8) <= 0.05);
      CHECK(fit.r2 > 0.98);
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(fit_scaling_law({2, 4, 8, 16}, {1, 0, 1, 1}), DomainError);
    CHECK_THROWS_AS(fit_scaling_law({2, 4, 8}, {1, 1, 1}), std::invalid_argument);
    CHECK_THROWS_AS(fit_scaling_law({2, 8, 4, 16}, {1, 1, 1, 1}), std::invalid_argument);
  }
}
