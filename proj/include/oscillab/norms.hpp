#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "oscillab/errors.hpp"
#include "oscillab/operator.hpp"

namespace oscillab {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Discrete L^p norm (sum |v|^p * cell)^(1/p); p = inf gives max |v|.
template <class Derived>
double lp_norm(const Eigen::DenseBase<Derived>& v, double p, double cell) {
  if (v.size() == 0) return 0.0;
  const auto a = v.derived().array().abs();
  if (std::isinf(p)) return a.maxCoeff();
  if (p == 2.0) return std::sqrt(a.square().sum() * cell);
  const double m = a.maxCoeff();
  if (m == 0.0) return 0.0;
  // Scaled to avoid overflow for large p.
  return m * std::pow((a / m).pow(p).sum() * cell, 1.0 / p);
}

inline double lp_norm(const DiscreteFunction& f, double p) {
  return lp_norm(f.values, p, f.grid.cell_volume());
}

// Weak L^{q,inf} quasi-norm: max over k of alpha_k (k * cell)^(1/q), alpha_k the k-th largest |v|.
template <class Derived>
double weak_norm(const Eigen::DenseBase<Derived>& v, double q, double cell) {
  std::vector<double> a(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) a[i] = std::abs(v.derived()(i));
  std::sort(a.begin(), a.end(), std::greater<>());
  double best = 0.0;
  for (std::size_t k = 0; k < a.size() && a[k] > 0; ++k)
    best = std::max(best, a[k] * std::pow((k + 1) * cell, 1.0 / q));
  return best;
}

inline double weak_norm(const DiscreteFunction& f, double q) {
  return weak_norm(f.values, q, f.grid.cell_volume());
}

// Lorentz L^{p,1} norm of an indicator, normalized as |E|^(1/p).
inline double indicator_lorentz_norm(double measure, double p) { return std::pow(measure, 1.0 / p); }

// Duality map J_r(g) = |g|^(r-1) g / |g|, zero where g = 0.
template <class Derived>
Eigen::VectorXcd duality_map(const Eigen::MatrixBase<Derived>& g, double r) {
  Eigen::VectorXcd out(g.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double a = std::abs(g(i));
    out[i] = a > 0 ? g(i) * std::pow(a, r - 2.0) : cd(0.0);
  }
  return out;
}

inline double dual_exponent(double p) {
  if (p == 1.0) return kInf;
  if (std::isinf(p)) return 1.0;
  return p / (p - 1.0);
}

struct NormEstimate {
  double p = 2.0, q = 2.0;
  double value = 0.0;
  DiscreteFunction witness;
  DiscreteFunction witness_g;  // second argument for bilinear estimates
  std::string method;
  int iterations = 0;
  bool converged = false;
  int restarts = 0;
  int damping_events = 0;
  std::vector<double> history;  // ratio per iteration of the winning run
};

// ||T f||_q / ||f||_p on the operator's grids.
double evaluate_ratio(const LinearOperator& op, const Eigen::VectorXcd& f, double p, double q);

// Random complex Gaussian vector from a seed.
Eigen::VectorXcd random_start(Eigen::Index n, std::uint64_t seed);

struct PowerIterationOptions {
  double tol = 1e-8;
  int max_iter = 500;
  std::uint64_t seed = 0;
};

NormEstimate l2_norm_power_iteration(const LinearOperator& op, const PowerIterationOptions& opt = {});

struct BoydOptions {
  int starts = 8;
  double tol = 1e-6;
  int max_iter = 300;
  std::uint64_t seed = 0;
  std::vector<Eigen::VectorXcd> seed_witnesses;  // analytic starts on the operator's y grid
  int max_damping_halvings = 6;
};

// Duality-power iteration f -> normalize_p(J_{p'}(T* J_q(T f))) from random and seeded starts.
NormEstimate boyd_pq_lower_bound(const LinearOperator& op, double p, double q,
                                 const BoydOptions& opt = {});

struct BilinearOptions {
  double p_f = 2.0, p_g = 2.0;  // input norms
  double r = 1.0;               // norm of the product T f * T g
  int starts = 2;
  double tol = 1e-6;
  int max_iter = 300;
  std::uint64_t seed = 0;
};

// Alternating maximization of ||T f T g||_r / (||f||_{p_f} ||g||_{p_g}) with f, g supported in
// the given boxes of y.
NormEstimate bilinear_norm_lower_bound(const LinearOperator& op, const Box& f_support,
                                       const Box& g_support, const BilinearOptions& opt = {});

// Largest singular value from the dense matrix of T (weighted L^2 spaces) with its witness.
NormEstimate dense_l2_norm(const LinearOperator& op, double cap = kDefaultDenseCap);

// 0/1 mask of y-grid nodes inside a box.
Eigen::VectorXd support_mask(const GridSpec& grid, const Box& box);

enum class FitModel { PurePower, PowerTimesLog };
std::string to_string(FitModel m);

struct ScalingFit {
  std::vector<double> lambdas, values;
  FitModel model = FitModel::PurePower;
  double exponent = 0.0;   // b in a + b log(lambda) + c log(log(lambda))
  double log_power = std::numeric_limits<double>::quiet_NaN();
  double intercept = 0.0;  // a
  double r2 = 0.0;

  double predict(double lambda) const;
};

ScalingFit fit_scaling_law(const std::vector<double>& lambdas, const std::vector<double>& values,
                           FitModel model = FitModel::PurePower);

}  // namespace oscillab
