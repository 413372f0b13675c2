#pragma once

#include <Eigen/Dense>

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "oscillab/box.hpp"

namespace oscillab {

using Params = std::map<std::string, double>;

struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PrecisionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Derivatives of a phase up to order 3 in the joint variable z = (x, y),
// z_i = x_i for i < d and z_{d+i} = y_i.
struct Jet {
  int n = 0;
  int order = 0;
  double value = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
  std::vector<double> third;  // (i*n + j)*n + k

  Jet() = default;
  Jet(int n_vars, int max_order);

  double& t3(int i, int j, int k) { return third[(static_cast<std::size_t>(i) * n + j) * n + k]; }
  double t3(int i, int j, int k) const { return third[(static_cast<std::size_t>(i) * n + j) * n + k]; }

  int d() const { return n / 2; }
  Eigen::MatrixXd mixed_hessian() const { return hess.block(0, d(), d(), d()); }
};

// All partials of one total order as a dense symmetric tensor.
struct DerivativeTensor {
  int n = 0;
  int order = 0;
  std::vector<double> data;

  double operator()() const { return data.at(0); }
  double operator()(int i) const { return data.at(i); }
  double operator()(int i, int j) const { return data.at(static_cast<std::size_t>(i) * n + j); }
  double operator()(int i, int j, int k) const {
    return data.at((static_cast<std::size_t>(i) * n + j) * n + k);
  }
};

class PhaseFunction {
 public:
  PhaseFunction(std::string name, int d, Params params, Box domain_x, Box domain_y);
  virtual ~PhaseFunction() = default;

  const std::string& name() const { return name_; }
  int dim() const { return d_; }
  const Params& params() const { return params_; }
  const Box& domain_x() const { return domain_x_; }
  const Box& domain_y() const { return domain_y_; }

  virtual double eval(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const = 0;

  // Closed-form phases override this; the default is central differences of eval.
  virtual Jet jet(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int order) const;
  virtual bool closed_form() const { return false; }

  // Coordinate of y in which the fold surface det phi_xy = 0 is solved.
  virtual int fold_axis() const { return d_ - 1; }
  // g(x, y') when known in closed form; y_prime omits fold_axis().
  virtual std::optional<double> fold_closed_form(const Eigen::VectorXd& x,
                                                 const Eigen::VectorXd& y_prime) const;

  bool in_domain(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;
  void require_domain(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;

 private:
  std::string name_;
  int d_;
  Params params_;
  Box domain_x_;
  Box domain_y_;
};

using PhasePtr = std::shared_ptr<const PhaseFunction>;

Jet finite_difference_jet(const PhaseFunction& phase, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& y, int order);

DerivativeTensor eval_phase_derivatives(const PhaseFunction& phase, const Eigen::VectorXd& x,
                                        const Eigen::VectorXd& y, int order);

double det_mixed_hessian(const PhaseFunction& phase, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& y);

// Polynomial in z = (x, y) with exact derivatives.
struct Monomial {
  double coef;
  std::vector<int> powers;  // length 2d
};

class PolynomialPhase : public PhaseFunction {
 public:
  PolynomialPhase(std::string name, int d, Params params, std::vector<Monomial> terms,
                  Box domain_x, Box domain_y);
  double eval(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const override;
  Jet jet(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int order) const override;
  bool closed_form() const override { return true; }
  const std::vector<Monomial>& terms() const { return terms_; }

 private:
  std::vector<Monomial> terms_;
};

// sum_{j<d} x_j y_j + (x_d - y_d)^3/6 + x_d sum_{k<d} y_k^2
class ModelFoldPhase : public PolynomialPhase {
 public:
  explicit ModelFoldPhase(int d);
  double eval(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const override;
  std::optional<double> fold_closed_form(const Eigen::VectorXd& x,
                                         const Eigen::VectorXd& y_prime) const override;
};

// sum_{j<d} x_j y_j + x_d y_d^2 + x_d sum_{k<d} y_k^2; folds on the left only.
class OneSidedFoldPhase : public PolynomialPhase {
 public:
  explicit OneSidedFoldPhase(int d);
  std::optional<double> fold_closed_form(const Eigen::VectorXd& x,
                                         const Eigen::VectorXd& y_prime) const override;
};

// y2 (x2 + (x1-y1)^2/2) + y3 (x3 + (x1-y1)^3/6), fold solved in y2.
class CurveAveragingPhase : public PolynomialPhase {
 public:
  CurveAveragingPhase();
  double eval(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const override;
  int fold_axis() const override { return 1; }
  std::optional<double> fold_closed_form(const Eigen::VectorXd& x,
                                         const Eigen::VectorXd& y_prime) const override;
};

// x . y; no fold anywhere.
class DotProductPhase : public PolynomialPhase {
 public:
  explicit DotProductPhase(int d);
};

// cos(x - y) on the line; folds at x - y = +-pi/2.
class CircleExtensionPhase : public PhaseFunction {
 public:
  CircleExtensionPhase();
  double eval(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const override;
  Jet jet(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int order) const override;
  bool closed_form() const override { return true; }
  std::optional<double> fold_closed_form(const Eigen::VectorXd& x,
                                         const Eigen::VectorXd& y_prime) const override;
};

// <Xi(x), Gamma(y)> for two unit spheres in R^{d+1}, each written as a graph over
// the tangent plane at a base point: Xi(x) = sqrt(1-|x|^2) p + sum x_i t_i.
class SphereExtensionPhase : public PhaseFunction {
 public:
  // Base frames: columns (t_1..t_d, p), orthonormal.
  SphereExtensionPhase(int d, Eigen::MatrixXd frame_x, Eigen::MatrixXd frame_y, Params params);
  double eval(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const override;
  Jet jet(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int order) const override;
  bool closed_form() const override { return true; }

  Eigen::VectorXd embed_x(const Eigen::VectorXd& x) const;
  Eigen::VectorXd embed_y(const Eigen::VectorXd& y) const;

 private:
  Eigen::MatrixXd frame_x_, frame_y_;
};

// User phase from a callable; derivatives by finite differences.
class CallablePhase : public PhaseFunction {
 public:
  using Fn = std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)>;
  CallablePhase(std::string name, int d, Fn fn, Box domain_x, Box domain_y);
  double eval(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const override;

 private:
  Fn fn_;
};

// Map u -> c + A u + 1/2 Q[u, u] with Q symmetric in its two lower indices.
struct QuadraticMap {
  Eigen::VectorXd offset;
  Eigen::MatrixXd linear;
  std::vector<Eigen::MatrixXd> quadratic;  // quadratic[a](i, j); empty means affine

  static QuadraticMap affine(Eigen::VectorXd offset, Eigen::MatrixXd linear);
  int dim() const { return static_cast<int>(offset.size()); }
  Eigen::VectorXd operator()(const Eigen::VectorXd& u) const;
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& u) const;
};

// psi(G_L(x), G_R(y)), optionally minus psi(G_L(0), G_R(y)). Exact jets by the chain rule.
class PulledBackPhase : public PhaseFunction {
 public:
  PulledBackPhase(PhasePtr base, QuadraticMap left, QuadraticMap right, bool subtract_y_slice,
                  std::string name = {});
  double eval(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const override;
  Jet jet(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int order) const override;
  bool closed_form() const override { return base_->closed_form(); }

  const PhaseFunction& base() const { return *base_; }
  const QuadraticMap& left() const { return left_; }
  const QuadraticMap& right() const { return right_; }

 private:
  Jet composed_jet(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int order) const;

  PhasePtr base_;
  QuadraticMap left_, right_;
  bool subtract_y_slice_;
};

// Built-ins by name: model_fold, one_sided_fold, curve_avg, circle_extension,
// sphere_extension, dot_product.
PhasePtr make_phase(const std::string& name, int d, const Params& params = {});
std::vector<std::string> builtin_phase_names();

}  // namespace oscillab
