#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

#include "oscillab/phase.hpp"

namespace oscillab {

struct CorankError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NoRootError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct AmbiguousRootError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FoldDegeneracyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Verdict { Pass, Fail, NotApplicable };
const char* to_string(Verdict v);

struct GeometryTolerances {
  double det_tol = 1e-8;        // |det phi_xy| below this counts as on the fold
  double margin = 1e-4;         // nonvanishing threshold
  double corank_tol = 1e-8;     // relative singular-value floor for corank 1
};

struct FoldReport {
  Eigen::VectorXd x, y;
  double det_value = 0.0;
  Verdict left_fold = Verdict::NotApplicable;   // <b, grad_y> det != 0
  Verdict right_fold = Verdict::NotApplicable;  // <a, grad_x> det != 0
  Verdict curvature = Verdict::NotApplicable;   // second fundamental form of L_x definite
  Eigen::VectorXd a;  // cokernel: a^T phi_xy = 0
  Eigen::VectorXd b;  // kernel: phi_xy b = 0
  double left_quantity = 0.0;   // a^T (d_b phi_xy) b
  double right_quantity = 0.0;  // a^T (d_a phi_xy) b, derivative in x
  double det_derivative_y = 0.0;  // <b, grad_y> det phi_xy
  double det_derivative_x = 0.0;  // <a, grad_x> det phi_xy
  double margin = 0.0;            // smallest tested nonvanishing quantity
};

struct CurvatureReport {
  Verdict verdict = Verdict::NotApplicable;
  double margin = 0.0;   // min |eigenvalue| over all sampled points
  int points = 0;        // fold points tested
  int skipped = 0;       // y' samples with no fold root in the bracket
  int min_rank = 0;      // smallest number of eigenvalues above threshold
  int max_rank = 0;
  bool consistent_sign = true;  // all nonzero eigenvalues share one sign everywhere
};

// Unit vectors spanning kernel and cokernel of the mixed Hessian (smallest singular direction,
// first nonzero component made positive).
void fold_directions(const Eigen::MatrixXd& mixed, Eigen::VectorXd& a, Eigen::VectorXd& b);

FoldReport check_fold_conditions(const PhaseFunction& phase, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& y, const GeometryTolerances& tol = {});

// Solves det phi_xy(x, y) = 0 for the fold coordinate of y inside [lo, hi].
double solve_fold_surface(const PhaseFunction& phase, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& y_prime, double lo, double hi);

// Closed form when available, otherwise solve_fold_surface.
double fold_coordinate(const PhaseFunction& phase, const Eigen::VectorXd& x,
                       const Eigen::VectorXd& y_prime, double lo, double hi);

Eigen::VectorXd insert_fold_coordinate(const PhaseFunction& phase, const Eigen::VectorXd& y_prime,
                                       double value);
Eigen::VectorXd remove_fold_coordinate(const PhaseFunction& phase, const Eigen::VectorXd& y);

// Second fundamental form of L_x at a fold point, in the y' parametrization.
Eigen::MatrixXd fold_surface_curvature(const PhaseFunction& phase, const Eigen::VectorXd& x,
                                       const Eigen::VectorXd& y);

CurvatureReport check_curvature_condition(const PhaseFunction& phase, const Eigen::VectorXd& x,
                                          const Box& y_box, int samples,
                                          const GeometryTolerances& tol = {});

struct NormalFormQuantity {
  std::string name;
  double value;
  bool must_vanish;
};

struct NormalForm {
  Eigen::VectorXd x0, y0;
  QuadraticMap left, right;  // x = G_L(u), y = G_R(v)
  Eigen::MatrixXd rotation_left, rotation_right;
  Eigen::VectorXd alpha, beta;
  Eigen::MatrixXd B;
  PhasePtr phase;  // psi(G_L(u), G_R(v)) - psi(G_L(0), G_R(v))
  std::vector<NormalFormQuantity> quantities;

  double max_vanishing_residual() const;
  double min_nonzero_quantity() const;
  bool ok(double vanish_tol = 1e-8, double nonzero_tol = 1e-4) const;
};

NormalForm normalize_phase_at_point(PhasePtr phase, const Eigen::VectorXd& x0,
                                    const Eigen::VectorXd& y0, const GeometryTolerances& tol = {});

// Quantities of the normal form conditions evaluated at the origin of `phase`.
std::vector<NormalFormQuantity> normal_form_quantities(const PhaseFunction& phase);

}  // namespace oscillab
