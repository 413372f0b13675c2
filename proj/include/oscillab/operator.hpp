#pragma once

#include <Eigen/Dense>

#include <complex>
#include <memory>
#include <string>
#include <vector>

#include "oscillab/cutoff.hpp"
#include "oscillab/grid.hpp"
#include "oscillab/phase.hpp"

namespace oscillab {

using cd = std::complex<double>;

constexpr double kDefaultDenseCap = 4e7;  // kernel entries

enum class LocalizationKind { None, Level, NearFold };

// Factor multiplying the kernel as a function of t = y_fold - g(x, y').
struct Localization {
  LocalizationKind kind = LocalizationKind::None;
  int level = 0;
  double inner_scale = 0.0;  // Level only: replaces 2^{l+1}; used to stop the last piece at lambda^{1/3}

  static Localization none() { return {}; }
  static Localization at_level(int l, double inner = 0.0) {
    return {LocalizationKind::Level, l, inner};
  }
  static Localization near_fold() { return {LocalizationKind::NearFold, 0, 0.0}; }

  double weight(double t, double lambda) const;
  std::string describe() const;
};

// Levels 2^l < lambda^{1/3} (last one stopped at lambda^{1/3}) followed by the near-fold piece;
// their weights sum to psi(t) exactly.
std::vector<Localization> decomposition_pieces(double lambda);

struct OperatorConfig {
  PhasePtr phase;
  double lambda = 1.0;
  TensorCutoff cutoff;
  Localization localization;

  void validate() const;
};

// Cutoff over the given boxes with the default plateau bump.
OperatorConfig make_config(PhasePtr phase, double lambda, const Box& x_box, const Box& y_box,
                           Bump bump = {}, Localization loc = {});

// Signed distance t = y_fold - g(x, y') at grid nodes. Closed-form g is evaluated directly;
// otherwise g is solved once per (x node, y' node) and stored. Missing roots give NaN.
class FoldDistance {
 public:
  FoldDistance(const PhaseFunction& phase, const GridSpec& x_grid, const GridSpec& y_grid,
               double cap = kDefaultDenseCap);
  double operator()(Eigen::Index ix, const Eigen::VectorXd& x, Eigen::Index iy,
                    const Eigen::VectorXd& y) const;

 private:
  const PhaseFunction& phase_;
  GridSpec y_grid_;
  int axis_;
  bool closed_;
  Eigen::Index y_prime_count_ = 0;
  Eigen::VectorXd table_;
  Eigen::Index y_prime_index(Eigen::Index iy) const;
  Eigen::VectorXd y_prime(const Eigen::VectorXd& y) const;
};

// Discretized T: (T f)_j = sum_k K(x_j, y_k) f_k * cell_volume(y). The adjoint is taken with
// respect to <u, v> = sum u conj(v) * cell_volume on each grid.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;
  virtual const GridSpec& x_grid() const = 0;
  virtual const GridSpec& y_grid() const = 0;
  virtual Eigen::VectorXcd apply(const Eigen::VectorXcd& f) const = 0;
  virtual Eigen::VectorXcd adjoint(const Eigen::VectorXcd& u) const = 0;
  virtual std::string method() const = 0;

  DiscreteFunction apply(const DiscreteFunction& f) const;
  DiscreteFunction adjoint(const DiscreteFunction& u) const;

 protected:
  void check_input(Eigen::Index size, const GridSpec& grid, const char* what) const;
};

using OperatorPtr = std::shared_ptr<const LinearOperator>;

// Reference summation in fixed lexicographic order, parallel over output nodes.
class DirectOperator : public LinearOperator {
 public:
  DirectOperator(OperatorConfig config, GridSpec x_grid, GridSpec y_grid);

  const GridSpec& x_grid() const override { return x_grid_; }
  const GridSpec& y_grid() const override { return y_grid_; }
  Eigen::VectorXcd apply(const Eigen::VectorXcd& f) const override;
  Eigen::VectorXcd adjoint(const Eigen::VectorXcd& u) const override;
  std::string method() const override { return "direct"; }

  // K(x_j, y_k) including cutoff and localization, without the cell volume.
  cd kernel(Eigen::Index j, Eigen::Index k) const;
  const OperatorConfig& config() const { return config_; }

 private:
  OperatorConfig config_;
  GridSpec x_grid_, y_grid_;
  Eigen::VectorXd ax_, by_;
  std::vector<Eigen::VectorXd> x_pts_, y_pts_;
  std::unique_ptr<FoldDistance> fold_;
};

DiscreteFunction apply_operator(const OperatorConfig& config, const DiscreteFunction& f,
                                const GridSpec& x_grid);
DiscreteFunction apply_adjoint(const OperatorConfig& config, const DiscreteFunction& g,
                               const GridSpec& y_grid);

// Matrix M with (T f) = M f. The adjoint matrix is (cell_x / cell_y) M^H.
Eigen::MatrixXcd assemble_dense(const OperatorConfig& config, const GridSpec& x_grid,
                                const GridSpec& y_grid, double cap = kDefaultDenseCap);
Eigen::MatrixXcd assemble_dense(const LinearOperator& op, double cap = kDefaultDenseCap);

// Largest singular value of T between the weighted L^2 spaces, from a dense matrix of T.
double dense_operator_norm(const Eigen::MatrixXcd& M, double cell_x, double cell_y);

}  // namespace oscillab
