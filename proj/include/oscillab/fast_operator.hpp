#pragma once

#include <Eigen/Dense>

#include <memory>
#include <vector>

#include "oscillab/operator.hpp"

namespace oscillab {

// out[i] = sum_j k[i - j + ny - 1] v[j] for i < nx, j < ny, by zero-padded FFT convolution.
class ToeplitzConvolver {
 public:
  ToeplitzConvolver() = default;
  ToeplitzConvolver(const Eigen::VectorXcd& kernel, int nx, int ny);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int fft_size() const { return n_; }

  struct Workspace;
  std::unique_ptr<Workspace> workspace() const;

  // Strided input/output so rows and columns of row-major arrays can be processed in place.
  void apply(const cd* v, std::ptrdiff_t v_stride, cd* out, std::ptrdiff_t out_stride,
             Workspace& ws) const;
  void adjoint(const cd* u, std::ptrdiff_t u_stride, cd* out, std::ptrdiff_t out_stride,
               Workspace& ws) const;

 private:
  int nx_ = 0, ny_ = 0, n_ = 0;
  std::vector<cd> spectrum_;  // FFT of the wrapped kernel
  void run(const cd* in, std::ptrdiff_t in_stride, int n_in, cd* out, std::ptrdiff_t out_stride,
           int n_out, bool conjugate, Workspace& ws) const;
};

// d = 1 phases depending on x - y only (the circle phase): one Toeplitz convolution.
// Requires equal x and y spacing; localization is included in the kernel.
class ToeplitzOperator1D : public LinearOperator {
 public:
  ToeplitzOperator1D(OperatorConfig config, GridSpec x_grid, GridSpec y_grid);

  const GridSpec& x_grid() const override { return x_grid_; }
  const GridSpec& y_grid() const override { return y_grid_; }
  Eigen::VectorXcd apply(const Eigen::VectorXcd& f) const override;
  Eigen::VectorXcd adjoint(const Eigen::VectorXcd& u) const override;
  std::string method() const override { return "fft-toeplitz"; }

 private:
  OperatorConfig config_;
  GridSpec x_grid_, y_grid_;
  Eigen::VectorXd ax_, by_;
  ToeplitzConvolver conv_;
};

// Model fold phase in d = 2: Toeplitz convolution in (x2, y2), the x2 y1^2 twist, and a chirp
// factorization of exp(i lambda x1 y1) as a Toeplitz convolution in (x1, y1).
class ModelFoldOperator2D : public LinearOperator {
 public:
  ModelFoldOperator2D(OperatorConfig config, GridSpec x_grid, GridSpec y_grid);

  const GridSpec& x_grid() const override { return x_grid_; }
  const GridSpec& y_grid() const override { return y_grid_; }
  Eigen::VectorXcd apply(const Eigen::VectorXcd& f) const override;
  Eigen::VectorXcd adjoint(const Eigen::VectorXcd& u) const override;
  std::string method() const override { return "fft-model-fold"; }

 private:
  OperatorConfig config_;
  GridSpec x_grid_, y_grid_;
  Eigen::VectorXd ax_, by_;
  ToeplitzConvolver conv1_, conv2_;
  Eigen::VectorXcd chirp_x1_, chirp_y1_;
  Eigen::VectorXd x2_, y1sq_;
  cd twist(int iy1, int ix2) const { return std::polar(1.0, config_.lambda * x2_[ix2] * y1sq_[iy1]); }
};

// Curve averaging phase y2 (x2 + s^2/2) + y3 (x3 + s^3/6), s = x1 - y1: for each x1 the y1 sum
// is done directly and the (y2, y3) -> (x2, x3) part is two dense exponential matrix products.
class CurveAveragingOperator : public LinearOperator {
 public:
  CurveAveragingOperator(OperatorConfig config, GridSpec x_grid, GridSpec y_grid);

  const GridSpec& x_grid() const override { return x_grid_; }
  const GridSpec& y_grid() const override { return y_grid_; }
  Eigen::VectorXcd apply(const Eigen::VectorXcd& f) const override;
  Eigen::VectorXcd adjoint(const Eigen::VectorXcd& u) const override;
  std::string method() const override { return "separable-curve"; }

 private:
  OperatorConfig config_;
  GridSpec x_grid_, y_grid_;
  Eigen::VectorXd ax_, by_;
  Eigen::MatrixXcd F2_, F3_;  // exp(i lambda x2 y2), exp(i lambda x3 y3)
  Eigen::VectorXd x1_, y1_, y2_, y3_;
  // Slice weights exp(i lambda (y2 s^2/2 + y3 s^3/6)) * localization, as a Ny2 x Ny3 matrix.
  void slice(int ix1, int iy1, Eigen::MatrixXcd& W) const;
};

enum class OperatorMethod { Auto, Direct, Fast };

// True if a fast applier exists for this phase (circle, model fold d = 2, curve averaging).
bool has_fast_operator(const PhaseFunction& phase);

// Builds x and y grids for the config (matched spacings where the fast applier needs them)
// and the operator. Auto picks the fast applier when one exists.
OperatorPtr make_operator(const OperatorConfig& config, double K = 6.0,
                          OperatorMethod method = OperatorMethod::Auto,
                          double cap = kDefaultGridCap);

// Same operator type as make_operator would choose, on prescribed grids.
OperatorPtr make_operator_on(const OperatorConfig& config, const GridSpec& x_grid,
                             const GridSpec& y_grid, OperatorMethod method = OperatorMethod::Auto);

}  // namespace oscillab
