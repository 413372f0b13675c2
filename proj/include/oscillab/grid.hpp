#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "oscillab/box.hpp"
#include "oscillab/phase.hpp"

namespace oscillab {

struct CapacityError : std::runtime_error {
  CapacityError(const std::string& what, double required_)
      : std::runtime_error(what), required(required_) {}
  double required;  // entries or points the request would have needed
};

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

constexpr double kDefaultGridCap = 6e7;  // grid points per grid
constexpr int kMinPointsPerAxis = 16;

// Tensor-product composite midpoint grid. Node i on axis a sits at lo_a + (i + 1/2) h_a;
// flat indices are row-major (last axis fastest).
struct GridSpec {
  Box box;
  std::vector<int> counts;
  double K = 6.0;

  int dim() const { return static_cast<int>(counts.size()); }
  double spacing(int axis) const { return (box.hi[axis] - box.lo[axis]) / counts[axis]; }
  double cell_volume() const;
  Eigen::Index size() const;
  int points_per_dim() const;
  double coord(int axis, int i) const { return box.lo[axis] + (i + 0.5) * spacing(axis); }
  Eigen::VectorXd axis(int a) const;
  Eigen::VectorXd point(Eigen::Index flat) const;
  std::vector<int> unravel(Eigen::Index flat) const;
  Eigen::Index ravel(const std::vector<int>& idx) const;
  bool same_nodes(const GridSpec& other, double rel_tol = 1e-12) const;
};

// Points per axis: max(16, ceil(K lambda side_a sup_a / (2 pi))).
std::vector<int> required_counts(const Box& box, double lambda, const Eigen::VectorXd& axis_sup,
                                 double K);

GridSpec build_grid(const Box& box, double lambda, const Eigen::VectorXd& axis_sup, double K = 6.0,
                    double cap = kDefaultGridCap);

enum class GridSide { X, Y };

struct DerivativeBounds {
  Eigen::VectorXd x_sup;  // sup |d_{x_a} phi| over the box pair
  Eigen::VectorXd y_sup;  // sup |d_{y_a} phi|
};

// Sampled sup of first partials over x_box x y_box (samples per axis, endpoints included).
DerivativeBounds derivative_bounds(const PhaseFunction& phase, const Box& x_box, const Box& y_box,
                                   int samples = 7);

// Grid on `box` for the variable `side`, resolving lambda * phi against `partner` boxes.
GridSpec build_grid(const Box& box, double lambda, const PhaseFunction& phase, const Box& partner,
                    GridSide side, double K = 6.0, double cap = kDefaultGridCap);

// Grid with prescribed spacing per axis covering `box` (same center, n_a = ceil(side_a / h_a)).
GridSpec covering_grid(const Box& box, const Eigen::VectorXd& spacing, double K = 6.0,
                       double cap = kDefaultGridCap);

template <class Scalar>
struct GridFunction {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  GridSpec grid;
  Vector values;

  GridFunction() = default;
  explicit GridFunction(GridSpec g) : grid(std::move(g)), values(Vector::Zero(grid.size())) {}
  GridFunction(GridSpec g, Vector v) : grid(std::move(g)), values(std::move(v)) {
    if (values.size() != grid.size())
      throw ShapeError("grid function has " + std::to_string(values.size()) +
                       " values for a grid of " + std::to_string(grid.size()) + " points");
  }

  template <class Fn>
  static GridFunction sample(const GridSpec& g, Fn&& fn) {
    GridFunction out(g);
    for (Eigen::Index k = 0; k < g.size(); ++k) out.values[k] = fn(g.point(k));
    return out;
  }

  Eigen::Index size() const { return values.size(); }
};

using DiscreteFunction = GridFunction<std::complex<double>>;
using RealGridFunction = GridFunction<double>;

}  // namespace oscillab
