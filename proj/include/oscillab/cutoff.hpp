#pragma once

#include <Eigen/Dense>

#include <string>

#include "oscillab/box.hpp"
#include "oscillab/grid.hpp"

namespace oscillab {

// C-infinity step: 0 for s <= 0, 1 for s >= 1, exp(-1/s) blend in between.
double smooth_step(double s);

enum class BumpKind { Exponential, Plateau };

// Even bump on [-1, 1]. Exponential: exp(1 - 1/(1 - t^2)). Plateau: 1 on |t| <= flat, smooth
// decay to 0 at |t| = 1.
struct Bump {
  BumpKind kind = BumpKind::Plateau;
  double flat = 0.8;

  double operator()(double t) const;
};

BumpKind parse_bump_kind(const std::string& name);
std::string to_string(BumpKind kind);

// chi(x, y) = scale * prod_a bump((x_a - c_a) / r_a) * prod_a bump((y_a - c_a) / r_a), with
// centers and half-sides taken from the two boxes.
struct TensorCutoff {
  Box x_box, y_box;
  Bump bump;
  double scale = 1.0;

  double x_factor(const Eigen::VectorXd& x) const;
  double y_factor(const Eigen::VectorXd& y) const;
  double operator()(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
    return scale * x_factor(x) * y_factor(y);
  }
  // Factors sampled on grid nodes; scale is folded into the x weights.
  Eigen::VectorXd x_weights(const GridSpec& grid) const;
  Eigen::VectorXd y_weights(const GridSpec& grid) const;
  // Per-axis factors of the y (or x) weights.
  Eigen::VectorXd axis_weights(const GridSpec& grid, const Box& box, int axis) const;
};

// psi = 1 on [-1, 1], supp psi in [-2, 2]; annular pieces psi(2^l t) - psi(2^{l+1} t).
struct DyadicCutoffFamily {
  int L_max = 1;

  static double psi(double t);
  // Piece l; a positive inner_scale replaces 2^{l+1} in the second term.
  static double piece(int l, double t, double inner_scale = 0.0);
  double core(double t) const;  // psi(2^{L_max} t)
  // sum_{l < L_max} piece(l, t) + core(t), equal to psi(t) by telescoping.
  double partition_sum(double t) const;
};

DyadicCutoffFamily dyadic_cutoff(int L_max);

}  // namespace oscillab
