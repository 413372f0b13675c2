#pragma once

#include <Eigen/Dense>

namespace oscillab {

// Axis-aligned box [lo, hi] in R^d.
struct Box {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  Box() = default;
  Box(Eigen::VectorXd lo_, Eigen::VectorXd hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {}

  static Box centered(const Eigen::VectorXd& center, const Eigen::VectorXd& side) {
    return Box(center - 0.5 * side, center + 0.5 * side);
  }
  static Box cube(int d, double half) {
    return Box(Eigen::VectorXd::Constant(d, -half), Eigen::VectorXd::Constant(d, half));
  }

  int dim() const { return static_cast<int>(lo.size()); }
  Eigen::VectorXd center() const { return 0.5 * (lo + hi); }
  Eigen::VectorXd side() const { return hi - lo; }
  double volume() const { return side().prod(); }

  bool contains(const Eigen::VectorXd& p, double slack = 0.0) const {
    for (int i = 0; i < dim(); ++i)
      if (p[i] < lo[i] - slack || p[i] > hi[i] + slack) return false;
    return true;
  }
  bool contains(const Box& other) const {
    return (other.lo.array() >= lo.array()).all() && (other.hi.array() <= hi.array()).all();
  }
};

}  // namespace oscillab
