#include "oscillab/cutoff.hpp"

#include <cmath>
#include <stdexcept>

namespace oscillab {

namespace {

double h(double s) { return s > 0 ? std::exp(-1.0 / s) : 0.0; }

}  // namespace

double smooth_step(double s) {
  if (s <= 0) return 0.0;
  if (s >= 1) return 1.0;
  const double a = h(s), b = h(1.0 - s);
  return a / (a + b);
}

double Bump::operator()(double t) const {
  t = std::abs(t);
  if (t >= 1.0) return 0.0;
  if (kind == BumpKind::Exponential) return std::exp(1.0 - 1.0 / (1.0 - t * t));
  if (t <= flat) return 1.0;
  return smooth_step((1.0 - t) / (1.0 - flat));
}

BumpKind parse_bump_kind(const std::string& name) {
  if (name == "plateau") return BumpKind::Plateau;
  if (name == "exponential") return BumpKind::Exponential;
  throw std::invalid_argument("unknown bump kind '" + name + "' (plateau, exponential)");
}

std::string to_string(BumpKind kind) {
  return kind == BumpKind::Plateau ? "plateau" : "exponential";
}

namespace {

double box_factor(const Bump& bump, const Box& box, const Eigen::VectorXd& p) {
  double v = 1.0;
  for (int a = 0; a < box.dim() && v != 0.0; ++a) {
    const double half = 0.5 * (box.hi[a] - box.lo[a]);
    v *= bump((p[a] - 0.5 * (box.hi[a] + box.lo[a])) / half);
  }
  return v;
}

Eigen::VectorXd grid_factor(const Bump& bump, const Box& box, const GridSpec& grid) {
  if (grid.dim() != box.dim()) throw ShapeError("cutoff box and grid dimensions differ");
  Eigen::VectorXd w(grid.size());
  for (Eigen::Index k = 0; k < grid.size(); ++k) w[k] = box_factor(bump, box, grid.point(k));
  return w;
}

}  // namespace

double TensorCutoff::x_factor(const Eigen::VectorXd& x) const { return box_factor(bump, x_box, x); }
double TensorCutoff::y_factor(const Eigen::VectorXd& y) const { return box_factor(bump, y_box, y); }

Eigen::VectorXd TensorCutoff::x_weights(const GridSpec& grid) const {
  return scale * grid_factor(bump, x_box, grid);
}
Eigen::VectorXd TensorCutoff::y_weights(const GridSpec& grid) const {
  return grid_factor(bump, y_box, grid);
}

Eigen::VectorXd TensorCutoff::axis_weights(const GridSpec& grid, const Box& box, int axis) const {
  const double half = 0.5 * (box.hi[axis] - box.lo[axis]);
  const double c = 0.5 * (box.hi[axis] + box.lo[axis]);
  Eigen::VectorXd w(grid.counts[axis]);
  for (int i = 0; i < grid.counts[axis]; ++i) w[i] = bump((grid.coord(axis, i) - c) / half);
  return w;
}

double DyadicCutoffFamily::psi(double t) {
  t = std::abs(t);
  if (t <= 1.0) return 1.0;
  if (t >= 2.0) return 0.0;
  return smooth_step(2.0 - t);
}

double DyadicCutoffFamily::piece(int l, double t, double inner_scale) {
  const double outer = std::ldexp(1.0, l);
  const double inner = inner_scale > 0 ? inner_scale : 2.0 * outer;
  return psi(outer * t) - psi(inner * t);
}

double DyadicCutoffFamily::core(double t) const { return psi(std::ldexp(1.0, L_max) * t); }

double DyadicCutoffFamily::partition_sum(double t) const {
  double s = core(t);
  for (int l = L_max - 1; l >= 0; --l) s += piece(l, t);
  return s;
}

DyadicCutoffFamily dyadic_cutoff(int L_max) {
  if (L_max < 1) throw std::invalid_argument("dyadic family needs L_max >= 1");
  return DyadicCutoffFamily{L_max};
}

}  // namespace oscillab
