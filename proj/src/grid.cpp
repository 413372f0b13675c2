#include "oscillab/grid.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace oscillab {

namespace {

constexpr double kTwoPi = 6.28318530717958647692;

void check_capacity(const std::vector<int>& counts, double cap) {
  double total = 1.0;
  for (int n : counts) total *= n;
  if (total > cap) {
    std::ostringstream msg;
    msg << "grid needs " << total << " points (";
    for (std::size_t a = 0; a < counts.size(); ++a) msg << (a ? " x " : "") << counts[a];
    msg << "), cap is " << cap;
    throw CapacityError(msg.str(), total);
  }
}

}  // namespace

double GridSpec::cell_volume() const {
  double v = 1.0;
  for (int a = 0; a < dim(); ++a) v *= spacing(a);
  return v;
}

Eigen::Index GridSpec::size() const {
  Eigen::Index n = 1;
  for (int c : counts) n *= c;
  return n;
}

int GridSpec::points_per_dim() const {
  return counts.empty() ? 0 : *std::max_element(counts.begin(), counts.end());
}

Eigen::VectorXd GridSpec::axis(int a) const {
  Eigen::VectorXd v(counts[a]);
  for (int i = 0; i < counts[a]; ++i) v[i] = coord(a, i);
  return v;
}

std::vector<int> GridSpec::unravel(Eigen::Index flat) const {
  std::vector<int> idx(counts.size());
  for (int a = dim() - 1; a >= 0; --a) {
    idx[a] = static_cast<int>(flat % counts[a]);
    flat /= counts[a];
  }
  return idx;
}

Eigen::Index GridSpec::ravel(const std::vector<int>& idx) const {
  Eigen::Index flat = 0;
  for (int a = 0; a < dim(); ++a) flat = flat * counts[a] + idx[a];
  return flat;
}

Eigen::VectorXd GridSpec::point(Eigen::Index flat) const {
  Eigen::VectorXd p(dim());
  for (int a = dim() - 1; a >= 0; --a) {
    p[a] = coord(a, static_cast<int>(flat % counts[a]));
    flat /= counts[a];
  }
  return p;
}

bool GridSpec::same_nodes(const GridSpec& other, double rel_tol) const {
  if (counts != other.counts) return false;
  for (int a = 0; a < dim(); ++a) {
    const double scale = std::max(1.0, std::abs(box.hi[a]) + std::abs(box.lo[a]));
    if (std::abs(box.lo[a] - other.box.lo[a]) > rel_tol * scale) return false;
    if (std::abs(box.hi[a] - other.box.hi[a]) > rel_tol * scale) return false;
  }
  return true;
}

std::vector<int> required_counts(const Box& box, double lambda, const Eigen::VectorXd& axis_sup,
                                 double K) {
  if (lambda < 0) throw std::invalid_argument("lambda must be nonnegative");
  if (K < 4) throw std::invalid_argument("resolution factor K must be at least 4");
  std::vector<int> counts(box.dim());
  for (int a = 0; a < box.dim(); ++a) {
    const double need = std::ceil(K * lambda * box.side()[a] * axis_sup[a] / kTwoPi - 1e-9);
    counts[a] = static_cast<int>(std::max<double>(kMinPointsPerAxis, std::min(need, 2e9)));
  }
  return counts;
}

GridSpec build_grid(const Box& box, double lambda, const Eigen::VectorXd& axis_sup, double K,
                    double cap) {
  GridSpec g{box, required_counts(box, lambda, axis_sup, K), K};
  check_capacity(g.counts, cap);
  return g;
}

DerivativeBounds derivative_bounds(const PhaseFunction& phase, const Box& x_box, const Box& y_box,
                                   int samples) {
  const int d = phase.dim();
  const int n = 2 * d;
  samples = std::max(2, samples);
  DerivativeBounds out{Eigen::VectorXd::Zero(d), Eigen::VectorXd::Zero(d)};
  std::vector<int> idx(n, 0);
  Eigen::VectorXd x(d), y(d);
  while (true) {
    for (int a = 0; a < d; ++a) {
      x[a] = x_box.lo[a] + x_box.side()[a] * idx[a] / (samples - 1);
      y[a] = y_box.lo[a] + y_box.side()[a] * idx[d + a] / (samples - 1);
    }
    const Jet j = phase.jet(x, y, 1);
    for (int a = 0; a < d; ++a) {
      out.x_sup[a] = std::max(out.x_sup[a], std::abs(j.grad[a]));
      out.y_sup[a] = std::max(out.y_sup[a], std::abs(j.grad[d + a]));
    }
    int k = n - 1;
    while (k >= 0 && ++idx[k] == samples) idx[k--] = 0;
    if (k < 0) break;
  }
  return out;
}

GridSpec build_grid(const Box& box, double lambda, const PhaseFunction& phase, const Box& partner,
                    GridSide side, double K, double cap) {
  const DerivativeBounds b = side == GridSide::X ? derivative_bounds(phase, box, partner)
                                                 : derivative_bounds(phase, partner, box);
  return build_grid(box, lambda, side == GridSide::X ? b.x_sup : b.y_sup, K, cap);
}

GridSpec covering_grid(const Box& box, const Eigen::VectorXd& spacing, double K, double cap) {
  GridSpec g;
  g.K = K;
  g.counts.resize(box.dim());
  Eigen::VectorXd side(box.dim());
  for (int a = 0; a < box.dim(); ++a) {
    if (!(spacing[a] > 0)) throw std::invalid_argument("grid spacing must be positive");
    const double n = std::max(1.0, std::ceil(box.side()[a] / spacing[a] - 1e-9));
    if (n > 2e9) throw CapacityError("axis needs more than 2e9 points", n);
    g.counts[a] = static_cast<int>(n);
    side[a] = g.counts[a] * spacing[a];
  }
  check_capacity(g.counts, cap);
  g.box = Box::centered(box.center(), side);
  return g;
}

}  // namespace oscillab
