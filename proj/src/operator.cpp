#include "oscillab/operator.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "oscillab/geometry.hpp"
#include "oscillab/parallel.hpp"

namespace oscillab {

double Localization::weight(double t, double lambda) const {
  switch (kind) {
    case LocalizationKind::None:
      return 1.0;
    case LocalizationKind::Level:
      return std::isnan(t) ? 0.0 : DyadicCutoffFamily::piece(level, t, inner_scale);
    case LocalizationKind::NearFold:
      return std::isnan(t) ? 0.0 : DyadicCutoffFamily::psi(std::cbrt(lambda) * t);
  }
  return 1.0;
}

std::string Localization::describe() const {
  std::ostringstream s;
  switch (kind) {
    case LocalizationKind::None:
      s << "none";
      break;
    case LocalizationKind::Level:
      s << "level " << level;
      if (inner_scale > 0) s << " (inner " << inner_scale << ")";
      break;
    case LocalizationKind::NearFold:
      s << "near-fold";
      break;
  }
  return s.str();
}

std::vector<Localization> decomposition_pieces(double lambda) {
  if (lambda < 1) throw std::invalid_argument("decomposition needs lambda >= 1");
  const double top = std::cbrt(lambda);
  std::vector<Localization> out;
  for (int l = 0; std::ldexp(1.0, l) < top; ++l) {
    const bool last = !(std::ldexp(1.0, l + 1) < top);
    out.push_back(Localization::at_level(l, last ? top : 0.0));
  }
  out.push_back(Localization::near_fold());
  return out;
}

void OperatorConfig::validate() const {
  if (!phase) throw std::invalid_argument("operator config has no phase");
  if (!(lambda >= 0) || !std::isfinite(lambda))
    throw std::invalid_argument("lambda must be finite and nonnegative");
  const int d = phase->dim();
  if (cutoff.x_box.dim() != d || cutoff.y_box.dim() != d)
    throw ShapeError("cutoff boxes do not match the phase dimension");
  if (!(cutoff.scale > 0)) throw std::invalid_argument("cutoff scale must be positive");
  if (localization.kind == LocalizationKind::Level) {
    if (localization.level < 0) throw std::invalid_argument("localization level must be >= 0");
    if (std::ldexp(1.0, localization.level) > std::cbrt(lambda) * (1 + 1e-12))
      throw std::invalid_argument("localization level " + std::to_string(localization.level) +
                                  " exceeds lambda^(1/3)");
    if (localization.inner_scale > 0 &&
        localization.inner_scale <= std::ldexp(1.0, localization.level))
      throw std::invalid_argument("inner scale must exceed 2^l");
  }
}

OperatorConfig make_config(PhasePtr phase, double lambda, const Box& x_box, const Box& y_box,
                           Bump bump, Localization loc) {
  OperatorConfig c;
  c.phase = std::move(phase);
  c.lambda = lambda;
  c.cutoff.x_box = x_box;
  c.cutoff.y_box = y_box;
  c.cutoff.bump = bump;
  c.localization = loc;
  c.validate();
  return c;
}

FoldDistance::FoldDistance(const PhaseFunction& phase, const GridSpec& x_grid,
                           const GridSpec& y_grid, double cap)
    : phase_(phase), y_grid_(y_grid), axis_(phase.fold_axis()) {
  const Eigen::VectorXd x0 = x_grid.point(0), y0 = y_grid.point(0);
  closed_ = phase.fold_closed_form(x0, y_prime(y0)).has_value();
  if (closed_) return;
  y_prime_count_ = y_grid.size() / y_grid.counts[axis_];
  const double entries = static_cast<double>(x_grid.size()) * y_prime_count_;
  if (entries > cap) throw CapacityError("fold table needs too many entries", entries);
  table_.resize(x_grid.size() * y_prime_count_);
  const double lo = y_grid.box.lo[axis_], hi = y_grid.box.hi[axis_];
  parallel_for(0, x_grid.size(), [&](std::ptrdiff_t ix) {
    const Eigen::VectorXd x = x_grid.point(ix);
    std::vector<int> idx(y_grid.dim(), 0);
    for (Eigen::Index p = 0; p < y_prime_count_; ++p) {
      Eigen::Index rest = p;
      for (int a = y_grid.dim() - 1; a >= 0; --a) {
        if (a == axis_) continue;
        idx[a] = static_cast<int>(rest % y_grid.counts[a]);
        rest /= y_grid.counts[a];
      }
      const Eigen::VectorXd yp = y_prime(y_grid.point(y_grid.ravel(idx)));
      double g = std::numeric_limits<double>::quiet_NaN();
      try {
        g = solve_fold_surface(phase_, x, yp, lo, hi);
      } catch (const NoRootError&) {
      } catch (const AmbiguousRootError&) {
      }
      table_[ix * y_prime_count_ + p] = g;
    }
  });
}

Eigen::VectorXd FoldDistance::y_prime(const Eigen::VectorXd& y) const {
  Eigen::VectorXd yp(y.size() - 1);
  for (int a = 0, b = 0; a < y.size(); ++a)
    if (a != axis_) yp[b++] = y[a];
  return yp;
}

Eigen::Index FoldDistance::y_prime_index(Eigen::Index iy) const {
  const std::vector<int> idx = y_grid_.unravel(iy);
  Eigen::Index p = 0;
  for (int a = 0; a < y_grid_.dim(); ++a)
    if (a != axis_) p = p * y_grid_.counts[a] + idx[a];
  return p;
}

double FoldDistance::operator()(Eigen::Index ix, const Eigen::VectorXd& x, Eigen::Index iy,
                                const Eigen::VectorXd& y) const {
  if (closed_) return y[axis_] - *phase_.fold_closed_form(x, y_prime(y));
  return y[axis_] - table_[ix * y_prime_count_ + y_prime_index(iy)];
}

DiscreteFunction LinearOperator::apply(const DiscreteFunction& f) const {
  if (!f.grid.same_nodes(y_grid())) throw ShapeError("input does not live on the operator's y grid");
  return DiscreteFunction(x_grid(), apply(f.values));
}

DiscreteFunction LinearOperator::adjoint(const DiscreteFunction& u) const {
  if (!u.grid.same_nodes(x_grid())) throw ShapeError("input does not live on the operator's x grid");
  return DiscreteFunction(y_grid(), adjoint(u.values));
}

void LinearOperator::check_input(Eigen::Index size, const GridSpec& grid, const char* what) const {
  if (size != grid.size())
    throw ShapeError(std::string(what) + ": expected " + std::to_string(grid.size()) +
                     " values, got " + std::to_string(size));
}

DirectOperator::DirectOperator(OperatorConfig config, GridSpec x_grid, GridSpec y_grid)
    : config_(std::move(config)), x_grid_(std::move(x_grid)), y_grid_(std::move(y_grid)) {
  config_.validate();
  const int d = config_.phase->dim();
  if (x_grid_.dim() != d || y_grid_.dim() != d) throw ShapeError("grid dimension mismatch");
  ax_ = config_.cutoff.x_weights(x_grid_);
  by_ = config_.cutoff.y_weights(y_grid_);
  x_pts_.reserve(x_grid_.size());
  y_pts_.reserve(y_grid_.size());
  for (Eigen::Index j = 0; j < x_grid_.size(); ++j) x_pts_.push_back(x_grid_.point(j));
  for (Eigen::Index k = 0; k < y_grid_.size(); ++k) y_pts_.push_back(y_grid_.point(k));
  if (config_.localization.kind != LocalizationKind::None)
    fold_ = std::make_unique<FoldDistance>(*config_.phase, x_grid_, y_grid_);
}

cd DirectOperator::kernel(Eigen::Index j, Eigen::Index k) const {
  const double amp = ax_[j] * by_[k];
  if (amp == 0.0) return 0.0;
  double loc = 1.0;
  if (fold_) {
    loc = config_.localization.weight((*fold_)(j, x_pts_[j], k, y_pts_[k]), config_.lambda);
    if (loc == 0.0) return 0.0;
  }
  const double theta = config_.lambda * config_.phase->eval(x_pts_[j], y_pts_[k]);
  return std::polar(amp * loc, theta);
}

Eigen::VectorXcd DirectOperator::apply(const Eigen::VectorXcd& f) const {
  check_input(f.size(), y_grid_, "apply");
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(x_grid_.size());
  const double w = y_grid_.cell_volume();
  parallel_for(0, x_grid_.size(), [&](std::ptrdiff_t j) {
    if (ax_[j] == 0.0) return;
    cd s = 0.0;
    for (Eigen::Index k = 0; k < y_grid_.size(); ++k)
      if (f[k] != 0.0) s += kernel(j, k) * f[k];
    out[j] = s * w;
  });
  return out;
}

Eigen::VectorXcd DirectOperator::adjoint(const Eigen::VectorXcd& u) const {
  check_input(u.size(), x_grid_, "adjoint");
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(y_grid_.size());
  const double w = x_grid_.cell_volume();
  parallel_for(0, y_grid_.size(), [&](std::ptrdiff_t k) {
    if (by_[k] == 0.0) return;
    cd s = 0.0;
    for (Eigen::Index j = 0; j < x_grid_.size(); ++j)
      if (u[j] != 0.0) s += std::conj(kernel(j, k)) * u[j];
    out[k] = s * w;
  });
  return out;
}

DiscreteFunction apply_operator(const OperatorConfig& config, const DiscreteFunction& f,
                                const GridSpec& x_grid) {
  const DirectOperator op(config, x_grid, f.grid);
  return DiscreteFunction(x_grid, op.apply(f.values));
}

DiscreteFunction apply_adjoint(const OperatorConfig& config, const DiscreteFunction& g,
                               const GridSpec& y_grid) {
  const DirectOperator op(config, g.grid, y_grid);
  return DiscreteFunction(y_grid, op.adjoint(g.values));
}

namespace {

void check_dense_capacity(const GridSpec& x, const GridSpec& y, double cap) {
  const double entries = static_cast<double>(x.size()) * static_cast<double>(y.size());
  if (entries > cap) {
    std::ostringstream msg;
    msg << "dense kernel needs " << entries << " entries, cap is " << cap;
    throw CapacityError(msg.str(), entries);
  }
}

}  // namespace

Eigen::MatrixXcd assemble_dense(const OperatorConfig& config, const GridSpec& x_grid,
                                const GridSpec& y_grid, double cap) {
  check_dense_capacity(x_grid, y_grid, cap);
  const DirectOperator op(config, x_grid, y_grid);
  Eigen::MatrixXcd M(x_grid.size(), y_grid.size());
  const double w = y_grid.cell_volume();
  parallel_for(0, y_grid.size(), [&](std::ptrdiff_t k) {
    for (Eigen::Index j = 0; j < x_grid.size(); ++j) M(j, k) = op.kernel(j, k) * w;
  });
  return M;
}

Eigen::MatrixXcd assemble_dense(const LinearOperator& op, double cap) {
  check_dense_capacity(op.x_grid(), op.y_grid(), cap);
  const Eigen::Index n = op.y_grid().size();
  Eigen::MatrixXcd M(op.x_grid().size(), n);
  Eigen::VectorXcd e = Eigen::VectorXcd::Zero(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    e[k] = 1.0;
    M.col(k) = op.apply(e);
    e[k] = 0.0;
  }
  return M;
}

double dense_operator_norm(const Eigen::MatrixXcd& M, double cell_x, double cell_y) {
  const Eigen::MatrixXcd A = std::sqrt(cell_x / cell_y) * M;
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(A);
  return svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
}

}  // namespace oscillab
