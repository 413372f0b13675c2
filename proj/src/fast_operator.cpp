#include "oscillab/fast_operator.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "oscillab/parallel.hpp"

namespace oscillab {

namespace {

constexpr double kTwoPi = 6.28318530717958647692;

using RowMatrixXcd = Eigen::Matrix<cd, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Splits [0, count) into one contiguous chunk per worker; body(lo, hi) runs per chunk so
// it can own FFT plans and buffers.
template <class Body>
void parallel_chunks(std::ptrdiff_t count, Body&& body) {
  const std::ptrdiff_t workers = std::max<std::ptrdiff_t>(1, std::min<std::ptrdiff_t>(thread_count(), count));
  parallel_for(0, workers, [&](std::ptrdiff_t w) {
    body(count * w / workers, count * (w + 1) / workers);
  });
}

void require_matched(const GridSpec& x, const GridSpec& y, int axis, const char* who) {
  const double hx = x.spacing(axis), hy = y.spacing(axis);
  if (std::abs(hx - hy) > 1e-12 * std::max(hx, hy))
    throw ShapeError(std::string(who) + " needs equal x and y spacing on axis " +
                     std::to_string(axis));
}

}  // namespace

struct ToeplitzConvolver::Workspace {
  Eigen::FFT<double> fft;
  std::vector<cd> buf, spec;
};

ToeplitzConvolver::ToeplitzConvolver(const Eigen::VectorXcd& kernel, int nx, int ny)
    : nx_(nx), ny_(ny) {
  if (kernel.size() != nx + ny - 1) throw ShapeError("Toeplitz kernel length must be nx + ny - 1");
  n_ = 1;
  while (n_ < nx + ny - 1) n_ *= 2;
  std::vector<cd> wrapped(n_, 0.0);
  for (int m = -(ny - 1); m <= nx - 1; ++m) wrapped[(m + n_) % n_] = kernel[m + ny - 1];
  Eigen::FFT<double> fft;
  fft.fwd(spectrum_, wrapped);
}

std::unique_ptr<ToeplitzConvolver::Workspace> ToeplitzConvolver::workspace() const {
  auto ws = std::make_unique<Workspace>();
  ws->buf.assign(n_, 0.0);
  ws->spec.assign(n_, 0.0);
  return ws;
}

void ToeplitzConvolver::run(const cd* in, std::ptrdiff_t in_stride, int n_in, cd* out,
                            std::ptrdiff_t out_stride, int n_out, bool conjugate,
                            Workspace& ws) const {
  std::fill(ws.buf.begin(), ws.buf.end(), cd(0.0));
  for (int i = 0; i < n_in; ++i) ws.buf[i] = in[i * in_stride];
  ws.fft.fwd(ws.spec, ws.buf);
  if (conjugate)
    for (int k = 0; k < n_; ++k) ws.spec[k] *= std::conj(spectrum_[k]);
  else
    for (int k = 0; k < n_; ++k) ws.spec[k] *= spectrum_[k];
  ws.fft.inv(ws.buf, ws.spec);
  for (int i = 0; i < n_out; ++i) out[i * out_stride] = ws.buf[i];
}

void ToeplitzConvolver::apply(const cd* v, std::ptrdiff_t v_stride, cd* out,
                              std::ptrdiff_t out_stride, Workspace& ws) const {
  run(v, v_stride, ny_, out, out_stride, nx_, false, ws);
}

void ToeplitzConvolver::adjoint(const cd* u, std::ptrdiff_t u_stride, cd* out,
                                std::ptrdiff_t out_stride, Workspace& ws) const {
  run(u, u_stride, nx_, out, out_stride, ny_, true, ws);
}

ToeplitzOperator1D::ToeplitzOperator1D(OperatorConfig config, GridSpec x_grid, GridSpec y_grid)
    : config_(std::move(config)), x_grid_(std::move(x_grid)), y_grid_(std::move(y_grid)) {
  config_.validate();
  if (config_.phase->dim() != 1 || x_grid_.dim() != 1 || y_grid_.dim() != 1)
    throw ShapeError("Toeplitz operator is one-dimensional");
  require_matched(x_grid_, y_grid_, 0, "Toeplitz operator");
  ax_ = config_.cutoff.x_weights(x_grid_);
  by_ = config_.cutoff.y_weights(y_grid_);
  const int nx = x_grid_.counts[0], ny = y_grid_.counts[0];
  const bool localized = config_.localization.kind != LocalizationKind::None;
  std::unique_ptr<FoldDistance> fold;
  if (localized) fold = std::make_unique<FoldDistance>(*config_.phase, x_grid_, y_grid_);
  Eigen::VectorXd x(1), y(1);
  auto entry = [&](int i, int j) {
    x[0] = x_grid_.coord(0, i);
    y[0] = y_grid_.coord(0, j);
    const double loc =
        localized ? config_.localization.weight((*fold)(i, x, j, y), config_.lambda) : 1.0;
    return std::polar(loc, config_.lambda * config_.phase->eval(x, y));
  };
  Eigen::VectorXcd kernel(nx + ny - 1);
  for (int m = -(ny - 1); m <= nx - 1; ++m) {
    const int i = std::max(m, 0);
    kernel[m + ny - 1] = entry(i, i - m);
  }
  // The phase and fold distance must depend on x - y only.
  for (int probe = 0; probe < 16; ++probe) {
    const int i = (probe * 7919) % nx, j = (probe * 104729 + 3) % ny;
    if (std::abs(entry(i, j) - kernel[i - j + ny - 1]) > 1e-6)
      throw std::invalid_argument("phase '" + config_.phase->name() +
                                  "' is not translation invariant; use the direct operator");
  }
  conv_ = ToeplitzConvolver(kernel, nx, ny);
}

Eigen::VectorXcd ToeplitzOperator1D::apply(const Eigen::VectorXcd& f) const {
  check_input(f.size(), y_grid_, "apply");
  const Eigen::VectorXcd v = by_.cwiseProduct(f);
  Eigen::VectorXcd out(x_grid_.size());
  auto ws = conv_.workspace();
  conv_.apply(v.data(), 1, out.data(), 1, *ws);
  return out.cwiseProduct(ax_) * y_grid_.cell_volume();
}

Eigen::VectorXcd ToeplitzOperator1D::adjoint(const Eigen::VectorXcd& u) const {
  check_input(u.size(), x_grid_, "adjoint");
  const Eigen::VectorXcd v = ax_.cwiseProduct(u);
  Eigen::VectorXcd out(y_grid_.size());
  auto ws = conv_.workspace();
  conv_.adjoint(v.data(), 1, out.data(), 1, *ws);
  return out.cwiseProduct(by_) * x_grid_.cell_volume();
}

ModelFoldOperator2D::ModelFoldOperator2D(OperatorConfig config, GridSpec x_grid, GridSpec y_grid)
    : config_(std::move(config)), x_grid_(std::move(x_grid)), y_grid_(std::move(y_grid)) {
  config_.validate();
  if (!dynamic_cast<const ModelFoldPhase*>(config_.phase.get()) || config_.phase->dim() != 2)
    throw std::invalid_argument("model fold operator needs the model_fold phase with d = 2");
  require_matched(x_grid_, y_grid_, 0, "model fold operator");
  require_matched(x_grid_, y_grid_, 1, "model fold operator");
  ax_ = config_.cutoff.x_weights(x_grid_);
  by_ = config_.cutoff.y_weights(y_grid_);
  const double lam = config_.lambda;
  const int nx1 = x_grid_.counts[0], nx2 = x_grid_.counts[1];
  const int ny1 = y_grid_.counts[0], ny2 = y_grid_.counts[1];

  // Axis 2: exp(i lambda s^3/6) * loc(y2 - x2), s = x2 - y2; the fold is y2 = x2.
  Eigen::VectorXcd k2(nx2 + ny2 - 1);
  for (int m = -(ny2 - 1); m <= nx2 - 1; ++m) {
    const int i = std::max(m, 0), j = i - m;
    const double s = x_grid_.coord(1, i) - y_grid_.coord(1, j);
    k2[m + ny2 - 1] = std::polar(config_.localization.weight(-s, lam), lam * s * s * s / 6.0);
  }
  conv2_ = ToeplitzConvolver(k2, nx2, ny2);

  // Axis 1: exp(i lambda x1 y1) = chirp(x1) chirp(y1) exp(-i lambda (x1 - y1)^2 / 2).
  Eigen::VectorXcd k1(nx1 + ny1 - 1);
  for (int m = -(ny1 - 1); m <= nx1 - 1; ++m) {
    const int i = std::max(m, 0), j = i - m;
    const double s = x_grid_.coord(0, i) - y_grid_.coord(0, j);
    k1[m + ny1 - 1] = std::polar(1.0, -lam * s * s / 2.0);
  }
  conv1_ = ToeplitzConvolver(k1, nx1, ny1);
  chirp_x1_.resize(nx1);
  chirp_y1_.resize(ny1);
  for (int i = 0; i < nx1; ++i) chirp_x1_[i] = std::polar(1.0, lam * std::pow(x_grid_.coord(0, i), 2) / 2);
  for (int j = 0; j < ny1; ++j) chirp_y1_[j] = std::polar(1.0, lam * std::pow(y_grid_.coord(0, j), 2) / 2);
  x2_ = x_grid_.axis(1);
  y1sq_ = y_grid_.axis(0).array().square();
}

Eigen::VectorXcd ModelFoldOperator2D::apply(const Eigen::VectorXcd& f) const {
  check_input(f.size(), y_grid_, "apply");
  const int nx1 = x_grid_.counts[0], nx2 = x_grid_.counts[1];
  const int ny1 = y_grid_.counts[0], ny2 = y_grid_.counts[1];
  const Eigen::VectorXcd u = by_.cwiseProduct(f);
  Eigen::VectorXcd V(static_cast<Eigen::Index>(ny1) * nx2);
  parallel_chunks(ny1, [&](std::ptrdiff_t lo, std::ptrdiff_t hi) {
    auto ws = conv2_.workspace();
    for (std::ptrdiff_t r = lo; r < hi; ++r) {
      cd* row = V.data() + r * nx2;
      conv2_.apply(u.data() + r * ny2, 1, row, 1, *ws);
      for (int c = 0; c < nx2; ++c) row[c] *= twist(static_cast<int>(r), c) * chirp_y1_[r];
    }
  });
  Eigen::VectorXcd out(static_cast<Eigen::Index>(nx1) * nx2);
  parallel_chunks(nx2, [&](std::ptrdiff_t lo, std::ptrdiff_t hi) {
    auto ws = conv1_.workspace();
    for (std::ptrdiff_t c = lo; c < hi; ++c) conv1_.apply(V.data() + c, nx2, out.data() + c, nx2, *ws);
  });
  const double w = y_grid_.cell_volume();
  for (int i = 0; i < nx1; ++i)
    out.segment(static_cast<Eigen::Index>(i) * nx2, nx2) *= chirp_x1_[i] * w;
  return out.cwiseProduct(ax_);
}

Eigen::VectorXcd ModelFoldOperator2D::adjoint(const Eigen::VectorXcd& u) const {
  check_input(u.size(), x_grid_, "adjoint");
  const int nx1 = x_grid_.counts[0], nx2 = x_grid_.counts[1];
  const int ny1 = y_grid_.counts[0], ny2 = y_grid_.counts[1];
  Eigen::VectorXcd U = ax_.cwiseProduct(u);
  for (int i = 0; i < nx1; ++i)
    U.segment(static_cast<Eigen::Index>(i) * nx2, nx2) *= std::conj(chirp_x1_[i]);
  Eigen::VectorXcd W(static_cast<Eigen::Index>(ny1) * nx2);
  parallel_chunks(nx2, [&](std::ptrdiff_t lo, std::ptrdiff_t hi) {
    auto ws = conv1_.workspace();
    for (std::ptrdiff_t c = lo; c < hi; ++c) conv1_.adjoint(U.data() + c, nx2, W.data() + c, nx2, *ws);
  });
  Eigen::VectorXcd out(static_cast<Eigen::Index>(ny1) * ny2);
  parallel_chunks(ny1, [&](std::ptrdiff_t lo, std::ptrdiff_t hi) {
    auto ws = conv2_.workspace();
    for (std::ptrdiff_t r = lo; r < hi; ++r) {
      cd* row = W.data() + r * nx2;
      for (int c = 0; c < nx2; ++c) row[c] *= std::conj(twist(static_cast<int>(r), c) * chirp_y1_[r]);
      conv2_.adjoint(row, 1, out.data() + r * ny2, 1, *ws);
    }
  });
  return out.cwiseProduct(by_) * x_grid_.cell_volume();
}

CurveAveragingOperator::CurveAveragingOperator(OperatorConfig config, GridSpec x_grid,
                                               GridSpec y_grid)
    : config_(std::move(config)), x_grid_(std::move(x_grid)), y_grid_(std::move(y_grid)) {
  config_.validate();
  if (!dynamic_cast<const CurveAveragingPhase*>(config_.phase.get()))
    throw std::invalid_argument("curve averaging operator needs the curve_avg phase");
  ax_ = config_.cutoff.x_weights(x_grid_);
  by_ = config_.cutoff.y_weights(y_grid_);
  x1_ = x_grid_.axis(0);
  y1_ = y_grid_.axis(0);
  y2_ = y_grid_.axis(1);
  y3_ = y_grid_.axis(2);
  const double lam = config_.lambda;
  const Eigen::VectorXd x2 = x_grid_.axis(1), x3 = x_grid_.axis(2);
  F2_.resize(x2.size(), y2_.size());
  F3_.resize(x3.size(), y3_.size());
  for (int i = 0; i < x2.size(); ++i)
    for (int j = 0; j < y2_.size(); ++j) F2_(i, j) = std::polar(1.0, lam * x2[i] * y2_[j]);
  for (int i = 0; i < x3.size(); ++i)
    for (int j = 0; j < y3_.size(); ++j) F3_(i, j) = std::polar(1.0, lam * x3[i] * y3_[j]);
}

void CurveAveragingOperator::slice(int ix1, int iy1, Eigen::MatrixXcd& W) const {
  const double lam = config_.lambda;
  const double s = x1_[ix1] - y1_[iy1];
  const int n2 = static_cast<int>(y2_.size()), n3 = static_cast<int>(y3_.size());
  Eigen::VectorXcd p2(n2), p3(n3);
  for (int j = 0; j < n2; ++j) p2[j] = std::polar(1.0, lam * y2_[j] * s * s / 2.0);
  for (int k = 0; k < n3; ++k) p3[k] = std::polar(1.0, lam * y3_[k] * s * s * s / 6.0);
  W.noalias() = p2 * p3.transpose();
  if (config_.localization.kind == LocalizationKind::None) return;
  // Fold: y2 = -y3 s, so t = y2 + y3 s.
  for (int k = 0; k < n3; ++k)
    for (int j = 0; j < n2; ++j) W(j, k) *= config_.localization.weight(y2_[j] + y3_[k] * s, lam);
}

Eigen::VectorXcd CurveAveragingOperator::apply(const Eigen::VectorXcd& f) const {
  check_input(f.size(), y_grid_, "apply");
  const int nx1 = x_grid_.counts[0], nx2 = x_grid_.counts[1], nx3 = x_grid_.counts[2];
  const int ny1 = y_grid_.counts[0], ny2 = y_grid_.counts[1], ny3 = y_grid_.counts[2];
  const Eigen::VectorXcd u = by_.cwiseProduct(f);
  Eigen::VectorXcd out(x_grid_.size());
  const Eigen::Index ys = static_cast<Eigen::Index>(ny2) * ny3, xs = static_cast<Eigen::Index>(nx2) * nx3;
  parallel_chunks(nx1, [&](std::ptrdiff_t lo, std::ptrdiff_t hi) {
    Eigen::MatrixXcd W(ny2, ny3), H(ny2, ny3);
    for (std::ptrdiff_t i = lo; i < hi; ++i) {
      H.setZero();
      for (int j = 0; j < ny1; ++j) {
        slice(static_cast<int>(i), j, W);
        H += W.cwiseProduct(Eigen::Map<const RowMatrixXcd>(u.data() + j * ys, ny2, ny3));
      }
      Eigen::Map<RowMatrixXcd>(out.data() + i * xs, nx2, nx3).noalias() = F2_ * H * F3_.transpose();
    }
  });
  return out.cwiseProduct(ax_) * y_grid_.cell_volume();
}

Eigen::VectorXcd CurveAveragingOperator::adjoint(const Eigen::VectorXcd& u) const {
  check_input(u.size(), x_grid_, "adjoint");
  const int nx1 = x_grid_.counts[0], nx2 = x_grid_.counts[1], nx3 = x_grid_.counts[2];
  const int ny1 = y_grid_.counts[0], ny2 = y_grid_.counts[1], ny3 = y_grid_.counts[2];
  const Eigen::VectorXcd v = ax_.cwiseProduct(u);
  const Eigen::Index ys = static_cast<Eigen::Index>(ny2) * ny3, xs = static_cast<Eigen::Index>(nx2) * nx3;
  std::vector<Eigen::MatrixXcd> H(nx1);
  parallel_for(0, nx1, [&](std::ptrdiff_t i) {
    H[i] = F2_.adjoint() * Eigen::Map<const RowMatrixXcd>(v.data() + i * xs, nx2, nx3) * F3_.conjugate();
  });
  Eigen::VectorXcd out(y_grid_.size());
  parallel_chunks(ny1, [&](std::ptrdiff_t lo, std::ptrdiff_t hi) {
    Eigen::MatrixXcd W(ny2, ny3), S(ny2, ny3);
    for (std::ptrdiff_t j = lo; j < hi; ++j) {
      S.setZero();
      for (int i = 0; i < nx1; ++i) {
        slice(i, static_cast<int>(j), W);
        S += W.conjugate().cwiseProduct(H[i]);
      }
      Eigen::Map<RowMatrixXcd>(out.data() + j * ys, ny2, ny3) = S;
    }
  });
  return out.cwiseProduct(by_) * x_grid_.cell_volume();
}

bool has_fast_operator(const PhaseFunction& phase) {
  if (dynamic_cast<const CircleExtensionPhase*>(&phase)) return true;
  if (dynamic_cast<const ModelFoldPhase*>(&phase)) return phase.dim() == 2;
  return dynamic_cast<const CurveAveragingPhase*>(&phase) != nullptr;
}

namespace {

// Spacing resolving lambda * phi with K points per oscillation in both variables.
Eigen::VectorXd matched_spacing(const OperatorConfig& c, double K) {
  const Box& xb = c.cutoff.x_box;
  const Box& yb = c.cutoff.y_box;
  const DerivativeBounds b = derivative_bounds(*c.phase, xb, yb);
  const int d = c.phase->dim();
  Eigen::VectorXd h(d);
  for (int a = 0; a < d; ++a) {
    const double floor_h = std::min(xb.side()[a], yb.side()[a]) / kMinPointsPerAxis;
    const double rate = K * c.lambda * std::max(b.x_sup[a], b.y_sup[a]);
    h[a] = rate > 0 ? std::min(floor_h, kTwoPi / rate) : floor_h;
  }
  return h;
}

}  // namespace

OperatorPtr make_operator_on(const OperatorConfig& config, const GridSpec& x_grid,
                             const GridSpec& y_grid, OperatorMethod method) {
  const PhaseFunction& ph = *config.phase;
  if (method == OperatorMethod::Direct || (method == OperatorMethod::Auto && !has_fast_operator(ph)))
    return std::make_shared<DirectOperator>(config, x_grid, y_grid);
  if (!has_fast_operator(ph))
    throw std::invalid_argument("no fast operator for phase '" + ph.name() + "'");
  if (ph.dim() == 1) return std::make_shared<ToeplitzOperator1D>(config, x_grid, y_grid);
  if (dynamic_cast<const ModelFoldPhase*>(&ph))
    return std::make_shared<ModelFoldOperator2D>(config, x_grid, y_grid);
  return std::make_shared<CurveAveragingOperator>(config, x_grid, y_grid);
}

OperatorPtr make_operator(const OperatorConfig& config, double K, OperatorMethod method,
                          double cap) {
  config.validate();
  const PhaseFunction& ph = *config.phase;
  const Box& xb = config.cutoff.x_box;
  const Box& yb = config.cutoff.y_box;
  const bool fast = method == OperatorMethod::Fast ||
                    (method == OperatorMethod::Auto && has_fast_operator(ph));
  const bool matched = fast && !dynamic_cast<const CurveAveragingPhase*>(&ph);
  if (matched) {
    const Eigen::VectorXd h = matched_spacing(config, K);
    return make_operator_on(config, covering_grid(xb, h, K, cap), covering_grid(yb, h, K, cap),
                            method);
  }
  const GridSpec xg = build_grid(xb, config.lambda, ph, yb, GridSide::X, K, cap);
  const GridSpec yg = build_grid(yb, config.lambda, ph, xb, GridSide::Y, K, cap);
  return make_operator_on(config, xg, yg, method);
}

}  // namespace oscillab
