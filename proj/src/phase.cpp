#include "oscillab/phase.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace oscillab {

namespace {

constexpr double kPi = 3.14159265358979323846;

Eigen::VectorXd join(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  Eigen::VectorXd z(x.size() + y.size());
  z << x, y;
  return z;
}

void check_order(int order) {
  if (order < 0 || order > 3) throw std::invalid_argument("derivative order must be in 0..3");
}

// falling factorial e (e-1) ... (e-m+1)
double falling(int e, int m) {
  double r = 1.0;
  for (int i = 0; i < m; ++i) r *= (e - i);
  return r;
}

}  // namespace

Jet::Jet(int n_vars, int max_order) : n(n_vars), order(max_order) {
  grad = Eigen::VectorXd::Zero(n);
  hess = Eigen::MatrixXd::Zero(n, n);
  if (max_order >= 3) third.assign(static_cast<std::size_t>(n) * n * n, 0.0);
}

PhaseFunction::PhaseFunction(std::string name, int d, Params params, Box domain_x, Box domain_y)
    : name_(std::move(name)),
      d_(d),
      params_(std::move(params)),
      domain_x_(std::move(domain_x)),
      domain_y_(std::move(domain_y)) {
  if (d_ < 1) throw std::invalid_argument("phase dimension must be positive");
}

std::optional<double> PhaseFunction::fold_closed_form(const Eigen::VectorXd&,
                                                      const Eigen::VectorXd&) const {
  return std::nullopt;
}

bool PhaseFunction::in_domain(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
  return x.size() == d_ && y.size() == d_ && domain_x_.contains(x) && domain_y_.contains(y);
}

void PhaseFunction::require_domain(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
  if (!in_domain(x, y)) {
    std::ostringstream os;
    os << "point outside the domain of phase " << name_;
    throw DomainError(os.str());
  }
}

Jet PhaseFunction::jet(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int order) const {
  return finite_difference_jet(*this, x, y, order);
}

Jet finite_difference_jet(const PhaseFunction& phase, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& y, int order) {
  check_order(order);
  phase.require_domain(x, y);
  const int d = phase.dim();
  const int n = 2 * d;
  const Eigen::VectorXd z0 = join(x, y);
  auto f = [&](const Eigen::VectorXd& z) { return phase.eval(z.head(d), z.tail(d)); };

  const double eps = std::numeric_limits<double>::epsilon();
  auto step = [&](int i, double power) {
    const double h = std::pow(eps, power) * std::max(1.0, std::abs(z0[i]));
    if (!(h > 0.0) || !std::isfinite(h) || z0[i] + h == z0[i])
      throw PrecisionError("finite-difference step underflow");
    return h;
  };

  Jet jt(n, order);
  jt.value = f(z0);
  if (order >= 1) {
    for (int i = 0; i < n; ++i) {
      const double h = step(i, 1.0 / 3.0);
      Eigen::VectorXd zp = z0, zm = z0;
      zp[i] += h;
      zm[i] -= h;
      jt.grad[i] = (f(zp) - f(zm)) / (2 * h);
    }
  }
  // Higher orders compose central first differences: D_i D_j f and D_i D_j D_k f.
  if (order >= 2) {
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        const double hi = step(i, 0.25), hj = step(j, 0.25);
        double acc = 0.0;
        for (int si : {1, -1})
          for (int sj : {1, -1}) {
            Eigen::VectorXd z = z0;
            z[i] += si * hi;
            z[j] += sj * hj;
            acc += si * sj * f(z);
          }
        jt.hess(i, j) = jt.hess(j, i) = acc / (4 * hi * hj);
      }
  }
  if (order >= 3) {
    // Richardson combination of steps h and 2h removes the O(h^2) term.
    auto d3 = [&](int i, int j, int k, double scale) {
      const double hi = scale * step(i, 1.0 / 6.0), hj = scale * step(j, 1.0 / 6.0),
                   hk = scale * step(k, 1.0 / 6.0);
      double acc = 0.0;
      for (int si : {1, -1})
        for (int sj : {1, -1})
          for (int sk : {1, -1}) {
            Eigen::VectorXd z = z0;
            z[i] += si * hi;
            z[j] += sj * hj;
            z[k] += sk * hk;
            acc += si * sj * sk * f(z);
          }
      return acc / (8 * hi * hj * hk);
    };
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j)
        for (int k = j; k < n; ++k) {
          const double v = (4.0 * d3(i, j, k, 1.0) - d3(i, j, k, 2.0)) / 3.0;
          jt.t3(i, j, k) = jt.t3(i, k, j) = jt.t3(j, i, k) = v;
          jt.t3(j, k, i) = jt.t3(k, i, j) = jt.t3(k, j, i) = v;
        }
  }
  return jt;
}

DerivativeTensor eval_phase_derivatives(const PhaseFunction& phase, const Eigen::VectorXd& x,
                                        const Eigen::VectorXd& y, int order) {
  check_order(order);
  phase.require_domain(x, y);
  const Jet jt = phase.jet(x, y, order);
  DerivativeTensor t;
  t.n = jt.n;
  t.order = order;
  switch (order) {
    case 0:
      t.data = {jt.value};
      break;
    case 1:
      t.data.assign(jt.grad.data(), jt.grad.data() + jt.n);
      break;
    case 2:
      t.data.resize(static_cast<std::size_t>(jt.n) * jt.n);
      for (int i = 0; i < jt.n; ++i)
        for (int j = 0; j < jt.n; ++j) t.data[static_cast<std::size_t>(i) * jt.n + j] = jt.hess(i, j);
      break;
    default:
      t.data = jt.third;
  }
  return t;
}

double det_mixed_hessian(const PhaseFunction& phase, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& y) {
  phase.require_domain(x, y);
  return phase.jet(x, y, 2).mixed_hessian().determinant();
}

// ---------------------------------------------------------------- polynomials

PolynomialPhase::PolynomialPhase(std::string name, int d, Params params,
                                 std::vector<Monomial> terms, Box domain_x, Box domain_y)
    : PhaseFunction(std::move(name), d, std::move(params), std::move(domain_x),
                    std::move(domain_y)),
      terms_(std::move(terms)) {
  for (const auto& t : terms_)
    if (static_cast<int>(t.powers.size()) != 2 * d)
      throw std::invalid_argument("monomial arity does not match phase dimension");
}

double PolynomialPhase::eval(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
  const int d = dim();
  double s = 0.0;
  for (const auto& t : terms_) {
    double v = t.coef;
    for (int i = 0; i < 2 * d; ++i)
      if (t.powers[i]) v *= std::pow(i < d ? x[i] : y[i - d], t.powers[i]);
    s += v;
  }
  return s;
}

Jet PolynomialPhase::jet(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int order) const {
  check_order(order);
  const int n = 2 * dim();
  const Eigen::VectorXd z = join(x, y);
  Jet jt(n, order);

  std::vector<int> m(n, 0);
  auto partial = [&](const Monomial& t) {
    double v = t.coef;
    for (int v_i = 0; v_i < n; ++v_i) {
      const int e = t.powers[v_i], k = m[v_i];
      if (k > e) return 0.0;
      v *= falling(e, k);
      if (e - k) v *= std::pow(z[v_i], e - k);
    }
    return v;
  };
  auto sum_partial = [&]() {
    double s = 0.0;
    for (const auto& t : terms_) s += partial(t);
    return s;
  };

  jt.value = sum_partial();
  if (order >= 1)
    for (int i = 0; i < n; ++i) {
      ++m[i];
      jt.grad[i] = sum_partial();
      --m[i];
    }
  if (order >= 2)
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        ++m[i];
        ++m[j];
        jt.hess(i, j) = jt.hess(j, i) = sum_partial();
        --m[i];
        --m[j];
      }
  if (order >= 3)
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j)
        for (int k = j; k < n; ++k) {
          ++m[i];
          ++m[j];
          ++m[k];
          const double v = sum_partial();
          --m[i];
          --m[j];
          --m[k];
          jt.t3(i, j, k) = jt.t3(i, k, j) = jt.t3(j, i, k) = v;
          jt.t3(j, k, i) = jt.t3(k, i, j) = jt.t3(k, j, i) = v;
        }
  return jt;
}

namespace {

Monomial mono(int n, double c, std::initializer_list<std::pair<int, int>> pw) {
  Monomial m{c, std::vector<int>(n, 0)};
  for (auto [i, p] : pw) m.powers[i] += p;
  return m;
}

std::vector<Monomial> model_fold_terms(int d) {
  const int n = 2 * d, xd = d - 1, yd = 2 * d - 1;
  std::vector<Monomial> t;
  for (int j = 0; j < d - 1; ++j) t.push_back(mono(n, 1.0, {{j, 1}, {d + j, 1}}));
  t.push_back(mono(n, 1.0 / 6.0, {{xd, 3}}));
  t.push_back(mono(n, -0.5, {{xd, 2}, {yd, 1}}));
  t.push_back(mono(n, 0.5, {{xd, 1}, {yd, 2}}));
  t.push_back(mono(n, -1.0 / 6.0, {{yd, 3}}));
  for (int k = 0; k < d - 1; ++k) t.push_back(mono(n, 1.0, {{xd, 1}, {d + k, 2}}));
  return t;
}

std::vector<Monomial> one_sided_terms(int d) {
  const int n = 2 * d, xd = d - 1, yd = 2 * d - 1;
  std::vector<Monomial> t;
  for (int j = 0; j < d - 1; ++j) t.push_back(mono(n, 1.0, {{j, 1}, {d + j, 1}}));
  t.push_back(mono(n, 1.0, {{xd, 1}, {yd, 2}}));
  for (int k = 0; k < d - 1; ++k) t.push_back(mono(n, 1.0, {{xd, 1}, {d + k, 2}}));
  return t;
}

// y2 x2 + y2 (x1-y1)^2/2 + y3 x3 + y3 (x1-y1)^3/6 with x = z0..z2, y = z3..z5
std::vector<Monomial> curve_terms() {
  const int n = 6, x1 = 0, x2 = 1, x3 = 2, y1 = 3, y2 = 4, y3 = 5;
  std::vector<Monomial> t;
  t.push_back(mono(n, 1.0, {{y2, 1}, {x2, 1}}));
  t.push_back(mono(n, 0.5, {{y2, 1}, {x1, 2}}));
  t.push_back(mono(n, -1.0, {{y2, 1}, {x1, 1}, {y1, 1}}));
  t.push_back(mono(n, 0.5, {{y2, 1}, {y1, 2}}));
  t.push_back(mono(n, 1.0, {{y3, 1}, {x3, 1}}));
  t.push_back(mono(n, 1.0 / 6.0, {{y3, 1}, {x1, 3}}));
  t.push_back(mono(n, -0.5, {{y3, 1}, {x1, 2}, {y1, 1}}));
  t.push_back(mono(n, 0.5, {{y3, 1}, {x1, 1}, {y1, 2}}));
  t.push_back(mono(n, -1.0 / 6.0, {{y3, 1}, {y1, 3}}));
  return t;
}

std::vector<Monomial> dot_terms(int d) {
  std::vector<Monomial> t;
  for (int j = 0; j < d; ++j) t.push_back(mono(2 * d, 1.0, {{j, 1}, {d + j, 1}}));
  return t;
}

}  // namespace

ModelFoldPhase::ModelFoldPhase(int d)
    : PolynomialPhase("model_fold", d, {}, model_fold_terms(d), Box::cube(d, 10.0),
                      Box::cube(d, 10.0)) {}

double ModelFoldPhase::eval(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
  const int d = dim();
  double s = 0.0, q = 0.0;
  for (int j = 0; j < d - 1; ++j) {
    s += x[j] * y[j];
    q += y[j] * y[j];
  }
  const double t = x[d - 1] - y[d - 1];
  return s + t * t * t / 6.0 + x[d - 1] * q;
}

std::optional<double> ModelFoldPhase::fold_closed_form(const Eigen::VectorXd& x,
                                                       const Eigen::VectorXd&) const {
  return x[dim() - 1];
}

OneSidedFoldPhase::OneSidedFoldPhase(int d)
    : PolynomialPhase("one_sided_fold", d, {}, one_sided_terms(d), Box::cube(d, 10.0),
                      Box::cube(d, 10.0)) {}

std::optional<double> OneSidedFoldPhase::fold_closed_form(const Eigen::VectorXd&,
                                                          const Eigen::VectorXd&) const {
  return 0.0;
}

CurveAveragingPhase::CurveAveragingPhase()
    : PolynomialPhase("curve_avg", 3, {}, curve_terms(), Box::cube(3, 10.0), Box::cube(3, 10.0)) {}

double CurveAveragingPhase::eval(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
  const double t = x[0] - y[0];
  return y[1] * (x[1] + 0.5 * t * t) + y[2] * (x[2] + t * t * t / 6.0);
}

std::optional<double> CurveAveragingPhase::fold_closed_form(const Eigen::VectorXd& x,
                                                            const Eigen::VectorXd& y_prime) const {
  // y_prime = (y1, y3)
  return -y_prime[1] * (x[0] - y_prime[0]);
}

DotProductPhase::DotProductPhase(int d)
    : PolynomialPhase("dot_product", d, {}, dot_terms(d), Box::cube(d, 10.0), Box::cube(d, 10.0)) {}

// ---------------------------------------------------------------- circle

CircleExtensionPhase::CircleExtensionPhase()
    : PhaseFunction("circle_extension", 1, {}, Box::cube(1, 10.0), Box::cube(1, 10.0)) {}

double CircleExtensionPhase::eval(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
  return std::cos(x[0] - y[0]);
}

Jet CircleExtensionPhase::jet(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                              int order) const {
  check_order(order);
  const double u = x[0] - y[0], c = std::cos(u), s = std::sin(u);
  // k-th derivative of cos: cos, -sin, -cos, sin
  const double dk[4] = {c, -s, -c, s};
  Jet jt(2, order);
  jt.value = c;
  auto sign = [](int ny) { return (ny % 2) ? -1.0 : 1.0; };
  if (order >= 1) {
    jt.grad[0] = dk[1];
    jt.grad[1] = -dk[1];
  }
  if (order >= 2)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) jt.hess(i, j) = sign(i + j) * dk[2];
  if (order >= 3)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k) jt.t3(i, j, k) = sign(i + j + k) * dk[3];
  return jt;
}

std::optional<double> CircleExtensionPhase::fold_closed_form(const Eigen::VectorXd& x,
                                                             const Eigen::VectorXd&) const {
  // The branch y = x - pi/2; callers with a bracket elsewhere use the root finder.
  return x[0] - kPi / 2;
}

// ---------------------------------------------------------------- sphere

namespace {

// Derivatives of one graph chart u -> sqrt(1-|u|^2) p + sum u_i t_i, as vectors in R^{d+1}.
struct ChartJet {
  Eigen::VectorXd v0;
  std::vector<Eigen::VectorXd> v1;                           // [i]
  std::vector<std::vector<Eigen::VectorXd>> v2;              // [i][j]
  std::vector<std::vector<std::vector<Eigen::VectorXd>>> v3;  // [i][j][k]
};

ChartJet chart_jet(const Eigen::MatrixXd& frame, const Eigen::VectorXd& u, int order) {
  const int d = static_cast<int>(u.size());
  const Eigen::VectorXd p = frame.col(d);
  const double r2 = u.squaredNorm();
  if (r2 >= 1.0) throw DomainError("sphere chart evaluated outside the unit ball");
  const double s = std::sqrt(1.0 - r2), s3 = s * s * s, s5 = s3 * s * s;
  ChartJet cj;
  cj.v0 = s * p + frame.leftCols(d) * u;
  if (order >= 1) {
    cj.v1.resize(d);
    for (int i = 0; i < d; ++i) cj.v1[i] = (-u[i] / s) * p + frame.col(i);
  }
  if (order >= 2) {
    cj.v2.assign(d, std::vector<Eigen::VectorXd>(d));
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        cj.v2[i][j] = (-(i == j ? 1.0 : 0.0) / s - u[i] * u[j] / s3) * p;
  }
  if (order >= 3) {
    cj.v3.assign(d, std::vector<std::vector<Eigen::VectorXd>>(d, std::vector<Eigen::VectorXd>(d)));
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k) {
          const double dl = (i == j ? u[k] : 0.0) + (i == k ? u[j] : 0.0) + (j == k ? u[i] : 0.0);
          cj.v3[i][j][k] = (-dl / s3 - 3.0 * u[i] * u[j] * u[k] / s5) * p;
        }
  }
  return cj;
}

const Eigen::VectorXd& chart_component(const ChartJet& cj, const std::vector<int>& idx) {
  switch (idx.size()) {
    case 0:
      return cj.v0;
    case 1:
      return cj.v1[idx[0]];
    case 2:
      return cj.v2[idx[0]][idx[1]];
    default:
      return cj.v3[idx[0]][idx[1]][idx[2]];
  }
}

void check_frame(const Eigen::MatrixXd& f, int d) {
  if (f.rows() != d + 1 || f.cols() != d + 1)
    throw std::invalid_argument("sphere frame must be (d+1)x(d+1)");
  if (!(f.transpose() * f).isIdentity(1e-12))
    throw std::invalid_argument("sphere frame must be orthonormal");
}

}  // namespace

SphereExtensionPhase::SphereExtensionPhase(int d, Eigen::MatrixXd frame_x, Eigen::MatrixXd frame_y,
                                           Params params)
    : PhaseFunction("sphere_extension", d, std::move(params), Box::cube(d, 0.7),
                    Box::cube(d, 0.7)),
      frame_x_(std::move(frame_x)),
      frame_y_(std::move(frame_y)) {
  check_frame(frame_x_, d);
  check_frame(frame_y_, d);
}

Eigen::VectorXd SphereExtensionPhase::embed_x(const Eigen::VectorXd& x) const {
  return chart_jet(frame_x_, x, 0).v0;
}

Eigen::VectorXd SphereExtensionPhase::embed_y(const Eigen::VectorXd& y) const {
  return chart_jet(frame_y_, y, 0).v0;
}

double SphereExtensionPhase::eval(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
  return embed_x(x).dot(embed_y(y));
}

Jet SphereExtensionPhase::jet(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                              int order) const {
  check_order(order);
  const int d = dim(), n = 2 * d;
  const ChartJet cx = chart_jet(frame_x_, x, order), cy = chart_jet(frame_y_, y, order);
  // d^a_x d^b_y phi = <d^a Xi, d^b Gamma>
  auto value = [&](std::initializer_list<int> zs) {
    std::vector<int> ix, iy;
    for (int z : zs) (z < d ? ix : iy).push_back(z < d ? z : z - d);
    return chart_component(cx, ix).dot(chart_component(cy, iy));
  };
  Jet jt(n, order);
  jt.value = value({});
  if (order >= 1)
    for (int i = 0; i < n; ++i) jt.grad[i] = value({i});
  if (order >= 2)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) jt.hess(i, j) = value({i, j});
  if (order >= 3)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) jt.t3(i, j, k) = value({i, j, k});
  return jt;
}

// ---------------------------------------------------------------- callable

CallablePhase::CallablePhase(std::string name, int d, Fn fn, Box domain_x, Box domain_y)
    : PhaseFunction(std::move(name), d, {}, std::move(domain_x), std::move(domain_y)),
      fn_(std::move(fn)) {}

double CallablePhase::eval(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
  return fn_(x, y);
}

// ---------------------------------------------------------------- pullbacks

QuadraticMap QuadraticMap::affine(Eigen::VectorXd offset, Eigen::MatrixXd linear) {
  QuadraticMap m;
  m.offset = std::move(offset);
  m.linear = std::move(linear);
  return m;
}

Eigen::VectorXd QuadraticMap::operator()(const Eigen::VectorXd& u) const {
  Eigen::VectorXd v = offset + linear * u;
  for (std::size_t a = 0; a < quadratic.size(); ++a) v[a] += 0.5 * u.dot(quadratic[a] * u);
  return v;
}

Eigen::MatrixXd QuadraticMap::jacobian(const Eigen::VectorXd& u) const {
  Eigen::MatrixXd j = linear;
  for (std::size_t a = 0; a < quadratic.size(); ++a) j.row(a) += (quadratic[a] * u).transpose();
  return j;
}

PulledBackPhase::PulledBackPhase(PhasePtr base, QuadraticMap left, QuadraticMap right,
                                 bool subtract_y_slice, std::string name)
    : PhaseFunction(name.empty() ? base->name() + "_pulled_back" : std::move(name), base->dim(),
                    base->params(), Box::cube(base->dim(), 10.0), Box::cube(base->dim(), 10.0)),
      base_(std::move(base)),
      left_(std::move(left)),
      right_(std::move(right)),
      subtract_y_slice_(subtract_y_slice) {
  const int d = dim();
  if (left_.dim() != d || right_.dim() != d || left_.linear.rows() != d ||
      right_.linear.rows() != d)
    throw std::invalid_argument("pullback maps must be square of the phase dimension");
}

double PulledBackPhase::eval(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
  const Eigen::VectorXd gy = right_(y);
  double v = base_->eval(left_(x), gy);
  if (subtract_y_slice_) v -= base_->eval(left_(Eigen::VectorXd::Zero(dim())), gy);
  return v;
}

Jet PulledBackPhase::composed_jet(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                  int order) const {
  const int d = dim(), n = 2 * d;
  const Jet b = base_->jet(left_(x), right_(y), order);

  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  J.topLeftCorner(d, d) = left_.jacobian(x);
  J.bottomRightCorner(d, d) = right_.jacobian(y);
  // Q[a](i, j): second derivatives of the joint map, block diagonal.
  std::vector<Eigen::MatrixXd> Q(n, Eigen::MatrixXd::Zero(n, n));
  bool has_q = false;
  for (std::size_t a = 0; a < left_.quadratic.size(); ++a) {
    Q[a].topLeftCorner(d, d) = left_.quadratic[a];
    has_q = true;
  }
  for (std::size_t a = 0; a < right_.quadratic.size(); ++a) {
    Q[d + a].bottomRightCorner(d, d) = right_.quadratic[a];
    has_q = true;
  }

  Jet jt(n, order);
  jt.value = b.value;
  if (order >= 1) jt.grad = J.transpose() * b.grad;
  if (order >= 2) {
    jt.hess = J.transpose() * b.hess * J;
    if (has_q)
      for (int a = 0; a < n; ++a) jt.hess += b.grad[a] * Q[a];
  }
  if (order >= 3) {
    // psi_abc J_ai J_bj J_ck
    std::vector<double> t1(static_cast<std::size_t>(n) * n * n, 0.0), t2 = t1;
    auto at = [n](std::vector<double>& t, int a, int b, int c) -> double& {
      return t[(static_cast<std::size_t>(a) * n + b) * n + c];
    };
    for (int a = 0; a < n; ++a)
      for (int bb = 0; bb < n; ++bb)
        for (int k = 0; k < n; ++k) {
          double s = 0.0;
          for (int c = 0; c < n; ++c) s += b.t3(a, bb, c) * J(c, k);
          at(t1, a, bb, k) = s;
        }
    for (int a = 0; a < n; ++a)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          double s = 0.0;
          for (int bb = 0; bb < n; ++bb) s += at(t1, a, bb, k) * J(bb, j);
          at(t2, a, j, k) = s;
        }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          double s = 0.0;
          for (int a = 0; a < n; ++a) s += at(t2, a, j, k) * J(a, i);
          jt.t3(i, j, k) = s;
        }
    if (has_q) {
      // psi_ab (Q^a_ij J_bk + Q^a_ik J_bj + Q^a_jk J_bi)
      const Eigen::MatrixXd HJ = b.hess * J;  // (a, k) -> sum_b psi_ab J_bk
      for (int a = 0; a < n; ++a) {
        if (Q[a].isZero(0.0)) continue;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
              jt.t3(i, j, k) +=
                  Q[a](i, j) * HJ(a, k) + Q[a](i, k) * HJ(a, j) + Q[a](j, k) * HJ(a, i);
      }
    }
  }
  return jt;
}

Jet PulledBackPhase::jet(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int order) const {
  check_order(order);
  Jet jt = composed_jet(x, y, order);
  if (!subtract_y_slice_) return jt;
  const int d = dim(), n = 2 * d;
  const Jet s = composed_jet(Eigen::VectorXd::Zero(d), y, order);
  jt.value -= s.value;
  if (order >= 1) jt.grad.tail(d) -= s.grad.tail(d);
  if (order >= 2) jt.hess.bottomRightCorner(d, d) -= s.hess.bottomRightCorner(d, d);
  if (order >= 3)
    for (int i = d; i < n; ++i)
      for (int j = d; j < n; ++j)
        for (int k = d; k < n; ++k) jt.t3(i, j, k) -= s.t3(i, j, k);
  return jt;
}

// ---------------------------------------------------------------- factory

namespace {

// Frame (t_1, t_2, p) with base point p at polar angle theta in the x1-x3 plane.
Eigen::MatrixXd polar_frame(double theta, bool swap_tangents) {
  Eigen::Vector3d p(std::sin(theta), 0.0, std::cos(theta));
  Eigen::Vector3d t_polar(std::cos(theta), 0.0, -std::sin(theta));
  Eigen::Vector3d t_azimuth(0.0, 1.0, 0.0);
  Eigen::Matrix3d f;
  if (swap_tangents)
    f << t_azimuth, t_polar, p;
  else
    f << t_polar, t_azimuth, p;
  return f;
}

double param_or(const Params& p, const std::string& key, double fallback) {
  auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}

}  // namespace

PhasePtr make_phase(const std::string& name, int d, const Params& params) {
  if (name == "model_fold") return std::make_shared<ModelFoldPhase>(d);
  if (name == "one_sided_fold") return std::make_shared<OneSidedFoldPhase>(d);
  if (name == "dot_product") return std::make_shared<DotProductPhase>(d);
  if (name == "curve_avg") {
    if (d != 3) throw std::invalid_argument("curve_avg phase is three-dimensional");
    return std::make_shared<CurveAveragingPhase>();
  }
  if (name == "circle_extension") {
    if (d != 1) throw std::invalid_argument("circle_extension phase is one-dimensional");
    return std::make_shared<CircleExtensionPhase>();
  }
  if (name == "sphere_extension") {
    if (d != 2) throw std::invalid_argument("sphere_extension is implemented for d = 2");
    // x chart at the north pole, y chart at the equator; the fold then passes through the
    // origin of both charts and is solved in the last y coordinate.
    const double tx = param_or(params, "x_polar_angle", 0.0);
    const double ty = param_or(params, "y_polar_angle", kPi / 2);
    Params p = params;
    p["x_polar_angle"] = tx;
    p["y_polar_angle"] = ty;
    return std::make_shared<SphereExtensionPhase>(2, polar_frame(tx, false), polar_frame(ty, true),
                                                  p);
  }
  throw std::invalid_argument("unknown phase: " + name);
}

std::vector<std::string> builtin_phase_names() {
  return {"model_fold",       "one_sided_fold",   "curve_avg",
          "circle_extension", "sphere_extension", "dot_product"};
}

}  // namespace oscillab
