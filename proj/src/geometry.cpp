#include "oscillab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace oscillab {

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass:
      return "pass";
    case Verdict::Fail:
      return "fail";
    default:
      return "not_applicable";
  }
}

namespace {

void fix_sign(Eigen::VectorXd& v) {
  for (int i = 0; i < v.size(); ++i)
    if (std::abs(v[i]) > 1e-14) {
      if (v[i] < 0) v = -v;
      return;
    }
}

struct MixedSvd {
  Eigen::MatrixXd U, V;
  Eigen::VectorXd sigma;
  Eigen::MatrixXd adj;
};

MixedSvd mixed_svd(const Eigen::MatrixXd& M) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  MixedSvd s{svd.matrixU(), svd.matrixV(), svd.singularValues(), {}};
  const int d = static_cast<int>(M.rows());
  Eigen::VectorXd cof(d);
  for (int i = 0; i < d; ++i) {
    double p = 1.0;
    for (int j = 0; j < d; ++j)
      if (j != i) p *= s.sigma[j];
    cof[i] = p;
  }
  // adj(U S V^T) = det(V) V adj(S) det(U) U^T
  s.adj = (s.V.determinant() * s.U.determinant()) * s.V * cof.asDiagonal() * s.U.transpose();
  return s;
}

// d/dy_k det phi_xy and d/dx_k det phi_xy from the third-order jet.
Eigen::VectorXd det_gradient(const Jet& jt, const Eigen::MatrixXd& adj, bool wrt_y) {
  const int d = jt.d();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(d);
  for (int k = 0; k < d; ++k) {
    const int zk = wrt_y ? d + k : k;
    double s = 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) s += adj(j, i) * jt.t3(i, d + j, zk);
    g[k] = s;
  }
  return g;
}

Eigen::MatrixXd curvature_form(const Jet& jt, const Eigen::VectorXd& a, const Eigen::MatrixXd& adj,
                               int axis) {
  const int d = jt.d();
  const Eigen::VectorXd gy = det_gradient(jt, adj, true);
  if (std::abs(gy[axis]) < 1e-300) throw FoldDegeneracyError("fold surface not graphable in the fold axis");
  std::vector<Eigen::VectorXd> tangents;
  for (int p = 0; p < d; ++p) {
    if (p == axis) continue;
    Eigen::VectorXd t = Eigen::VectorXd::Zero(d);
    t[p] = 1.0;
    t[axis] = -gy[p] / gy[axis];
    tangents.push_back(t);
  }
  const int m = d - 1;
  Eigen::MatrixXd II = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      double s = 0.0;
      for (int r = 0; r < d; ++r)
        for (int k = 0; k < d; ++k)
          for (int l = 0; l < d; ++l)
            s += a[r] * jt.t3(r, d + k, d + l) * tangents[i][k] * tangents[j][l];
      II(i, j) = s;
    }
  return 0.5 * (II + II.transpose());
}

struct Definiteness {
  int rank = 0;
  int positive = 0;
  int negative = 0;
  double margin = std::numeric_limits<double>::infinity();  // min |eigenvalue| overall
};

Definiteness classify(const Eigen::MatrixXd& II, double threshold) {
  Definiteness r;
  if (II.rows() == 0) return r;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(II);
  for (int i = 0; i < II.rows(); ++i) {
    const double e = es.eigenvalues()[i];
    r.margin = std::min(r.margin, std::abs(e));
    if (std::abs(e) > threshold) {
      ++r.rank;
      (e > 0 ? r.positive : r.negative)++;
    }
  }
  return r;
}

double det_along_axis(const PhaseFunction& phase, const Eigen::VectorXd& x,
                      const Eigen::VectorXd& y_prime, double s) {
  return phase.jet(x, insert_fold_coordinate(phase, y_prime, s), 2).mixed_hessian().determinant();
}

}  // namespace

void fold_directions(const Eigen::MatrixXd& mixed, Eigen::VectorXd& a, Eigen::VectorXd& b) {
  const MixedSvd s = mixed_svd(mixed);
  const int d = static_cast<int>(mixed.rows());
  a = s.U.col(d - 1);
  b = s.V.col(d - 1);
  fix_sign(a);
  fix_sign(b);
}

FoldReport check_fold_conditions(const PhaseFunction& phase, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& y, const GeometryTolerances& tol) {
  phase.require_domain(x, y);
  const int d = phase.dim();
  const Jet jt = phase.jet(x, y, 3);
  const Eigen::MatrixXd M = jt.mixed_hessian();
  const MixedSvd s = mixed_svd(M);

  FoldReport r;
  r.x = x;
  r.y = y;
  r.det_value = M.determinant();
  if (d >= 2 && s.sigma[d - 2] < tol.corank_tol * std::max(1.0, s.sigma[0]))
    throw CorankError("mixed Hessian has corank above one");
  fold_directions(M, r.a, r.b);
  if (std::abs(r.det_value) > tol.det_tol) return r;

  double left = 0.0, right = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k) {
        left += r.a[i] * r.b[j] * r.b[k] * jt.t3(i, d + j, d + k);
        right += r.a[i] * r.b[j] * r.a[k] * jt.t3(i, d + j, k);
      }
  r.left_quantity = left;
  r.right_quantity = right;
  r.det_derivative_y = r.b.dot(det_gradient(jt, s.adj, true));
  r.det_derivative_x = r.a.dot(det_gradient(jt, s.adj, false));
  r.left_fold = std::abs(left) > tol.margin ? Verdict::Pass : Verdict::Fail;
  r.right_fold = std::abs(right) > tol.margin ? Verdict::Pass : Verdict::Fail;
  r.margin = std::min(std::abs(left), std::abs(right));

  if (d == 1) {
    r.curvature = Verdict::Pass;
  } else if (r.left_fold == Verdict::Pass) {
    const Definiteness c = classify(curvature_form(jt, r.a, s.adj, phase.fold_axis()), tol.margin);
    const bool definite = c.rank == d - 1 && (c.positive == 0 || c.negative == 0);
    r.curvature = definite ? Verdict::Pass : Verdict::Fail;
    r.margin = std::min(r.margin, c.margin);
  }
  return r;
}

Eigen::VectorXd insert_fold_coordinate(const PhaseFunction& phase, const Eigen::VectorXd& y_prime,
                                       double value) {
  const int d = phase.dim(), axis = phase.fold_axis();
  Eigen::VectorXd y(d);
  for (int i = 0, k = 0; i < d; ++i) y[i] = (i == axis) ? value : y_prime[k++];
  return y;
}

Eigen::VectorXd remove_fold_coordinate(const PhaseFunction& phase, const Eigen::VectorXd& y) {
  const int d = phase.dim(), axis = phase.fold_axis();
  Eigen::VectorXd yp(d - 1);
  for (int i = 0, k = 0; i < d; ++i)
    if (i != axis) yp[k++] = y[i];
  return yp;
}

double solve_fold_surface(const PhaseFunction& phase, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& y_prime, double lo, double hi) {
  if (!(hi > lo)) throw std::invalid_argument("fold bracket must satisfy lo < hi");
  constexpr int kScan = 32;
  std::vector<double> s(kScan + 1), f(kScan + 1);
  for (int i = 0; i <= kScan; ++i) {
    s[i] = lo + (hi - lo) * i / kScan;
    f[i] = det_along_axis(phase, x, y_prime, s[i]);
  }

  // Roots: exact zeros (consecutive zeros merged) and sign changes between nonzero samples.
  std::vector<std::pair<double, double>> brackets;
  int last_nonzero = -1;
  bool zero_run = false;
  for (int i = 0; i <= kScan; ++i) {
    if (f[i] == 0.0) {
      if (!zero_run) brackets.emplace_back(s[i], s[i]);
      zero_run = true;
      continue;
    }
    if (last_nonzero >= 0 && !zero_run && (f[i] > 0) != (f[last_nonzero] > 0))
      brackets.emplace_back(s[last_nonzero], s[i]);
    last_nonzero = i;
    zero_run = false;
  }
  if (brackets.empty()) throw NoRootError("det phi_xy has no sign change in the bracket");
  if (brackets.size() > 1) throw AmbiguousRootError("det phi_xy has several roots in the bracket");

  double a = brackets[0].first, b = brackets[0].second;
  if (a == b) return a;
  double fa = det_along_axis(phase, x, y_prime, a);
  for (int it = 0; it < 200 && b - a > 4 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(a)); ++it) {
    const double m = 0.5 * (a + b);
    const double fm = det_along_axis(phase, x, y_prime, m);
    if (fm == 0.0) return m;
    if ((fm > 0) == (fa > 0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  // Newton polish, kept inside the final bracket.
  double r = 0.5 * (a + b);
  const int axis = phase.fold_axis();
  for (int it = 0; it < 3; ++it) {
    const Eigen::VectorXd y = insert_fold_coordinate(phase, y_prime, r);
    const Jet jt = phase.jet(x, y, 3);
    const MixedSvd sv = mixed_svd(jt.mixed_hessian());
    const double fr = jt.mixed_hessian().determinant();
    const double dr = det_gradient(jt, sv.adj, true)[axis];
    if (fr == 0.0 || dr == 0.0) break;
    const double next = r - fr / dr;
    if (next < a || next > b) break;
    r = next;
  }
  return r;
}

double fold_coordinate(const PhaseFunction& phase, const Eigen::VectorXd& x,
                       const Eigen::VectorXd& y_prime, double lo, double hi) {
  if (auto g = phase.fold_closed_form(x, y_prime); g && *g >= lo && *g <= hi) return *g;
  return solve_fold_surface(phase, x, y_prime, lo, hi);
}

Eigen::MatrixXd fold_surface_curvature(const PhaseFunction& phase, const Eigen::VectorXd& x,
                                       const Eigen::VectorXd& y) {
  const Jet jt = phase.jet(x, y, 3);
  const MixedSvd s = mixed_svd(jt.mixed_hessian());
  Eigen::VectorXd a, b;
  fold_directions(jt.mixed_hessian(), a, b);
  return curvature_form(jt, a, s.adj, phase.fold_axis());
}

CurvatureReport check_curvature_condition(const PhaseFunction& phase, const Eigen::VectorXd& x,
                                          const Box& y_box, int samples,
                                          const GeometryTolerances& tol) {
  const int d = phase.dim(), axis = phase.fold_axis();
  CurvatureReport rep;
  if (d == 1) {
    // L_x is a point: the condition holds vacuously once the fold exists.
    fold_coordinate(phase, x, Eigen::VectorXd(0), y_box.lo[0], y_box.hi[0]);
    rep.verdict = Verdict::Pass;
    rep.points = 1;
    rep.margin = std::numeric_limits<double>::infinity();
    return rep;
  }
  const int m = d - 1;
  const int per_dim = std::max(1, static_cast<int>(std::ceil(std::pow(samples, 1.0 / m) - 1e-9)));
  std::vector<int> idx(m, 0);
  Eigen::VectorXd lo(m), hi(m);
  for (int i = 0, k = 0; i < d; ++i)
    if (i != axis) {
      lo[k] = y_box.lo[i];
      hi[k] = y_box.hi[i];
      ++k;
    }

  Eigen::VectorXd ref_a;
  rep.margin = std::numeric_limits<double>::infinity();
  rep.min_rank = m;
  rep.max_rank = 0;
  int sign_seen = 0;
  const long total = static_cast<long>(std::pow(per_dim, m) + 0.5);
  for (long t = 0; t < total; ++t) {
    long r = t;
    Eigen::VectorXd yp(m);
    for (int k = m - 1; k >= 0; --k) {
      const int i = static_cast<int>(r % per_dim);
      r /= per_dim;
      yp[k] = lo[k] + (hi[k] - lo[k]) * (i + 0.5) / per_dim;
    }
    double g;
    try {
      g = fold_coordinate(phase, x, yp, y_box.lo[axis], y_box.hi[axis]);
    } catch (const NoRootError&) {
      ++rep.skipped;
      continue;
    }
    const Eigen::VectorXd y = insert_fold_coordinate(phase, yp, g);
    const Jet jt = phase.jet(x, y, 3);
    const MixedSvd s = mixed_svd(jt.mixed_hessian());
    Eigen::VectorXd a, b;
    fold_directions(jt.mixed_hessian(), a, b);
    if (ref_a.size() == 0) ref_a = a;
    if (a.dot(ref_a) < 0) a = -a;
    const Definiteness c = classify(curvature_form(jt, a, s.adj, axis), tol.margin);
    ++rep.points;
    rep.margin = std::min(rep.margin, c.margin);
    rep.min_rank = std::min(rep.min_rank, c.rank);
    rep.max_rank = std::max(rep.max_rank, c.rank);
    if (c.positive && c.negative) rep.consistent_sign = false;
    const int sg = c.positive ? 1 : (c.negative ? -1 : 0);
    if (sg != 0) {
      if (sign_seen != 0 && sg != sign_seen) rep.consistent_sign = false;
      sign_seen = sg;
    }
  }
  if (rep.points == 0) {
    rep.verdict = Verdict::NotApplicable;
    rep.margin = 0.0;
    rep.min_rank = 0;
    return rep;
  }
  rep.verdict = (rep.min_rank == m && rep.consistent_sign) ? Verdict::Pass : Verdict::Fail;
  return rep;
}

// ---------------------------------------------------------------- normal form

double NormalForm::max_vanishing_residual() const {
  double m = 0.0;
  for (const auto& q : quantities)
    if (q.must_vanish) m = std::max(m, std::abs(q.value));
  return m;
}

double NormalForm::min_nonzero_quantity() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& q : quantities)
    if (!q.must_vanish) m = std::min(m, std::abs(q.value));
  return m;
}

bool NormalForm::ok(double vanish_tol, double nonzero_tol) const {
  return max_vanishing_residual() <= vanish_tol && min_nonzero_quantity() >= nonzero_tol;
}

std::vector<NormalFormQuantity> normal_form_quantities(const PhaseFunction& phase) {
  const int d = phase.dim(), n = 2 * d, xd = d - 1, yd = 2 * d - 1;
  const Eigen::VectorXd o = Eigen::VectorXd::Zero(d);
  const Jet jt = phase.jet(o, o, 3);
  const Eigen::MatrixXd M = jt.mixed_hessian();

  std::vector<NormalFormQuantity> q;
  q.push_back({"det_phi_xprime_yprime", d > 1 ? M.topLeftCorner(d - 1, d - 1).determinant() : 1.0,
               false});
  double v = 0.0;
  for (int i = 0; i < d; ++i) v = std::max(v, std::abs(M(i, d - 1)));
  q.push_back({"phi_x_yd", v, true});
  v = 0.0;
  for (int j = 0; j < d; ++j) v = std::max(v, std::abs(M(d - 1, j)));
  q.push_back({"phi_xd_y", v, true});
  q.push_back({"phi_xd_yd_yd", jt.t3(xd, yd, yd), false});
  q.push_back({"phi_xd_xd_yd", jt.t3(xd, xd, yd), false});
  v = 0.0;
  for (int j = 0; j < d - 1; ++j) v = std::max(v, std::abs(jt.t3(xd, yd, d + j)));
  q.push_back({"phi_xd_yd_yprime", v, true});
  v = 0.0;
  for (int i = 0; i < d - 1; ++i) v = std::max(v, std::abs(jt.t3(xd, yd, i)));
  q.push_back({"phi_xd_yd_xprime", v, true});
  v = 0.0;
  for (int i = 0; i < d - 1; ++i)
    for (int j = 0; j < d - 1; ++j) v = std::max(v, std::abs(jt.t3(i, d + j, xd)));
  q.push_back({"phi_xprime_yprime_xd", v, true});
  v = std::abs(jt.value);
  for (int i = d; i < n; ++i) {
    v = std::max(v, std::abs(jt.grad[i]));
    for (int j = d; j < n; ++j) {
      v = std::max(v, std::abs(jt.hess(i, j)));
      for (int k = d; k < n; ++k) v = std::max(v, std::abs(jt.t3(i, j, k)));
    }
  }
  q.push_back({"y_derivatives", v, true});
  return q;
}

namespace {

// Orthogonal matrix with last column u (Householder reflection, made a rotation for d >= 2).
Eigen::MatrixXd frame_with_last_column(const Eigen::VectorXd& u) {
  const int d = static_cast<int>(u.size());
  Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
  e[d - 1] = 1.0;
  Eigen::MatrixXd R = Eigen::MatrixXd::Identity(d, d);
  const Eigen::VectorXd w = e - u;
  if (w.norm() > 1e-14) {
    const Eigen::VectorXd v = w.normalized();
    R -= 2.0 * v * v.transpose();
  }
  if (d >= 2 && R.determinant() < 0) R.col(0) *= -1.0;
  return R;
}

}  // namespace

NormalForm normalize_phase_at_point(PhasePtr phase, const Eigen::VectorXd& x0,
                                    const Eigen::VectorXd& y0, const GeometryTolerances& tol) {
  const int d = phase->dim(), xd = d - 1, yd = 2 * d - 1;
  const FoldReport fr = check_fold_conditions(*phase, x0, y0, tol);
  if (std::abs(fr.det_value) > tol.det_tol)
    throw std::invalid_argument("normal form requested at a point off the fold");
  if (fr.left_fold != Verdict::Pass || fr.right_fold != Verdict::Pass)
    throw FoldDegeneracyError("normal form needs a two-sided fold");

  NormalForm nf;
  nf.x0 = x0;
  nf.y0 = y0;
  nf.rotation_left = frame_with_last_column(fr.a);
  nf.rotation_right = frame_with_last_column(fr.b);

  const Eigen::VectorXd o = Eigen::VectorXd::Zero(d);
  PulledBackPhase step1(phase, QuadraticMap::affine(x0, nf.rotation_left),
                        QuadraticMap::affine(y0, nf.rotation_right), false);
  const Jet j1 = step1.jet(o, o, 3);
  const double den_x = j1.t3(xd, yd, xd), den_y = j1.t3(xd, yd, yd);
  if (std::abs(den_x) < 1e-6 || std::abs(den_y) < 1e-6)
    throw FoldDegeneracyError("vanishing third derivative in the shear denominators");

  // sigma_L(u) = (u', u_d + alpha . u'), sigma_R(v) = (v', v_d + beta . v')
  nf.alpha = Eigen::VectorXd::Zero(d - 1);
  nf.beta = Eigen::VectorXd::Zero(d - 1);
  Eigen::MatrixXd SL = Eigen::MatrixXd::Identity(d, d), SR = SL;
  for (int i = 0; i < d - 1; ++i) {
    nf.alpha[i] = -j1.t3(xd, yd, i) / den_x;
    nf.beta[i] = -j1.t3(xd, yd, d + i) / den_y;
    SL(xd, i) = nf.alpha[i];
    SR(xd, i) = nf.beta[i];
  }
  const Eigen::MatrixXd L = nf.rotation_left * SL, R = nf.rotation_right * SR;
  PulledBackPhase step2(phase, QuadraticMap::affine(x0, L), QuadraticMap::affine(y0, R), false);
  const Jet j2 = step2.jet(o, o, 3);

  // nu(u) = (u' + u_d B u', u_d) with B^T phi_x'y' = -phi_x'y'x_d
  nf.B = Eigen::MatrixXd::Zero(d - 1, d - 1);
  if (d > 1) {
    const Eigen::MatrixXd Mp = j2.mixed_hessian().topLeftCorner(d - 1, d - 1);
    Eigen::MatrixXd N(d - 1, d - 1);
    for (int i = 0; i < d - 1; ++i)
      for (int j = 0; j < d - 1; ++j) N(i, j) = j2.t3(i, d + j, xd);
    nf.B = -(Mp.transpose().fullPivLu().solve(N.transpose()));
  }
  // G_L(u) = x0 + L nu(u); quadratic part of component c: sum_a L_ca Q^a with
  // Q^a(d-1, m) = Q^a(m, d-1) = B_am.
  QuadraticMap left = QuadraticMap::affine(x0, L);
  if (d > 1) {
    left.quadratic.assign(d, Eigen::MatrixXd::Zero(d, d));
    for (int c = 0; c < d; ++c)
      for (int a = 0; a < d - 1; ++a)
        for (int m = 0; m < d - 1; ++m) {
          left.quadratic[c](xd, m) += L(c, a) * nf.B(a, m);
          left.quadratic[c](m, xd) += L(c, a) * nf.B(a, m);
        }
  }
  nf.left = left;
  nf.right = QuadraticMap::affine(y0, R);
  nf.phase = std::make_shared<PulledBackPhase>(phase, nf.left, nf.right, true,
                                               phase->name() + "_normal_form");
  nf.quantities = normal_form_quantities(*nf.phase);
  return nf;
}

}  // namespace oscillab
