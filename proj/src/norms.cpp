#include "oscillab/norms.hpp"

#include <random>
#include <sstream>

namespace oscillab {

namespace {

void require_finite(const Eigen::VectorXcd& v, const char* where) {
  if (!v.allFinite()) throw NumericalError(std::string("non-finite values in ") + where);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

double evaluate_ratio(const LinearOperator& op, const Eigen::VectorXcd& f, double p, double q) {
  const double den = lp_norm(f, p, op.y_grid().cell_volume());
  if (den == 0.0) return 0.0;
  return lp_norm(op.apply(f), q, op.x_grid().cell_volume()) / den;
}

Eigen::VectorXcd random_start(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::VectorXcd v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double re = g(rng);
    v[i] = cd(re, g(rng));
  }
  return v;
}

NormEstimate l2_norm_power_iteration(const LinearOperator& op, const PowerIterationOptions& opt) {
  const double wx = op.x_grid().cell_volume(), wy = op.y_grid().cell_volume();
  NormEstimate est;
  est.method = "power-iteration";
  Eigen::VectorXcd f = random_start(op.y_grid().size(), opt.seed);
  f /= lp_norm(f, 2.0, wy);
  double prev = 0.0;
  for (int it = 1; it <= opt.max_iter; ++it) {
    const Eigen::VectorXcd g = op.apply(f);
    require_finite(g, "power iteration");
    const double r = std::pow(lp_norm(g, 2.0, wx), 2);  // ||f|| = 1
    est.history.push_back(std::sqrt(r));
    est.iterations = it;
    if (r == 0.0 || (it > 1 && std::abs(r - prev) < opt.tol * r)) {
      est.converged = true;
      break;
    }
    const Eigen::VectorXcd h = op.adjoint(g);
    require_finite(h, "power iteration");
    const double hn = lp_norm(h, 2.0, wy);
    if (hn == 0.0) {
      est.converged = true;
      break;
    }
    f = h / hn;
    prev = r;
  }
  est.witness = DiscreteFunction(op.y_grid(), f);
  est.value = evaluate_ratio(op, f, 2.0, 2.0);
  return est;
}

namespace {

struct BoydRun {
  double value = 0.0;
  Eigen::VectorXcd f;
  int iterations = 0;
  bool converged = false;
  int damping_events = 0;
  std::vector<double> history;
};

BoydRun boyd_run(const LinearOperator& op, Eigen::VectorXcd f, double p, double q,
                 const BoydOptions& opt) {
  const double wx = op.x_grid().cell_volume(), wy = op.y_grid().cell_volume();
  const double pd = dual_exponent(p);
  BoydRun run;
  const double f0 = lp_norm(f, p, wy);
  if (f0 == 0.0) return run;
  f /= f0;
  Eigen::VectorXcd Tf = op.apply(f);
  require_finite(Tf, "duality-power iteration");
  double r = lp_norm(Tf, q, wx);
  run.value = r;
  run.f = f;
  run.history.push_back(r);
  for (int it = 1; it <= opt.max_iter; ++it) {
    run.iterations = it;
    const Eigen::VectorXcd h = op.adjoint(duality_map(Tf, q));
    Eigen::VectorXcd fn = duality_map(h, pd);
    const double fnn = lp_norm(fn, p, wy);
    if (!(fnn > 0.0)) {
      run.converged = true;
      break;
    }
    fn /= fnn;
    Eigen::VectorXcd Tfn = op.apply(fn);
    require_finite(Tfn, "duality-power iteration");
    double rn = lp_norm(Tfn, q, wx);
    if (rn < r * (1.0 - opt.tol)) {
      // Ratio dropped: retry with damped steps toward the new iterate.
      ++run.damping_events;
      bool accepted = false;
      double theta = 0.5;
      for (int k = 0; k < opt.max_damping_halvings && !accepted; ++k, theta *= 0.5) {
        Eigen::VectorXcd fd = (1.0 - theta) * f + theta * fn;
        const double n = lp_norm(fd, p, wy);
        if (n == 0.0) continue;
        fd /= n;
        Eigen::VectorXcd Tfd = op.apply(fd);
        const double rd = lp_norm(Tfd, q, wx);
        if (rd >= r) {
          fn = std::move(fd);
          Tfn = std::move(Tfd);
          rn = rd;
          accepted = true;
        }
      }
      if (!accepted) {
        run.converged = true;
        break;
      }
    }
    const bool done = std::abs(rn - r) < opt.tol * rn;
    f = std::move(fn);
    Tf = std::move(Tfn);
    r = rn;
    run.history.push_back(r);
    if (r > run.value) {
      run.value = r;
      run.f = f;
    }
    if (done) {
      run.converged = true;
      break;
    }
  }
  return run;
}

}  // namespace

NormEstimate boyd_pq_lower_bound(const LinearOperator& op, double p, double q, const BoydOptions& opt) {
  if (!(p > 1.0) || !(q > 1.0) || std::isinf(p) || std::isinf(q))
    throw ConfigError("duality-power method needs 1 < p, q < inf");
  std::vector<Eigen::VectorXcd> starts;
  for (int s = 0; s < opt.starts; ++s)
    starts.push_back(random_start(op.y_grid().size(), mix_seed(opt.seed, s)));
  for (const auto& w : opt.seed_witnesses) {
    if (w.size() != op.y_grid().size()) throw ShapeError("seed witness does not match the y grid");
    starts.push_back(w);
  }
  if (starts.empty()) throw ConfigError("duality-power method needs at least one start");
  NormEstimate est;
  est.p = p;
  est.q = q;
  est.method = "duality-power";
  bool found = false;
  BoydRun best;
  for (const auto& s : starts) {
    BoydRun run = boyd_run(op, s, p, q, opt);
    ++est.restarts;
    est.damping_events += run.damping_events;
    if (run.value > 0.0 && (!found || run.value > best.value)) {
      best = std::move(run);
      found = true;
    }
  }
  if (!found) throw DegenerateStartError("all duality-power starts collapsed to zero");
  est.iterations = best.iterations;
  est.converged = best.converged;
  est.history = best.history;
  est.witness = DiscreteFunction(op.y_grid(), best.f);
  est.value = evaluate_ratio(op, best.f, p, q);
  return est;
}

Eigen::VectorXd support_mask(const GridSpec& grid, const Box& box) {
  Eigen::VectorXd m(grid.size());
  for (Eigen::Index k = 0; k < grid.size(); ++k) m[k] = box.contains(grid.point(k)) ? 1.0 : 0.0;
  return m;
}

NormEstimate bilinear_norm_lower_bound(const LinearOperator& op, const Box& f_support,
                                       const Box& g_support, const BilinearOptions& opt) {
  const double wx = op.x_grid().cell_volume(), wy = op.y_grid().cell_volume();
  const Eigen::VectorXd mf = support_mask(op.y_grid(), f_support);
  const Eigen::VectorXd mg = support_mask(op.y_grid(), g_support);
  if (mf.sum() == 0.0 || mg.sum() == 0.0) throw ConfigError("bilinear support box has no grid nodes");
  const double pfd = dual_exponent(opt.p_f), pgd = dual_exponent(opt.p_g);
  auto ratio = [&](const Eigen::VectorXcd& f, const Eigen::VectorXcd& g, const Eigen::VectorXcd& Tf,
                   const Eigen::VectorXcd& Tg) {
    const double den = lp_norm(f, opt.p_f, wy) * lp_norm(g, opt.p_g, wy);
    return den > 0 ? lp_norm(Tf.cwiseProduct(Tg), opt.r, wx) / den : 0.0;
  };
  NormEstimate est;
  est.p = opt.p_f;
  est.q = opt.r;
  est.method = "bilinear-alternating";
  double best = -1.0;
  for (int s = 0; s < opt.starts; ++s) {
    Eigen::VectorXcd f = mf.cwiseProduct(random_start(mf.size(), mix_seed(opt.seed, 2 * s)));
    Eigen::VectorXcd g = mg.cwiseProduct(random_start(mg.size(), mix_seed(opt.seed, 2 * s + 1)));
    f /= lp_norm(f, opt.p_f, wy);
    g /= lp_norm(g, opt.p_g, wy);
    Eigen::VectorXcd Tf = op.apply(f), Tg = op.apply(g);
    double prev = ratio(f, g, Tf, Tg);
    std::vector<double> history{prev};
    Eigen::VectorXcd bf = f, bg = g;
    double bval = prev;
    int it = 0;
    bool converged = false;
    while (it < opt.max_iter) {
      ++it;
      Eigen::VectorXcd nf =
          mf.cwiseProduct(duality_map(op.adjoint(Tg.conjugate().cwiseProduct(duality_map(Tf.cwiseProduct(Tg), opt.r))), pfd));
      const double nfn = lp_norm(nf, opt.p_f, wy);
      if (!(nfn > 0)) break;
      f = nf / nfn;
      Tf = op.apply(f);
      Eigen::VectorXcd ng =
          mg.cwiseProduct(duality_map(op.adjoint(Tf.conjugate().cwiseProduct(duality_map(Tf.cwiseProduct(Tg), opt.r))), pgd));
      const double ngn = lp_norm(ng, opt.p_g, wy);
      if (!(ngn > 0)) break;
      g = ng / ngn;
      Tg = op.apply(g);
      require_finite(Tg, "bilinear iteration");
      const double cur = ratio(f, g, Tf, Tg);
      history.push_back(cur);
      if (cur > bval) {
        bval = cur;
        bf = f;
        bg = g;
      }
      if (std::abs(cur - prev) < opt.tol * cur) {
        converged = true;
        break;
      }
      prev = cur;
    }
    ++est.restarts;
    if (bval > best) {
      best = bval;
      est.witness = DiscreteFunction(op.y_grid(), bf);
      est.witness_g = DiscreteFunction(op.y_grid(), bg);
      est.iterations = it;
      est.converged = converged;
      est.history = history;
    }
  }
  const Eigen::VectorXcd Tf = op.apply(est.witness.values), Tg = op.apply(est.witness_g.values);
  est.value = ratio(est.witness.values, est.witness_g.values, Tf, Tg);
  return est;
}

NormEstimate dense_l2_norm(const LinearOperator& op, double cap) {
  const double wx = op.x_grid().cell_volume(), wy = op.y_grid().cell_volume();
  const Eigen::MatrixXcd A = std::sqrt(wx / wy) * assemble_dense(op, cap);
  Eigen::VectorXcd v;
  if (A.cols() <= A.rows()) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(A.adjoint() * A);
    v = es.eigenvectors().col(es.eigenvalues().size() - 1);
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(A * A.adjoint());
    v = A.adjoint() * es.eigenvectors().col(es.eigenvalues().size() - 1);
  }
  NormEstimate est;
  est.method = "dense-oracle";
  est.converged = true;
  est.witness = DiscreteFunction(op.y_grid(), v);
  est.value = evaluate_ratio(op, v, 2.0, 2.0);
  return est;
}

std::string to_string(FitModel m) { return m == FitModel::PurePower ? "pure-power" : "power-times-log"; }

double ScalingFit::predict(double lambda) const {
  double v = intercept + exponent * std::log(lambda);
  if (model == FitModel::PowerTimesLog) v += log_power * std::log(std::log(lambda));
  return std::exp(v);
}

ScalingFit fit_scaling_law(const std::vector<double>& lambdas, const std::vector<double>& values,
                           FitModel model) {
  if (lambdas.size() != values.size()) throw std::invalid_argument("lambdas and values differ in length");
  if (lambdas.size() < 4) throw std::invalid_argument("scaling fit needs at least 4 points");
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (!(lambdas[i] > 1.0)) throw DomainError("scaling fit needs lambda > 1");
    if (i > 0 && !(lambdas[i] > lambdas[i - 1]))
      throw std::invalid_argument("lambdas must be strictly increasing");
    if (!(values[i] > 0.0) || !std::isfinite(values[i]))
      throw DomainError("scaling fit needs positive finite values");
  }
  const int n = static_cast<int>(lambdas.size());
  const int k = model == FitModel::PurePower ? 2 : 3;
  Eigen::MatrixXd X(n, k);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = std::log(lambdas[i]);
    if (k == 3) X(i, 2) = std::log(std::log(lambdas[i]));
    y[i] = std::log(values[i]);
  }
  const Eigen::VectorXd beta = X.colPivHouseholderQr().solve(y);
  ScalingFit fit;
  fit.lambdas = lambdas;
  fit.values = values;
  fit.model = model;
  fit.intercept = beta[0];
  fit.exponent = beta[1];
  if (k == 3) fit.log_power = beta[2];
  const double ss_res = (y - X * beta).squaredNorm();
  const double ss_tot = (y.array() - y.mean()).square().sum();
  fit.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

}  // namespace oscillab
