#include "oscillab/witnesses.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>

#include "oscillab/geometry.hpp"
#include "oscillab/parallel.hpp"

namespace oscillab {

namespace {

constexpr int kUnionChunks = 256;

// Fixed-size chunks so the summation order does not depend on the thread count.
double integrate_rows(const std::vector<Rectangle>& rects, double y0, double h, long rows) {
  std::vector<double> chunk_sum(kUnionChunks, 0.0);
  parallel_for(0, kUnionChunks, [&](std::ptrdiff_t c) {
    const long lo = rows * c / kUnionChunks, hi = rows * (c + 1) / kUnionChunks;
    std::vector<std::pair<double, double>> iv;
    iv.reserve(rects.size());
    double acc = 0.0;
    for (long r = lo; r < hi; ++r) {
      const double y = y0 + (r + 0.5) * h;
      iv.clear();
      for (const auto& rect : rects) {
        double a, b;
        if (rect.row_interval(y, a, b)) iv.emplace_back(a, b);
      }
      if (iv.empty()) continue;
      std::sort(iv.begin(), iv.end());
      double cur_lo = iv[0].first, cur_hi = iv[0].second, len = 0.0;
      for (std::size_t i = 1; i < iv.size(); ++i) {
        if (iv[i].first > cur_hi) {
          len += cur_hi - cur_lo;
          cur_lo = iv[i].first;
          cur_hi = iv[i].second;
        } else {
          cur_hi = std::max(cur_hi, iv[i].second);
        }
      }
      acc += len + (cur_hi - cur_lo);
    }
    chunk_sum[c] = acc;
  });
  double total = 0.0;
  for (double s : chunk_sum) total += s;
  return total * h;
}

void require_inside(const Box& outer, const Box& inner, const std::string& what) {
  if (!outer.contains(inner)) throw ConfigError(what + " does not fit inside the domain box");
}

GridSpec ball_grid(const Box& box, int per_axis) {
  GridSpec g;
  g.box = box;
  g.counts.assign(box.dim(), per_axis);
  return g;
}

}  // namespace

Rectangle Rectangle::along_slope(const Eigen::Vector2d& center, double slope, double half_width,
                                 double half_length) {
  Rectangle r;
  r.center = center;
  r.direction = Eigen::Vector2d(slope, 1.0).normalized();
  r.half_width = half_width;
  r.half_length = half_length;
  return r;
}

bool Rectangle::contains(const Eigen::Vector2d& p, double slack) const {
  const Eigen::Vector2d d = p - center;
  const Eigen::Vector2d normal(direction.y(), -direction.x());
  return std::abs(d.dot(direction)) <= half_length + slack &&
         std::abs(d.dot(normal)) <= half_width + slack;
}

bool Rectangle::row_interval(double y, double& lo, double& hi) const {
  const double ux = direction.x(), uy = direction.y(), dy = y - center.y();
  lo = -INFINITY;
  hi = INFINITY;
  // |(x - cx) ux + dy uy| <= half_length and |(x - cx) uy - dy ux| <= half_width.
  auto clip = [&](double coef, double shift, double half) {
    if (std::abs(coef) < 1e-300) return std::abs(shift) <= half;
    double a = (-half - shift) / coef, b = (half - shift) / coef;
    if (a > b) std::swap(a, b);
    lo = std::max(lo, a);
    hi = std::min(hi, b);
    return true;
  };
  if (!clip(ux, dy * uy, half_length) || !clip(uy, -dy * ux, half_width)) return false;
  if (lo >= hi) return false;
  lo += center.x();
  hi += center.x();
  return true;
}

double Rectangle::y_min() const {
  return center.y() - half_length * std::abs(direction.y()) - half_width * std::abs(direction.x());
}

double Rectangle::y_max() const {
  return center.y() + half_length * std::abs(direction.y()) + half_width * std::abs(direction.x());
}

RectangleFamily RectangleFamily::fan(const Eigen::Vector2d& center, double delta, double alpha,
                                     double r) {
  if (!(delta > 0) || !(alpha >= 0) || !(r > 0))
    throw ConfigError("rectangle fan needs delta > 0, alpha >= 0, r > 0");
  RectangleFamily fam;
  fam.delta = delta;
  fam.alpha = alpha;
  const int M = static_cast<int>(std::floor(alpha / delta + 1e-9));
  for (int n = -M; n <= M; ++n)
    fam.rects.push_back(Rectangle::along_slope(center, n * delta, 0.5 * delta * r, 0.5 * r));
  return fam;
}

double RectangleFamily::sum_measure() const {
  double s = 0.0;
  for (const auto& r : rects) s += r.area();
  return s;
}

double RectangleFamily::short_side() const {
  double s = INFINITY;
  for (const auto& r : rects) s = std::min(s, 2.0 * r.half_width);
  return s;
}

double union_measure(const std::vector<Rectangle>& rects, double row_spacing) {
  if (rects.empty()) return 0.0;
  if (!(row_spacing > 0)) throw ConfigError("row spacing must be positive");
  double y0 = INFINITY, y1 = -INFINITY;
  for (const auto& r : rects) {
    y0 = std::min(y0, r.y_min());
    y1 = std::max(y1, r.y_max());
  }
  const long rows = std::max(1L, static_cast<long>(std::ceil((y1 - y0) / row_spacing)));
  return integrate_rows(rects, y0, (y1 - y0) / rows, rows);
}

CompressionResult besicovitch_compress(const RectangleFamily& family) {
  CompressionResult out;
  const std::size_t n = family.rects.size();
  out.translations.assign(n, 0.0);
  out.compressed = family;
  out.sum_measure = family.sum_measure();
  if (n < 2) {
    out.union_measure = out.uncompressed_union = out.sum_measure;
    out.ratio = 1.0;
    return out;
  }
  const double delta = family.delta, alpha = family.alpha;
  if (!(delta > 0) || !(alpha >= 0)) throw ConfigError("compression needs delta > 0, alpha >= 0");
  const double L = 2.0 * family.rects[0].half_length;
  const int M = static_cast<int>(std::floor(alpha / delta + 1e-9));
  std::vector<int> index(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = family.rects[i];
    if (std::abs(2.0 * r.half_length - L) > 1e-9 * L)
      throw ConfigError("compression needs equal long sides");
    if (!(r.direction.y() > 0)) throw ConfigError("rectangle directions must point upward");
    const double s = r.slope();
    const long np = std::lround(s / delta);
    if (std::abs(s - np * delta) > 1e-6 * delta || std::abs(np) > M)
      throw ConfigError("directions must form the fan (n' delta, 1) with |n' delta| <= alpha");
    index[i] = static_cast<int>(np) + M;
  }
  const int m = std::max(1, static_cast<int>(std::ceil(std::log2(2.0 * M + 1.0) - 1e-12)));
  out.depth = m;
  // Digit i (most significant first) pivots at height tau_i relative to the center.
  std::vector<double> tau(m);
  for (int i = 0; i < m; ++i) tau[i] = -0.5 * L + L * (i + 0.5) / m;
  double vmin = INFINITY, vmax = -INFINITY;
  for (std::size_t k = 0; k < n; ++k) {
    double v = 0.0;
    for (int i = 0; i < m; ++i)
      if ((index[k] >> (m - 1 - i)) & 1) v -= delta * std::ldexp(1.0, m - 1 - i) * tau[i];
    out.translations[k] = v;
    vmin = std::min(vmin, v);
    vmax = std::max(vmax, v);
  }
  // Every rectangle is moved to the common anchor plus its digit shift, so rectangles with the
  // same slope index end up on top of each other.
  double anchor = 0.0;
  for (const auto& r : family.rects) anchor += r.center.x();
  anchor /= static_cast<double>(n);
  const double mid = 0.5 * (vmin + vmax);
  for (std::size_t k = 0; k < n; ++k) {
    out.translations[k] += anchor - mid - family.rects[k].center.x();
    out.compressed.rects[k].center.x() += out.translations[k];
  }
  const double h = family.short_side() / 8.0;
  out.uncompressed_union = union_measure(family.rects, h);
  out.union_measure = union_measure(out.compressed.rects, h);
  const double refined = union_measure(out.compressed.rects, 0.5 * h);
  out.refinement_change = std::abs(out.union_measure - refined) / refined;
  out.ratio = out.union_measure / out.sum_measure;
  return out;
}

std::string to_string(WitnessKind kind) {
  switch (kind) {
    case WitnessKind::ConstantPhase:
      return "constant-phase";
    case WitnessKind::Ball:
      return "ball";
    case WitnessKind::Kakeya:
      return "kakeya";
  }
  return "unknown";
}

double TubeRegion::measure() const { return is_rectangle ? rect.area() : box.volume(); }

Eigen::VectorXd TubeRegion::center() const {
  if (is_rectangle) return rect.center;
  return box.center();
}

std::vector<Eigen::VectorXd> TubeRegion::samples(int per_axis) const {
  per_axis = std::max(1, per_axis);
  auto node = [per_axis](int i) { return per_axis == 1 ? 0.0 : -1.0 + 2.0 * i / (per_axis - 1); };
  std::vector<Eigen::VectorXd> pts;
  if (is_rectangle) {
    const Eigen::Vector2d normal(rect.direction.y(), -rect.direction.x());
    for (int i = 0; i < per_axis; ++i)
      for (int j = 0; j < per_axis; ++j)
        pts.emplace_back(rect.center + node(i) * rect.half_length * rect.direction +
                         node(j) * rect.half_width * normal);
    return pts;
  }
  const int d = box.dim();
  std::vector<int> idx(d, 0);
  while (true) {
    Eigen::VectorXd p(d);
    for (int a = 0; a < d; ++a)
      p[a] = box.center()[a] + 0.5 * node(idx[a]) * (box.hi[a] - box.lo[a]);
    pts.push_back(p);
    int a = d - 1;
    while (a >= 0 && ++idx[a] == per_axis) idx[a--] = 0;
    if (a < 0) break;
  }
  return pts;
}

double WitnessPiece::phase_h(const PhaseFunction& phase, const Eigen::VectorXd& y) const {
  if (slice) return phase.eval(x_ref, y);
  const Eigen::VectorXd u = y - center;
  return linear.dot(u) + 0.5 * u.dot(quadratic * u);
}

Box WitnessPiece::bounding_box() const {
  return Box::centered(center, Eigen::VectorXd::Constant(center.size(), 2.0 * radius));
}

cd WitnessRecipe::value(const Eigen::VectorXd& y) const {
  cd v = 0.0;
  for (const auto& piece : pieces)
    if (piece.in_support(y)) v += piece.sign * std::polar(1.0, -lambda * piece.phase_h(*phase, y));
  return v;
}

DiscreteFunction WitnessRecipe::sample(const GridSpec& grid) const {
  DiscreteFunction f(grid);
  parallel_for(0, grid.size(), [&](std::ptrdiff_t k) { f.values[k] = value(grid.point(k)); });
  return f;
}

DiscreteFunction WitnessRecipe::local_function(std::size_t i) const {
  const WitnessPiece& piece = pieces.at(i);
  const GridSpec grid = ball_grid(piece.bounding_box(), local_points);
  DiscreteFunction f(grid);
  for (Eigen::Index k = 0; k < grid.size(); ++k) {
    const Eigen::VectorXd y = grid.point(k);
    if (piece.in_support(y)) f.values[k] = piece.sign * std::polar(1.0, -lambda * piece.phase_h(*phase, y));
  }
  return f;
}

double WitnessRecipe::support_measure(std::size_t i) const {
  const WitnessPiece& piece = pieces.at(i);
  const GridSpec grid = ball_grid(piece.bounding_box(), local_points);
  Eigen::Index count = 0;
  for (Eigen::Index k = 0; k < grid.size(); ++k) count += piece.in_support(grid.point(k));
  return count * grid.cell_volume();
}

WitnessRecipe build_constant_phase_witness(const OperatorConfig& config, double eps, double c0) {
  config.validate();
  if (!(eps > 0) || !(c0 > 0)) throw ConfigError("constant-phase witness needs eps > 0, c0 > 0");
  const Eigen::VectorXd x0 = config.cutoff.x_box.center(), y0 = config.cutoff.y_box.center();
  const int d = config.phase->dim();
  WitnessRecipe r;
  r.kind = WitnessKind::ConstantPhase;
  r.phase = config.phase;
  r.lambda = config.lambda;
  r.epsilon = eps;
  r.epsilon_tube = c0 * eps;
  r.decay = 0.0;
  WitnessPiece piece;
  piece.center = y0;
  piece.radius = eps;
  piece.slice = true;
  piece.x_ref = x0;
  const double half = config.lambda > 0 ? c0 * eps / config.lambda : 0.0;
  piece.tube.box = Box::centered(x0, Eigen::VectorXd::Constant(d, 2.0 * half));
  require_inside(config.cutoff.y_box, piece.bounding_box(), "witness ball");
  require_inside(config.cutoff.x_box, piece.tube.box, "witness tube");
  r.pieces.push_back(std::move(piece));
  return r;
}

WitnessRecipe build_ball_witness(const OperatorConfig& config, double eps, double nf_vanish_tol,
                                 double nf_nonzero_tol) {
  config.validate();
  if (!(config.lambda > 0) || !(eps > 0)) throw ConfigError("ball witness needs lambda > 0, eps > 0");
  const PhaseFunction& phase = *config.phase;
  const int d = phase.dim();
  double vanish = 0.0, nonzero = INFINITY;
  // Pure y derivatives are allowed: the chirp removes orders 1 and 2 and order 3 contributes
  // lambda |y|^3 <= eps^3 on the ball.
  for (const auto& q : normal_form_quantities(phase)) {
    if (q.name == "y_derivatives") continue;
    if (q.must_vanish)
      vanish = std::max(vanish, std::abs(q.value));
    else
      nonzero = std::min(nonzero, std::abs(q.value));
  }
  if (vanish > nf_vanish_tol || nonzero < nf_nonzero_tol)
    throw PreconditionError("phase is not in normal form at the origin (residual " +
                            std::to_string(vanish) + ", smallest nonzero " +
                            std::to_string(nonzero) + ")");
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(d);
  const Jet jet = phase.jet(zero, zero, 2);
  WitnessRecipe r;
  r.kind = WitnessKind::Ball;
  r.phase = config.phase;
  r.lambda = config.lambda;
  r.epsilon = eps;
  r.epsilon_tube = eps / 4.0;
  r.decay = d / 3.0;
  WitnessPiece piece;
  piece.center = zero;
  piece.radius = eps * std::cbrt(1.0 / config.lambda);
  piece.linear = jet.grad.tail(d);
  piece.quadratic = jet.hess.bottomRightCorner(d, d);
  Eigen::VectorXd side = Eigen::VectorXd::Constant(d, 2.0 * r.epsilon_tube * std::pow(config.lambda, -2.0 / 3.0));
  side[d - 1] = 2.0 * r.epsilon_tube * std::cbrt(1.0 / config.lambda);
  piece.tube.box = Box::centered(zero, side);
  require_inside(config.cutoff.y_box, piece.bounding_box(), "witness ball");
  require_inside(config.cutoff.x_box, piece.tube.box, "witness tube");
  r.pieces.push_back(std::move(piece));
  return r;
}

KakeyaWitness build_kakeya_witness(const OperatorConfig& config, const KakeyaOptions& opt) {
  config.validate();
  const auto* mf = dynamic_cast<const ModelFoldPhase*>(config.phase.get());
  if (!mf || mf->dim() != 2)
    throw ConfigError("the tube family is built for the d = 2 model fold phase only");
  const double lambda = config.lambda;
  if (lambda < 4096.0)
    throw ScaleError("tube family needs lambda >= 2^12 so that lambda^{-1/6} >> lambda^{-1/3}");
  const PhaseFunction& phase = *config.phase;
  KakeyaWitness out;
  const double delta = std::cbrt(1.0 / lambda);
  const double sixth = std::pow(lambda, 1.0 / 6.0);
  const int M = static_cast<int>(std::floor(opt.direction_scale * sixth + 1e-9));
  const int P = static_cast<int>(std::floor(opt.plate_scale * sixth + 1e-9));
  out.delta = delta;
  out.alpha = M * delta;
  const double eps_t = opt.eps / 4.0;
  const double half_len = eps_t * delta;  // eps' lambda^{-1/3}
  const Box& yb = config.cutoff.y_box;

  WitnessRecipe& r = out.recipe;
  r.kind = WitnessKind::Kakeya;
  r.phase = config.phase;
  r.lambda = lambda;
  r.epsilon = opt.eps;
  r.epsilon_tube = eps_t;
  r.seed = opt.seed;
  r.decay = 2.0 / 3.0;

  // sigma(y1, a_d) = -phi_{x_d y'} phi^{y'x'} at (0, a_d, y1, g(0, a_d, y1)).
  auto fold_point = [&](double a_d, double y1) {
    Eigen::VectorXd x(2), yp(1);
    x << 0.0, a_d;
    yp << y1;
    const double g = fold_coordinate(phase, x, yp, yb.lo[1], yb.hi[1]);
    return insert_fold_coordinate(phase, yp, g);
  };
  auto sigma = [&](double a_d, double y1) {
    Eigen::VectorXd x(2);
    x << 0.0, a_d;
    const Eigen::MatrixXd mixed = phase.jet(x, fold_point(a_d, y1), 2).mixed_hessian();
    return -mixed(1, 0) / mixed(0, 0);
  };
  auto solve_b1 = [&](double a_d, double s) {
    double lo = yb.lo[0], hi = yb.hi[0];
    double flo = sigma(a_d, lo) - s, fhi = sigma(a_d, hi) - s;
    if (flo * fhi > 0) throw ConfigError("direction outside the range of the fold normal map");
    for (int it = 0; it < 100 && hi - lo > 1e-15; ++it) {
      const double mid = 0.5 * (lo + hi), fm = sigma(a_d, mid) - s;
      if ((fm > 0) == (flo > 0)) {
        lo = mid;
        flo = fm;
      } else {
        hi = mid;
      }
    }
    return 0.5 * (lo + hi);
  };

  std::mt19937_64 rng(opt.seed);
  for (int nd = -P; nd <= P; ++nd) {
    KakeyaPlate plate;
    plate.n_d = nd;
    const double a_d = nd * delta;
    plate.family = RectangleFamily::fan(Eigen::Vector2d(0.0, a_d), delta, out.alpha, 2.0 * half_len);
    plate.compression = besicovitch_compress(plate.family);
    for (std::size_t k = 0; k < plate.family.rects.size(); ++k) {
      const Rectangle& tube = plate.compression.compressed.rects[k];
      const double s = tube.slope();
      Eigen::VectorXd b(2);
      b << solve_b1(a_d, s), 0.0;
      b = fold_point(a_d, b[0]);
      const Eigen::VectorXd a = tube.center;
      const Jet jet = phase.jet(a, b, 2);
      WitnessPiece piece;
      piece.center = b;
      piece.radius = opt.eps * delta;
      piece.linear = jet.grad.tail(2);
      piece.quadratic = jet.hess.bottomRightCorner(2, 2);
      piece.sign = (rng() >> 63) ? 1.0 : -1.0;
      piece.tube.is_rectangle = true;
      piece.tube.rect = tube;
      require_inside(yb, piece.bounding_box(), "tube family ball");
      Box tube_box(Eigen::Vector2d(tube.center.x() - half_len, tube.y_min()),
                   Eigen::Vector2d(tube.center.x() + half_len, tube.y_max()));
      require_inside(config.cutoff.x_box, tube_box, "tube");
      plate.pieces.push_back(r.pieces.size());
      r.pieces.push_back(std::move(piece));
    }
    out.plates.push_back(std::move(plate));
  }

  // Covering grid with 16 nodes per ball diameter.
  Eigen::Vector2d lo = Eigen::Vector2d::Constant(INFINITY), hi = -lo;
  for (const auto& p : r.pieces) {
    const Box bb = p.bounding_box();
    lo = lo.cwiseMin(Eigen::Vector2d(bb.lo));
    hi = hi.cwiseMax(Eigen::Vector2d(bb.hi));
  }
  const double h = opt.eps * delta / 8.0;
  GridSpec grid;
  grid.box = Box(lo, hi);
  for (int a = 0; a < 2; ++a) grid.counts.push_back(static_cast<int>(std::ceil((hi[a] - lo[a]) / h)));
  out.combined = r.sample(grid);
  std::vector<int> hits(grid.size(), 0);
  parallel_for(0, grid.size(), [&](std::ptrdiff_t k) {
    const Eigen::VectorXd y = grid.point(k);
    for (const auto& p : r.pieces) hits[k] += p.in_support(y);
  });
  out.overlapping_nodes = static_cast<int>(std::count_if(hits.begin(), hits.end(), [](int c) { return c > 1; }));
  return out;
}

Eigen::VectorXcd evaluate_at_points(const OperatorConfig& config, const DiscreteFunction& f,
                                    const std::vector<Eigen::VectorXd>& points, bool parallel) {
  if (config.localization.kind != LocalizationKind::None)
    throw ConfigError("pointwise evaluation uses the unlocalized kernel");
  std::vector<Eigen::VectorXd> ys;
  std::vector<cd> weights;
  const double cell = f.grid.cell_volume();
  for (Eigen::Index k = 0; k < f.size(); ++k) {
    if (f.values[k] == cd(0.0)) continue;
    const Eigen::VectorXd y = f.grid.point(k);
    const double w = config.cutoff.y_factor(y);
    if (w == 0.0) continue;
    ys.push_back(y);
    weights.push_back(f.values[k] * w * cell);
  }
  Eigen::VectorXcd out(points.size());
  auto body = [&](std::ptrdiff_t j) {
    const Eigen::VectorXd& x = points[j];
    const double cx = config.cutoff.scale * config.cutoff.x_factor(x);
    cd acc = 0.0;
    if (cx != 0.0)
      for (std::size_t k = 0; k < ys.size(); ++k)
        acc += weights[k] * std::polar(1.0, config.lambda * config.phase->eval(x, ys[k]));
    out[j] = cx * acc;
  };
  if (parallel)
    parallel_for(0, static_cast<std::ptrdiff_t>(points.size()), body);
  else
    for (std::size_t j = 0; j < points.size(); ++j) body(static_cast<std::ptrdiff_t>(j));
  return out;
}

TubeReport verify_tube_lower_bound(const WitnessRecipe& recipe, const OperatorConfig& config,
                                   int samples_per_axis) {
  if (config.lambda != recipe.lambda) throw ConfigError("witness and operator lambda differ");
  if (config.phase->name() != recipe.phase->name())
    throw ConfigError("witness and operator phase differ");
  const std::size_t n = recipe.pieces.size();
  TubeReport rep;
  rep.min_on_tube.assign(n, 0.0);
  rep.c_effective.assign(n, 0.0);
  std::vector<char> empty(n, 0);
  const double norm = recipe.lambda > 0 ? std::pow(recipe.lambda, recipe.decay) : 1.0;
  auto one = [&](std::size_t i, bool inner_parallel) {
    const DiscreteFunction f = recipe.local_function(i);
    empty[i] = f.values.cwiseAbs().maxCoeff() == 0.0;
    const auto pts = recipe.pieces[i].tube.samples(samples_per_axis);
    const Eigen::VectorXcd v = evaluate_at_points(config, f, pts, inner_parallel);
    rep.min_on_tube[i] = v.cwiseAbs().minCoeff();
    rep.c_effective[i] = rep.min_on_tube[i] * norm;
  };
  if (n == 1)
    one(0, true);
  else
    parallel_for(0, static_cast<std::ptrdiff_t>(n), [&](std::ptrdiff_t i) { one(i, false); });
  if (n == 0) {
    rep.degenerate = true;
    return rep;
  }
  rep.min_overall = *std::min_element(rep.min_on_tube.begin(), rep.min_on_tube.end());
  rep.c_min = *std::min_element(rep.c_effective.begin(), rep.c_effective.end());
  rep.c_max = *std::max_element(rep.c_effective.begin(), rep.c_effective.end());
  rep.degenerate = rep.min_overall == 0.0 || std::any_of(empty.begin(), empty.end(), [](char e) { return e; });
  return rep;
}

double certified_ratio(const WitnessRecipe& recipe, const TubeReport& report, double p, double q,
                       std::size_t i) {
  const double f_norm = std::isinf(p) ? 1.0 : std::pow(recipe.support_measure(i), 1.0 / p);
  if (f_norm == 0.0) return 0.0;
  return report.min_on_tube.at(i) * std::pow(recipe.pieces.at(i).tube.measure(), 1.0 / q) / f_norm;
}

}  // namespace oscillab
