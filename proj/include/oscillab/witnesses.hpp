#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "oscillab/errors.hpp"
#include "oscillab/operator.hpp"

namespace oscillab {

// Normal-form residuals of the phase at the origin exceed tolerance.
struct PreconditionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// lambda too small for the scale hierarchy of a construction.
struct ScaleError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Planar rectangle {p : |<p - c, u>| <= half_length, |<p - c, u_perp>| <= half_width}.
struct Rectangle {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  Eigen::Vector2d direction = Eigen::Vector2d::UnitY();  // unit, long side
  double half_width = 0.0;
  double half_length = 0.0;

  // Long side parallel to (slope, 1).
  static Rectangle along_slope(const Eigen::Vector2d& center, double slope, double half_width,
                               double half_length);

  double slope() const { return direction.x() / direction.y(); }
  double area() const { return 4.0 * half_width * half_length; }
  bool contains(const Eigen::Vector2d& p, double slack = 0.0) const;
  // Intersection with the horizontal line at height y as [lo, hi]; false if empty.
  bool row_interval(double y, double& lo, double& hi) const;
  double y_min() const;
  double y_max() const;
};

// Fan of rectangles with long sides parallel to (n' delta, 1), |n' delta| <= alpha.
struct RectangleFamily {
  std::vector<Rectangle> rects;
  double delta = 0.0;
  double alpha = 0.0;

  // Family centered at one point: every slope n' delta with |n' delta| <= alpha, short side
  // delta * r and long side r (full lengths).
  static RectangleFamily fan(const Eigen::Vector2d& center, double delta, double alpha, double r);
  double sum_measure() const;
  double short_side() const;
};

struct CompressionResult {
  std::vector<double> translations;  // horizontal shifts v_n, one per rectangle, toward a common anchor
  RectangleFamily compressed;
  double union_measure = 0.0;
  double sum_measure = 0.0;
  double ratio = 1.0;
  double uncompressed_union = 0.0;  // union of the family before translation
  double refinement_change = 0.0;   // relative change of union_measure at half the row spacing
  int depth = 0;                    // binary digits used by the translation scheme
};

// Exact union length per horizontal row, integrated by the midpoint rule over rows of the
// given spacing. Rows are processed in parallel and summed in a fixed order.
double union_measure(const std::vector<Rectangle>& rects, double row_spacing);

// Bit-recursive translations: with slope index k = n' + M written in binary, digit i pivots
// every rectangle with that digit set about the height tau_i, tau_i spread evenly along the
// long side. Rectangles sharing their leading digits overlap down to that pivot, which cuts
// the union by a factor of order 1 / log(alpha / delta). Unions are rasterized at rows of
// (short side) / 8 and checked at (short side) / 16.
CompressionResult besicovitch_compress(const RectangleFamily& family);

enum class WitnessKind { ConstantPhase, Ball, Kakeya };
std::string to_string(WitnessKind kind);

// Region where |T f| is bounded below: an axis box, or a rectangle in d = 2.
struct TubeRegion {
  bool is_rectangle = false;
  Box box;
  Rectangle rect;

  double measure() const;
  Eigen::VectorXd center() const;
  // Lattice including the boundary, per_axis points along each side (1 gives the center).
  std::vector<Eigen::VectorXd> samples(int per_axis) const;
};

// chi_{B}(y) * sign * exp(-i lambda H(y)) on the ball B of the given radius. H is either the
// slice phi(x_ref, y) or the quadratic jet phi_y(a, b)(y - b) + 1/2 (y - b)^T phi_yy(a, b)(y - b).
struct WitnessPiece {
  Eigen::VectorXd center;
  double radius = 0.0;
  double sign = 1.0;
  bool slice = false;
  Eigen::VectorXd x_ref;       // slice only
  Eigen::VectorXd linear;      // jet only
  Eigen::MatrixXd quadratic;   // jet only
  TubeRegion tube;

  bool in_support(const Eigen::VectorXd& y) const { return (y - center).norm() <= radius; }
  double phase_h(const PhaseFunction& phase, const Eigen::VectorXd& y) const;
  Box bounding_box() const;
};

struct WitnessRecipe {
  WitnessKind kind = WitnessKind::ConstantPhase;
  PhasePtr phase;
  double lambda = 0.0;
  double epsilon = 0.1;
  double epsilon_tube = 0.025;
  std::uint64_t seed = 0;
  double decay = 0.0;  // expected min |T f| on a tube is c * lambda^{-decay}
  int local_points = 64;  // per axis, local quadrature grids of the pieces
  std::vector<WitnessPiece> pieces;

  // Sum of the pieces at y.
  cd value(const Eigen::VectorXd& y) const;
  DiscreteFunction sample(const GridSpec& grid) const;
  // Piece i on a midpoint grid over its ball's bounding box.
  DiscreteFunction local_function(std::size_t i) const;
  double support_measure(std::size_t i) const;  // grid-rounded ball measure of piece i
};

// f(y) = exp(-i lambda phi(x0, y)) on |y - y0| <= eps; tube |x - x0|_inf <= c0 eps / lambda
// (the point x0 when lambda = 0). Centers default to the cutoff box centers.
WitnessRecipe build_constant_phase_witness(const OperatorConfig& config, double eps = 0.1,
                                           double c0 = 1.0);

// Chirp-modulated indicator of |y| <= eps lambda^{-1/3} for a phase in normal form at the
// origin; tube |x'| <= eps' lambda^{-2/3}, |x_d| <= eps' lambda^{-1/3} with eps' = eps / 4.
WitnessRecipe build_ball_witness(const OperatorConfig& config, double eps = 0.1,
                                 double nf_vanish_tol = 1e-8, double nf_nonzero_tol = 1e-4);

struct KakeyaOptions {
  double eps = 0.1;              // ball radius eps lambda^{-1/3}
  double direction_scale = 1.0;  // |n'| <= direction_scale lambda^{1/6}
  double plate_scale = 0.5;      // |n_d| <= plate_scale lambda^{1/6}
  std::uint64_t seed = 0;
};

struct KakeyaPlate {
  int n_d = 0;
  RectangleFamily family;       // tubes before translation, all centered on the plate axis
  CompressionResult compression;
  std::vector<std::size_t> pieces;  // indices into the recipe's pieces
};

struct KakeyaWitness {
  WitnessRecipe recipe;   // pieces carry Rademacher signs and their translated tubes
  std::vector<KakeyaPlate> plates;
  double delta = 0.0;     // lambda^{-1/3}
  double alpha = 0.0;     // direction spread
  DiscreteFunction combined;  // sum of signed pieces on a grid covering all balls
  int overlapping_nodes = 0;  // nodes of `combined` inside two or more balls
};

// Randomized tube family of the model fold phase in d = 2 (phase in global normal form).
// Requires lambda >= 2^12.
KakeyaWitness build_kakeya_witness(const OperatorConfig& config, const KakeyaOptions& opt = {});

// T f at arbitrary points by direct summation over the nodes of f's grid, unlocalized kernel.
Eigen::VectorXcd evaluate_at_points(const OperatorConfig& config, const DiscreteFunction& f,
                                    const std::vector<Eigen::VectorXd>& points,
                                    bool parallel = true);

struct TubeReport {
  std::vector<double> min_on_tube;   // per piece
  std::vector<double> c_effective;   // min * lambda^{decay} per piece
  double min_overall = 0.0;
  double c_min = 0.0, c_max = 0.0;
  bool degenerate = false;  // some f_i vanishes or some tube minimum is zero
};

// Evaluates |T f_i| on each piece's tube lattice using its local quadrature grid.
TubeReport verify_tube_lower_bound(const WitnessRecipe& recipe, const OperatorConfig& config,
                                   int samples_per_axis = 9);

// Lorentz ratio certified by the tube: min |T f| |tube|^{1/q} / ||f||_{p,1}, with ||f||_{p,1}
// = |supp f|^{1/p} for unimodular f (1 when p is infinite). Uses piece i.
double certified_ratio(const WitnessRecipe& recipe, const TubeReport& report, double p, double q,
                       std::size_t i = 0);

}  // namespace oscillab
