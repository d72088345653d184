#pragma once

#include <functional>

#include "ialpha/solver.hpp"

namespace ialpha {

/// Reflection across the hyperplane {x_n = lambda} (last coordinate).
Vec reflect(const Vec& x, double lambda);

/// Scalar field on the flat chart.
using FieldFn = std::function<double(const Vec&)>;

/// Field evaluator for a nodal field on a chart, folded through the deck
/// group. weight_exponent as in ChartInterpolator.
FieldFn make_chart_field(const Chart& chart, const Vec& values, double weight_exponent);

/// Conformal re-projection of a flat field: value(x) = base(mu^{-1} x) *
/// |(mu^{-1})'(x)|_e^{(n-alpha)/2}. Solutions of the flat integral equation
/// map to solutions; limit points move with mu.
FieldFn kelvin_transform(FieldFn base, const MoebiusMap& mu, const ProblemSpec& spec);

/// Evaluator of a calibrated bubble.
FieldFn make_bubble_field(const ProblemSpec& spec, const Bubble& b);

/// base composed with a rotation of the chart (for axis-relabeling checks).
FieldFn rotate_field(FieldFn base, const Mat& rotation);

struct MovingPlaneOptions {
  int n = 3;
  double box_halfwidth = 3.0;
  int samples_per_axis = 24;
  double floor = 1e-3;       // interpolation tolerance entering all decisions
  double fd_step = 1e-3;     // one-sided difference step at the plane
  bool limit_contains_infinity = false;
};

struct MovingPlaneReport {
  std::vector<double> lambdas;
  std::vector<bool> scanned;               // false when clearance <= 0
  std::vector<double> clearance;           // plane distance to the sampled limit set
  std::vector<double> sigma_minus_measure; // cells where v_lambda < v - floor
  std::vector<double> min_gap;             // min over samples of v_lambda - v
  double boundary_derivative = 0.0;        // one-sided normal derivative at x_n = 0
  bool boundary_derivative_evaluated = false;
  double limit_set_clearance = 0.0;        // clearance at the smallest scanned lambda
};

/// Moving-plane diagnostics: for each lambda (strictly decreasing) with the
/// half-space {x_n > lambda} clear of the sampled limit set, samples the
/// comparison with the reflected field on a box grid.
MovingPlaneReport moving_plane_scan(const FieldFn& vhat,
                                    const std::vector<double>& lambdas,
                                    const std::vector<Vec>& limit_points,
                                    const MovingPlaneOptions& opts = {});

struct RescaledField {
  Mat points;   // sample cube, flattened
  Vec values;
  double lambda = 1.0;
  double window = 0.0;          // realized half-width (after clipping)
  bool clipped = false;
  Vec center;                   // chart coordinates of p0
  double sigma = 1.0;           // physical scale of the window map
  double center_value = 0.0;    // v_lambda(0) = u(p0)/lambda
};

/// Zoomed field v_lambda(x) = u(zeta_lambda(x)) / lambda around node p0,
/// where zeta_lambda shrinks by lambda^{-2/(n-alpha)} with the conformal
/// normalization of the chart at p0. The window is clipped away from the
/// limit set.
RescaledField rescale(const SolutionField& u, const Chart& chart,
                      const ProblemSpec& spec, int p0_index, double lambda,
                      double window, int samples_per_axis = 17);

/// Sup over well-separated sample pairs in the ball of radius `window` of
///   | lambda^{-2} K(zeta_lambda x, zeta_lambda y) - c(n,a) |x-y|^{a-n} |.
double kernel_flat_limit_gap(const ProblemSpec& spec, const KleinianGroup& group,
                             const Vec& z0, double lambda, double window,
                             int cutoff, int npairs = 40);

struct BubbleFit {
  Bubble bubble;
  double fit_residual = 0.0;  // relative sup misfit
  bool converged = false;
};

/// Nonlinear least squares over (t, center, amplitude) of the bubble family.
BubbleFit bubble_fit(const Mat& points, const Vec& values, const ProblemSpec& spec);

struct ContinuationOptions {
  double step = 0.1;
  double bound = 10.0;  // admissible-set bound on sup u and sup 1/u
  AssemblyOptions assembly;
  SolveOptions solve;
  Tolerances tol;
};

struct ContinuationStep {
  double alpha = 0.0;
  SolutionField solution;
  double sup_norm = 0.0;
  double inf_value = 0.0;
  double residual = 0.0;
  double yamabe = 0.0;
  double bound_lhs = 0.0;
  double bound_rhs = 0.0;
};

struct ContinuationPath {
  std::vector<ContinuationStep> steps;
  bool completed = false;
  bool compact = false;   // sup and 1/inf within the configured bound throughout
  std::string failure;
  double last_good_alpha = 0.0;
};

/// Solves along alpha in [alpha_lo, alpha_hi], warm-starting each step from
/// the previous solution; the first solve starts from the constant guess.
/// Requires alpha_hi < n - 2 * exponent_estimate(group).
ContinuationPath continue_alpha(const Chart& chart, double alpha_lo, double alpha_hi,
                                const ContinuationOptions& opts = {});

}  // namespace ialpha
