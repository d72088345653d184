#pragma once

#include "ialpha/mobius.hpp"
#include "ialpha/util.hpp"

namespace ialpha {

/// R^n -> unit sphere in R^{n+1}; the base point (0,...,0,1) is the image of
/// infinity and x = 0 maps to its antipode.
template <typename Derived>
Eigen::VectorXd stereographic_lift(const Eigen::MatrixBase<Derived>& x) {
  const auto n = x.size();
  double q = x.squaredNorm();
  Eigen::VectorXd p(n + 1);
  p.head(n) = 2.0 * x / (1.0 + q);
  p[n] = (q - 1.0) / (q + 1.0);
  return p;
}

/// Inverse of stereographic_lift; the base point itself maps to infinity.
ExtPoint stereographic_chart(const Vec& p);

/// 2/(1 + |x|^2), the conformal factor of the round metric in the chart.
template <typename Derived>
double conformal_factor(const Eigen::MatrixBase<Derived>& x) {
  return 2.0 / (1.0 + x.squaredNorm());
}

/// |lift(x) - lift(y)| = 2|x-y| / sqrt((1+|x|^2)(1+|y|^2)).
template <typename DA, typename DB>
double chordal_distance(const Eigen::MatrixBase<DA>& x, const Eigen::MatrixBase<DB>& y) {
  return 2.0 * (x - y).norm() /
         std::sqrt((1.0 + x.squaredNorm()) * (1.0 + y.squaredNorm()));
}

template <typename Derived>
double chordal_distance_to_infinity(const Eigen::MatrixBase<Derived>& x) {
  return 2.0 / std::sqrt(1.0 + x.squaredNorm());
}

/// vol(S^n) for the unit round sphere.
double sphere_volume(int n);

enum class ChartKind { SphereFullChart, DilationShell };

/// Quadrature nodes of a fundamental domain in the flat chart, with Lebesgue
/// weights and the per-node conformal factor of the round representative
/// metric. Nodes form a product grid: axis0 x axis1 x axis2 with
/// node(i0,i1,i2) stored at ((i0*n1)+i1)*n2+i2.
///
/// SphereFullChart: axis0 = polar angle on (0,pi), axis1 = cosine of the
/// second angle, axis2 = azimuth (uniform, periodic).
/// DilationShell: axis0 = log radius on (0, log k), axis1 = cosine polar,
/// axis2 = azimuth.
struct Chart {
  int n = 3;
  ChartKind kind = ChartKind::SphereFullChart;
  Mat nodes;    // N x n
  Vec weights;  // flat Lebesgue weights
  Vec eta;      // conformal factor per node
  KleinianGroup group;

  Vec axis0, axis1, axis2;
  Vec edges0, edges1, edges2;  // cell boundaries per axis (size + 1)
  int deck_phi_shift = 0;  // azimuth grid cells advanced by the deck rotation
  bool grid_valid = true;  // false for transported charts

  int size() const { return static_cast<int>(nodes.rows()); }
  int n0() const { return static_cast<int>(axis0.size()); }
  int n1() const { return static_cast<int>(axis1.size()); }
  int n2() const { return static_cast<int>(axis2.size()); }
  int index(int i0, int i1, int i2) const { return (i0 * n1() + i1) * n2() + i2; }
};

/// Physical point of the chart at grid coordinates (c0, c1, c2).
Vec chart_point(const Chart& chart, double c0, double c1, double c2);

/// Density of the round-metric volume in grid coordinates, a function of the
/// first coordinate only: sin^2(theta) for the sphere chart and
/// (2 e^rho / (1 + e^{2 rho}))^3 e^... for the shell (eta^3 times the flat
/// Jacobian).
double chart_measure_density(const Chart& chart, double c0);

/// Sub-cell midpoint nodes of the cell of a node, s per axis, with
/// round-metric measure weights. Used by the near-field kernel quadrature.
struct SubCell {
  Mat pts;   // s^3 x n physical points
  Vec meas;  // measure weights (sum approximates the cell's round volume)
};
SubCell chart_subcell(const Chart& chart, int node_index, int s);
SubCell chart_subcell(const Chart& chart, int node_index, int s0, int s1, int s2);

/// Chordal extents of the cell of a node along the three grid axes.
Eigen::Vector3d chart_cell_extents(const Chart& chart, int node_index);

/// Builds the quadrature chart for the group's fundamental domain. Supported:
/// trivial groups (full sphere chart) and cyclic dilation(-rotation) groups
/// (shell 1 <= |x| < k). resolution is the node count per axis.
Chart build_chart(const KleinianGroup& group, int resolution, int n);

/// Variant with distinct per-axis resolutions.
Chart build_chart(const KleinianGroup& group, int r0, int r1, int r2, int n);

/// Sum of w * eta^n, the volume of (M, g).
double chart_volume(const Chart& chart);

/// Nodes mapped through gamma, Lebesgue weights transported with the Jacobian
/// |gamma'|_e^n, conformal factor re-evaluated from the formula (the round
/// representative of the translated fundamental domain).
Chart transport_chart(const Chart& chart, const MoebiusMap& gamma);

/// v = u .* eta^((n-alpha)/2): the flat unfolded field.
Vec unfold(const Vec& u, const Chart& chart, double alpha);
/// Inverse of unfold.
Vec pushdown(const Vec& vhat, const Chart& chart, double alpha);

/// Evaluates a nodal field anywhere in the chart's orbit by tensor-product
/// cubic interpolation in grid coordinates. Points outside the fundamental
/// domain of a shell chart are folded back with the deck transformation and
/// weighted by |deck'|_e^{-weight_exponent} per copy: use (n-alpha)/2 for
/// unfolded flat fields, 0 for periodic fields.
class ChartInterpolator {
 public:
  ChartInterpolator(const Chart& chart, const Vec& nodal_values, double weight_exponent);

  double operator()(const Vec& x) const;

 private:
  const Chart& chart_;
  double wexp_;
  Vec padded_;  // shell charts: ghost layers across the seam
  int pad_ = 0;
  double log_k_ = 0.0;

  double interp_coords(double c0, double c1, double c2) const;
};

}  // namespace ialpha
