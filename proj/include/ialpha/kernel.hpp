#pragma once

#include <array>

#include "ialpha/geometry.hpp"
#include "ialpha/mobius.hpp"
#include "ialpha/riesz.hpp"

namespace ialpha {

/// Covariant kernel of the round representative in chart coordinates:
///   c(n,alpha) |x-y|^{alpha-n} (((1+|x|^2)/2)((1+|y|^2)/2))^{(n-alpha)/2},
/// equal to c(n,alpha) * chordal_distance(x,y)^{alpha-n}.
double ktilde(const ProblemSpec& spec, const Vec& x, const Vec& y);

/// Group-periodized kernel value
///   sum_gamma ktilde(x, gamma y) |gamma'(y~)|^{(n-alpha)/2}
/// over the identity and all enumerated elements up to the word-length
/// cutoff. Requires x off the orbit of y.
double periodized_kernel(const ProblemSpec& spec, const KleinianGroup& group,
                         const Vec& x, const Vec& y, int cutoff);

/// Deviation from 1 of the covariance ratio
///   ktilde(gx, gy) (|g'(x~)| |g'(y~)|)^{(n-alpha)/2} / ktilde(x, y);
/// identically zero in exact arithmetic for every Moebius map.
double covariance_deviation(const ProblemSpec& spec, const MoebiusMap& g, const Vec& x,
                            const Vec& y);

struct KernelMatrix {
  Mat entries;                // N x N, symmetric
  Vec diagonal_correction;    // value replacing the singular identity term
  double tail_bound = 0.0;    // truncation error bound of the group sum
  int group_cutoff = 0;       // word length included
};

struct AssemblyOptions {
  int max_cutoff = 400;
  int threads = 0;
  /// Overrides the automatic cutoff selection when positive.
  int forced_cutoff = 0;
  /// Near-field treatment: entries whose kernel distance is comparable to the
  /// cell size are replaced by symmetrized collocated cell integrals over
  /// midpoint sub-grids. Disabled automatically for transported charts.
  bool near_field = true;
  /// Chordal distance/cell-size thresholds for the four refinement levels...
  std::array<double, 4> near_cuts = {1.7, 2.4, 3.1, 3.8};
  /// ...and midpoints per axis at each level (innermost last).
  std::array<int, 4> near_orders = {2, 3, 4, 6};
};

/// Dense kernel matrix on the chart nodes. The identity term of the diagonal
/// entry is replaced by the equal-volume-ball correction; all other group
/// terms are regular on the fundamental domain and summed directly, with
/// gamma and gamma^{-1} paired in a fixed order. The cutoff is grown until
/// the extrapolated Poincare tail, times the largest bounded kernel factor on
/// the outermost shell, falls below spec.tol.tail_tol; failure to reach the
/// tolerance within max_cutoff raises an error carrying the achieved bound.
KernelMatrix assemble(const Chart& chart, const ProblemSpec& spec,
                      const AssemblyOptions& opts = {});

/// max_{p != q} |K_pq - K_qp|.
double matrix_asymmetry(const KernelMatrix& K);

}  // namespace ialpha
