#pragma once

#include <cstdint>

#include "ialpha/util.hpp"

namespace ialpha {

struct Tolerances {
  double tail_tol = 1e-9;
  double solve_tol = 1e-8;
  double quad_tol = 5e-3;
};

/// Problem parameters: dimension, operator order, critical exponent
/// p = (n+alpha)/(n-alpha) and the Riesz constant.
struct ProblemSpec {
  int n = 3;
  double alpha = 2.0;
  double p = 5.0;
  double c = 0.0;
  Tolerances tol;

  ProblemSpec() = default;
  ProblemSpec(int n_, double alpha_, Tolerances tol_ = {});
};

/// The constant c(n, alpha) for which the Riesz potential
///   (I f)(x) = c(n,alpha) \int |x-y|^{alpha-n} f(y) dy
/// inverts the fractional Laplacian of order alpha. Requires 0 < alpha < n.
double riesz_constant(int n, double alpha);

/// Surface area of the unit sphere S^{n-1} in R^n.
double unit_sphere_area(int n);

/// Exact integral of |y|^{alpha-n} over the ball centered at the origin whose
/// volume equals cell_volume; the closed-form correction replacing the
/// singular diagonal cell in quadratures of the Riesz kernel.
double singular_cell_integral(double cell_volume, int n, double alpha);

// ---------------------------------------------------------------------------
// Periodic spectral grid on [0, 2pi)^dim.

struct PeriodicGrid {
  int dim = 2;
  int m = 32;  // nodes per axis

  PeriodicGrid(int dim_, int m_) : dim(dim_), m(m_) {}
  int size() const {
    int s = 1;
    for (int d = 0; d < dim; ++d) s *= m;
    return s;
  }
};

/// Fourier multiplier |xi|^alpha with the mean mode mapped to zero.
Vec frac_laplacian_periodic(const PeriodicGrid& grid, const Vec& f, double alpha);

/// Fourier multiplier |xi|^{-alpha} on nonzero modes (mean mode to zero); the
/// spectral inverse of frac_laplacian_periodic on mean-free fields.
Vec riesz_apply_periodic(const PeriodicGrid& grid, const Vec& f, double alpha);

/// Random zero-mean field with modes supported in |xi|_inf <= max_mode.
Vec random_band_limited(const PeriodicGrid& grid, int max_mode, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Flat cell-centered grid with spacing h, cube of half-width X about 0.

struct FlatGrid {
  int dim = 3;
  double h = 0.25;
  int m = 0;         // nodes per axis (odd, so the origin is a node)
  double origin = 0; // first node coordinate per axis

  FlatGrid(int dim_, double h_, double halfwidth);
  int size() const {
    int s = 1;
    for (int d = 0; d < dim; ++d) s *= m;
    return s;
  }
  Vec node(int flat_index) const;
};

/// Dense Riesz potential on the flat grid: midpoint quadrature off the
/// diagonal, equal-volume-ball correction on the singular cell. Requires
/// alpha < dim.
Vec riesz_apply_flat(const FlatGrid& grid, const Vec& f, double alpha);

// ---------------------------------------------------------------------------
// Standard bubble: amplitude * (t / (t^2 + |x-x0|^2))^((n-alpha)/2).

struct Bubble {
  Vec center;
  double t = 1.0;
  double amplitude = 1.0;
};

double bubble_value(const ProblemSpec& spec, const Bubble& b, const Vec& x);

/// Value at the center of the Riesz potential of the p-th power of the
/// unit-amplitude t = 1 profile, by radial quadrature.
double bubble_profile_potential(const ProblemSpec& spec);

/// Calibrates the amplitude so that b = I(b^p) for the flat equation; the
/// amplitude comes from the radial quadrature, never from a stored constant.
Bubble calibrate_bubble(const ProblemSpec& spec, double t, const Vec& center);

/// Sup over a fixed set of probe nodes of |b - I(b^p)| / sup b, with the
/// potential evaluated by streaming quadrature over a cube grid of the given
/// spacing and half-width.
double bubble_flat_residual(const ProblemSpec& spec, const Bubble& b, double h,
                            double halfwidth);

}  // namespace ialpha
