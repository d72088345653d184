#include "ialpha/riesz.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <random>
#include <stdexcept>
#include <vector>

namespace ialpha {

ProblemSpec::ProblemSpec(int n_, double alpha_, Tolerances tol_)
    : n(n_), alpha(alpha_), tol(tol_) {
  if (n < 3) throw std::invalid_argument("ProblemSpec: n must be >= 3");
  if (alpha < 2.0 || alpha >= n)
    throw std::invalid_argument("ProblemSpec: alpha must lie in [2, n)");
  p = (n + alpha) / (n - alpha);
  c = riesz_constant(n, alpha);
}

double riesz_constant(int n, double alpha) {
  if (alpha <= 0.0 || alpha >= n)
    throw std::invalid_argument("riesz_constant: need 0 < alpha < n");
  return std::tgamma(0.5 * (n - alpha)) /
         (std::pow(2.0, alpha) * std::pow(M_PI, 0.5 * n) * std::tgamma(0.5 * alpha));
}

double unit_sphere_area(int n) {
  return 2.0 * std::pow(M_PI, 0.5 * n) / std::tgamma(0.5 * n);
}

double singular_cell_integral(double cell_volume, int n, double alpha) {
  double unit_ball = std::pow(M_PI, 0.5 * n) / std::tgamma(0.5 * n + 1.0);
  double rho = std::pow(cell_volume / unit_ball, 1.0 / n);
  return unit_sphere_area(n) * std::pow(rho, alpha) / alpha;
}

namespace {

using Cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;

// In-place FFT along each axis of the m^dim array (x fastest).
void fft_all_axes(CVec& data, int dim, int m, bool forward) {
  Eigen::FFT<double> fft;
  std::vector<Cplx> line(m), out(m);
  int total = static_cast<int>(data.size());
  for (int axis = 0; axis < dim; ++axis) {
    int stride = 1;
    for (int d = 0; d < axis; ++d) stride *= m;
    int nlines = total / m;
    for (int l = 0; l < nlines; ++l) {
      // Decompose line index into (inner, outer) around the axis.
      int inner = l % stride;
      int outer = l / stride;
      int base = outer * stride * m + inner;
      for (int i = 0; i < m; ++i) line[i] = data[base + i * stride];
      if (forward)
        fft.fwd(out, line);
      else
        fft.inv(out, line);
      for (int i = 0; i < m; ++i) data[base + i * stride] = out[i];
    }
  }
}

Vec apply_multiplier(const PeriodicGrid& g, const Vec& f, double alpha, bool inverse) {
  int m = g.m, total = g.size();
  if (f.size() != total) throw std::invalid_argument("periodic grid: size mismatch");
  CVec data(total);
  for (int i = 0; i < total; ++i) data[i] = f[i];
  fft_all_axes(data, g.dim, m, true);
  for (int i = 0; i < total; ++i) {
    int rem = i;
    double k2 = 0.0;
    for (int d = 0; d < g.dim; ++d) {
      int idx = rem % m;
      rem /= m;
      int k = idx <= m / 2 ? idx : idx - m;
      k2 += double(k) * k;
    }
    if (k2 == 0.0)
      data[i] = 0.0;
    else
      data[i] *= std::pow(k2, (inverse ? -alpha : alpha) * 0.5);
  }
  fft_all_axes(data, g.dim, m, false);
  Vec out(total);
  for (int i = 0; i < total; ++i) out[i] = data[i].real();
  return out;
}

}  // namespace

Vec frac_laplacian_periodic(const PeriodicGrid& grid, const Vec& f, double alpha) {
  return apply_multiplier(grid, f, alpha, false);
}

Vec riesz_apply_periodic(const PeriodicGrid& grid, const Vec& f, double alpha) {
  return apply_multiplier(grid, f, alpha, true);
}

Vec random_band_limited(const PeriodicGrid& grid, int max_mode, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  int m = grid.m, total = grid.size();
  Vec white(total);
  for (int i = 0; i < total; ++i) white[i] = gauss(rng);
  CVec data(total);
  for (int i = 0; i < total; ++i) data[i] = white[i];
  fft_all_axes(data, grid.dim, m, true);
  for (int i = 0; i < total; ++i) {
    int rem = i;
    bool keep = true;
    bool dc = true;
    for (int d = 0; d < grid.dim; ++d) {
      int idx = rem % m;
      rem /= m;
      int k = idx <= m / 2 ? idx : idx - m;
      if (std::abs(k) > max_mode) keep = false;
      if (k != 0) dc = false;
    }
    if (!keep || dc) data[i] = 0.0;
  }
  fft_all_axes(data, grid.dim, m, false);
  Vec out(total);
  for (int i = 0; i < total; ++i) out[i] = data[i].real();
  double scale = out.cwiseAbs().maxCoeff();
  if (scale > 0) out /= scale;
  return out;
}

FlatGrid::FlatGrid(int dim_, double h_, double halfwidth) : dim(dim_), h(h_) {
  m = 2 * static_cast<int>(std::floor(halfwidth / h)) + 1;
  origin = -0.5 * h * (m - 1);
}

Vec FlatGrid::node(int flat_index) const {
  Vec x(dim);
  for (int d = 0; d < dim; ++d) {
    x[d] = origin + h * (flat_index % m);
    flat_index /= m;
  }
  return x;
}

Vec riesz_apply_flat(const FlatGrid& grid, const Vec& f, double alpha) {
  int n = grid.dim;
  if (alpha <= 0.0 || alpha >= n)
    throw std::invalid_argument("riesz_apply_flat: need 0 < alpha < grid dim");
  double c = riesz_constant(n, alpha);
  int total = grid.size();
  if (f.size() != total) throw std::invalid_argument("riesz_apply_flat: size mismatch");
  double cellvol = std::pow(grid.h, n);
  double diag = singular_cell_integral(cellvol, n, alpha);
  double e2 = 0.5 * (alpha - n);
  bool inv_sqrt = std::abs(e2 + 0.5) < 1e-14;

  Mat pts(total, n);
  for (int i = 0; i < total; ++i) pts.row(i) = grid.node(i).transpose();

  Vec out(total);
  parallel_for(total, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      double acc = 0.0;
      for (int j = 0; j < total; ++j) {
        if (static_cast<int>(i) == j) continue;
        double d2 = (pts.row(i) - pts.row(j)).squaredNorm();
        double k = inv_sqrt ? 1.0 / std::sqrt(d2) : std::pow(d2, e2);
        acc += k * f[j];
      }
      out[i] = c * (acc * cellvol + diag * f[i]);
    }
  });
  return out;
}

double bubble_value(const ProblemSpec& spec, const Bubble& b, const Vec& x) {
  double s = 0.5 * (spec.n - spec.alpha);
  double r2 = (x - b.center).squaredNorm();
  return b.amplitude * std::pow(b.t / (b.t * b.t + r2), s);
}

double bubble_profile_potential(const ProblemSpec& spec) {
  // c * omega_{n-1} * \int_0^inf r^{alpha-1} (1+r^2)^{-(n+alpha)/2} dr,
  // via r = tan(theta):  \int_0^{pi/2} sin^{alpha-1} cos^{n-1}.
  QuadratureRule q = gauss_legendre(200, 0.0, 0.5 * M_PI);
  double integral = 0.0;
  for (int i = 0; i < q.nodes.size(); ++i) {
    double th = q.nodes[i];
    integral += q.weights[i] * std::pow(std::sin(th), spec.alpha - 1.0) *
                std::pow(std::cos(th), spec.n - 1.0);
  }
  return spec.c * unit_sphere_area(spec.n) * integral;
}

Bubble calibrate_bubble(const ProblemSpec& spec, double t, const Vec& center) {
  double J = bubble_profile_potential(spec);
  if (!(J > 0.0) || !std::isfinite(J))
    throw std::runtime_error("calibrate_bubble: radial quadrature failed");
  Bubble b;
  b.center = center;
  b.t = t;
  // amplitude^{p-1} * J = 1 with p - 1 = 2 alpha / (n - alpha)
  b.amplitude = std::pow(J, -(spec.n - spec.alpha) / (2.0 * spec.alpha));
  return b;
}

double bubble_flat_residual(const ProblemSpec& spec, const Bubble& b, double h,
                            double halfwidth) {
  if (spec.n != 3)
    throw std::invalid_argument("bubble_flat_residual: implemented for n = 3 grids");
  // Probe positions on the quarter-integer lattice are grid nodes at every
  // refinement level with h dividing 0.25.
  static const double probes_raw[][3] = {
      {0, 0, 0},         {0.25, 0, 0},      {0, 0.5, 0},
      {0.25, 0.25, 0.25}, {0.5, 0.5, 0},     {0, 0, 0.75},
      {0.5, 0.25, 0},    {0.75, 0.5, 0.25}, {1.0, 0, 0}};
  const int np = 9;
  Eigen::Matrix<double, 9, 3> probes;
  for (int i = 0; i < np; ++i)
    for (int d = 0; d < 3; ++d) probes(i, d) = probes_raw[i][d] + b.center[d];

  FlatGrid grid(3, h, halfwidth);
  double cellvol = h * h * h;
  double diag = singular_cell_integral(cellvol, 3, spec.alpha);
  double e2 = 0.5 * (spec.alpha - 3.0);
  bool inv_sqrt = std::abs(e2 + 0.5) < 1e-14;

  Eigen::Matrix<double, 9, 1> acc = Eigen::Matrix<double, 9, 1>::Zero();
  int m = grid.m;
  Vec xs(m);
  for (int i = 0; i < m; ++i) xs[i] = grid.origin + h * i;
  Vec vc(3);
  for (int iz = 0; iz < m; ++iz) {
    vc[2] = xs[iz];
    for (int iy = 0; iy < m; ++iy) {
      vc[1] = xs[iy];
      for (int ix = 0; ix < m; ++ix) {
        vc[0] = xs[ix];
        double bp = std::pow(bubble_value(spec, b, vc), spec.p);
        for (int q = 0; q < np; ++q) {
          double dx = probes(q, 0) - vc[0];
          double dy = probes(q, 1) - vc[1];
          double dz = probes(q, 2) - vc[2];
          double d2 = dx * dx + dy * dy + dz * dz;
          if (d2 < 1e-20) {
            acc[q] += diag / cellvol * bp;  // singular cell, corrected
          } else {
            acc[q] += (inv_sqrt ? 1.0 / std::sqrt(d2) : std::pow(d2, e2)) * bp;
          }
        }
      }
    }
  }
  double sup_b = b.amplitude * std::pow(b.t, -0.5 * (spec.n - spec.alpha));
  double worst = 0.0;
  for (int q = 0; q < np; ++q) {
    double Ibp = spec.c * acc[q] * cellvol;
    double target = bubble_value(spec, b, probes.row(q).transpose());
    worst = std::max(worst, std::abs(target - Ibp));
  }
  return worst / sup_b;
}

}  // namespace ialpha
