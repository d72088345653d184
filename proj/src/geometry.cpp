#include "ialpha/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace ialpha {

ExtPoint stereographic_chart(const Vec& p) {
  int n = static_cast<int>(p.size()) - 1;
  double denom = 1.0 - p[n];
  if (denom <= 0.0) return ExtPoint::infinity(n);
  return ExtPoint::at(p.head(n) / denom);
}

double sphere_volume(int n) {
  return 2.0 * std::pow(M_PI, 0.5 * (n + 1)) / std::tgamma(0.5 * (n + 1));
}

namespace {

Vec midpoint_edges(const Vec& nodes, double lo, double hi) {
  int m = static_cast<int>(nodes.size());
  Vec e(m + 1);
  e[0] = lo;
  e[m] = hi;
  for (int i = 1; i < m; ++i) e[i] = 0.5 * (nodes[i - 1] + nodes[i]);
  return e;
}

Vec uniform_edges(const Vec& nodes, double step) {
  int m = static_cast<int>(nodes.size());
  Vec e(m + 1);
  for (int i = 0; i <= m; ++i) e[i] = (i ? nodes[i - 1] : nodes[0] - step) + 0.5 * step;
  return e;
}

Chart sphere_chart(const KleinianGroup& group, int r0, int r1, int r2) {
  Chart c;
  c.n = 3;
  c.kind = ChartKind::SphereFullChart;
  c.group = group;

  // Midpoint nodes per axis; weights are the exact band integrals of the
  // volume density, so cell bookkeeping is consistent and the total sphere
  // volume is exact.
  c.axis0.resize(r0);
  for (int i = 0; i < r0; ++i) c.axis0[i] = M_PI * (i + 0.5) / r0;
  c.axis1.resize(r1);
  for (int j = 0; j < r1; ++j) c.axis1[j] = -1.0 + 2.0 * (j + 0.5) / r1;
  c.axis2.resize(r2);
  for (int l = 0; l < r2; ++l) c.axis2[l] = 2.0 * M_PI * l / r2;
  double wphi = 2.0 * M_PI / r2;
  c.edges0 = midpoint_edges(c.axis0, 0.0, M_PI);
  c.edges1 = midpoint_edges(c.axis1, -1.0, 1.0);
  c.edges2 = uniform_edges(c.axis2, wphi);

  auto theta_band = [](double a, double b) {
    // integral of sin^2 over [a, b]
    return 0.5 * ((b - std::sin(b) * std::cos(b)) - (a - std::sin(a) * std::cos(a)));
  };

  int N = r0 * r1 * r2;
  c.nodes.resize(N, 3);
  c.weights.resize(N);
  c.eta.resize(N);
  for (int i = 0; i < r0; ++i) {
    double th = c.axis0[i];
    double wth = theta_band(c.edges0[i], c.edges0[i + 1]);
    double s1 = std::sin(th), c1 = std::cos(th);
    for (int j = 0; j < r1; ++j) {
      double t = c.axis1[j];
      double wt = 2.0 / r1;
      double s2 = std::sqrt(std::max(0.0, 1.0 - t * t));
      for (int l = 0; l < r2; ++l) {
        double ph = c.axis2[l];
        Eigen::Vector4d P(s1 * s2 * std::cos(ph), s1 * s2 * std::sin(ph), s1 * t, c1);
        double denom = 1.0 - P[3];
        Vec x = (P.head<3>() / denom).eval();
        int idx = c.index(i, j, l);
        c.nodes.row(idx) = x.transpose();
        double eta = denom;  // equals 2/(1+|x|^2)
        c.eta[idx] = eta;
        c.weights[idx] = wth * wt * wphi / (eta * eta * eta);
      }
    }
  }
  return c;
}

Chart shell_chart(const KleinianGroup& group, int r0, int r1, int r2) {
  double k = group.shell_ratio();
  Chart c;
  c.n = 3;
  c.kind = ChartKind::DilationShell;
  c.group = group;

  double logk = std::log(k);
  double drho = logk / r0;
  c.axis0.resize(r0);
  for (int j = 0; j < r0; ++j) c.axis0[j] = logk * (j + 0.5) / r0;
  c.axis1.resize(r1);
  for (int j = 0; j < r1; ++j) c.axis1[j] = -1.0 + 2.0 * (j + 0.5) / r1;
  c.axis2.resize(r2);
  for (int l = 0; l < r2; ++l) c.axis2[l] = 2.0 * M_PI * l / r2;
  double wphi = 2.0 * M_PI / r2;
  c.edges0 = midpoint_edges(c.axis0, 0.0, logk);
  c.edges1 = midpoint_edges(c.axis1, -1.0, 1.0);
  c.edges2 = uniform_edges(c.axis2, wphi);
  {
    // Uniform log-radius axis: exact edges.
    for (int j = 0; j <= r0; ++j) c.edges0[j] = logk * j / r0;
  }

  // The deck rotation must advance the azimuth grid by a whole number of
  // cells for the grid to be an exact symmetry of the quotient.
  Mat A = group.deck_rotation();
  Mat Rdiff = A - Mat::Identity(3, 3);
  if (Rdiff.cwiseAbs().maxCoeff() < 1e-12) {
    c.deck_phi_shift = 0;
  } else {
    double ang = std::atan2(A(1, 0), A(0, 0));
    double cells = ang * r2 / (2.0 * M_PI);
    double rounded = std::round(cells);
    bool axis_ok = std::abs(A(2, 2) - 1.0) < 1e-12 && std::abs(A(0, 2)) < 1e-12 &&
                   std::abs(A(1, 2)) < 1e-12;
    if (!axis_ok || std::abs(cells - rounded) > 1e-9)
      throw std::invalid_argument(
          "build_chart: deck rotation must rotate the azimuth grid by whole cells");
    c.deck_phi_shift = static_cast<int>(rounded) % r2;
  }

  int N = r0 * r1 * r2;
  c.nodes.resize(N, 3);
  c.weights.resize(N);
  c.eta.resize(N);
  for (int j = 0; j < r0; ++j) {
    double r = std::exp(c.axis0[j]);
    for (int i = 0; i < r1; ++i) {
      double t = c.axis1[i];
      double s = std::sqrt(std::max(0.0, 1.0 - t * t));
      for (int l = 0; l < r2; ++l) {
        double ph = c.axis2[l];
        Vec x(3);
        x << r * s * std::cos(ph), r * s * std::sin(ph), r * t;
        int idx = c.index(j, i, l);
        c.nodes.row(idx) = x.transpose();
        c.weights[idx] = r * r * r * drho * (2.0 / r1) * wphi;
        c.eta[idx] = 2.0 / (1.0 + r * r);
      }
    }
  }
  return c;
}

}  // namespace

Chart build_chart(const KleinianGroup& group, int r0, int r1, int r2, int n) {
  if (n != 3)
    throw std::invalid_argument("build_chart: only n = 3 charts are implemented");
  switch (group.domain_kind()) {
    case DomainKind::FullChart:
      return sphere_chart(group, r0, r1, r2);
    case DomainKind::DilationShell:
      return shell_chart(group, r0, r1, r2);
    default:
      throw std::invalid_argument("build_chart: unsupported group type");
  }
}

Chart build_chart(const KleinianGroup& group, int resolution, int n) {
  return build_chart(group, resolution, resolution, resolution, n);
}

Vec chart_point(const Chart& chart, double c0, double c1, double c2) {
  Vec x(3);
  if (chart.kind == ChartKind::DilationShell) {
    double r = std::exp(c0);
    double s = std::sqrt(std::max(0.0, 1.0 - c1 * c1));
    x << r * s * std::cos(c2), r * s * std::sin(c2), r * c1;
    return x;
  }
  double s1 = std::sin(c0), co1 = std::cos(c0);
  double s2 = std::sqrt(std::max(0.0, 1.0 - c1 * c1));
  Eigen::Vector4d P(s1 * s2 * std::cos(c2), s1 * s2 * std::sin(c2), s1 * c1, co1);
  double denom = 1.0 - P[3];
  x = P.head<3>() / denom;
  return x;
}

double chart_measure_density(const Chart& chart, double c0) {
  if (chart.kind == ChartKind::DilationShell) {
    double r = std::exp(c0);
    double eta = 2.0 / (1.0 + r * r);
    return eta * eta * eta * r * r * r;
  }
  double s = std::sin(c0);
  return s * s;
}

SubCell chart_subcell(const Chart& chart, int node_index, int s0, int s1, int s2) {
  if (!chart.grid_valid)
    throw std::invalid_argument("chart_subcell: chart grid is not available");
  int n2 = chart.n2(), n1 = chart.n1();
  int i2 = node_index % n2;
  int i1 = (node_index / n2) % n1;
  int i0 = node_index / (n1 * n2);
  double a0 = chart.edges0[i0], b0 = chart.edges0[i0 + 1];
  double a1 = chart.edges1[i1], b1 = chart.edges1[i1 + 1];
  double a2 = chart.edges2[i2], b2 = chart.edges2[i2 + 1];
  SubCell out;
  out.pts.resize(s0 * s1 * s2, 3);
  out.meas.resize(s0 * s1 * s2);
  double d0 = (b0 - a0) / s0, d1 = (b1 - a1) / s1, d2 = (b2 - a2) / s2;
  int row = 0;
  for (int j0 = 0; j0 < s0; ++j0) {
    double c0 = a0 + (j0 + 0.5) * d0;
    double dens = chart_measure_density(chart, c0);
    for (int j1 = 0; j1 < s1; ++j1) {
      double c1 = a1 + (j1 + 0.5) * d1;
      for (int j2 = 0; j2 < s2; ++j2) {
        double c2 = a2 + (j2 + 0.5) * d2;
        out.pts.row(row) = chart_point(chart, c0, c1, c2).transpose();
        out.meas[row] = dens * d0 * d1 * d2;
        ++row;
      }
    }
  }
  return out;
}

SubCell chart_subcell(const Chart& chart, int node_index, int s) {
  return chart_subcell(chart, node_index, s, s, s);
}

Eigen::Vector3d chart_cell_extents(const Chart& chart, int node_index) {
  int n2 = chart.n2(), n1 = chart.n1();
  int i2 = node_index % n2;
  int i1 = (node_index / n2) % n1;
  int i0 = node_index / (n1 * n2);
  double c0 = chart.axis0[i0], c1 = chart.axis1[i1], c2 = chart.axis2[i2];
  auto cd = [](const Vec& a, const Vec& b) {
    return 2.0 * (a - b).norm() /
           std::sqrt((1.0 + a.squaredNorm()) * (1.0 + b.squaredNorm()));
  };
  Eigen::Vector3d ext;
  ext[0] = cd(chart_point(chart, chart.edges0[i0], c1, c2),
              chart_point(chart, chart.edges0[i0 + 1], c1, c2));
  ext[1] = cd(chart_point(chart, c0, chart.edges1[i1], c2),
              chart_point(chart, c0, chart.edges1[i1 + 1], c2));
  ext[2] = cd(chart_point(chart, c0, c1, chart.edges2[i2]),
              chart_point(chart, c0, c1, chart.edges2[i2 + 1]));
  return ext;
}

double chart_volume(const Chart& chart) {
  double v = 0.0;
  for (int i = 0; i < chart.size(); ++i)
    v += chart.weights[i] * std::pow(chart.eta[i], chart.n);
  return v;
}

Chart transport_chart(const Chart& chart, const MoebiusMap& gamma) {
  Chart out = chart;
  out.grid_valid = false;
  for (int i = 0; i < chart.size(); ++i) {
    Vec x = chart.nodes.row(i).transpose();
    Vec gx = gamma(x);
    double de = gamma.euclidean_derivative(x);
    out.nodes.row(i) = gx.transpose();
    out.weights[i] = chart.weights[i] * std::pow(de, chart.n);
    out.eta[i] = conformal_factor(gx);
  }
  return out;
}

Vec unfold(const Vec& u, const Chart& chart, double alpha) {
  double s = 0.5 * (chart.n - alpha);
  return u.array() * chart.eta.array().pow(s);
}

Vec pushdown(const Vec& vhat, const Chart& chart, double alpha) {
  double s = 0.5 * (chart.n - alpha);
  return vhat.array() * chart.eta.array().pow(-s);
}

namespace {

// 4-point (cubic) Lagrange stencil on a sorted axis; clamps to one-sided
// stencils at the ends. Returns first stencil index and 4 weights.
void lagrange_stencil(const Vec& axis, double c, int* first, double w[4]) {
  int m = static_cast<int>(axis.size());
  if (m < 4) throw std::runtime_error("interpolation axis needs at least 4 nodes");
  int lo = 0, hi = m - 1;
  while (hi - lo > 1) {
    int mid = (lo + hi) / 2;
    if (axis[mid] <= c)
      lo = mid;
    else
      hi = mid;
  }
  int f = std::clamp(lo - 1, 0, m - 4);
  for (int a = 0; a < 4; ++a) {
    double wa = 1.0;
    for (int b = 0; b < 4; ++b) {
      if (a == b) continue;
      wa *= (c - axis[f + b]) / (axis[f + a] - axis[f + b]);
    }
    w[a] = wa;
  }
  *first = f;
}

// Periodic uniform axis with period 2*pi.
void periodic_stencil(const Vec& axis, double c, int idx[4], double w[4]) {
  int m = static_cast<int>(axis.size());
  double step = 2.0 * M_PI / m;
  double pos = (c - axis[0]) / step;
  pos -= std::floor(pos / m) * m;
  int base = static_cast<int>(std::floor(pos));
  double loc[4];
  for (int a = 0; a < 4; ++a) {
    int j = base - 1 + a;
    idx[a] = ((j % m) + m) % m;
    loc[a] = (base - 1 + a) * step + axis[0];
  }
  double cc = axis[0] + pos * step;
  for (int a = 0; a < 4; ++a) {
    double wa = 1.0;
    for (int b = 0; b < 4; ++b) {
      if (a == b) continue;
      wa *= (cc - loc[b]) / (loc[a] - loc[b]);
    }
    w[a] = wa;
  }
}

}  // namespace

ChartInterpolator::ChartInterpolator(const Chart& chart, const Vec& nodal_values,
                                     double weight_exponent)
    : chart_(chart), wexp_(weight_exponent) {
  if (!chart.grid_valid)
    throw std::invalid_argument("ChartInterpolator: chart grid is not interpolable");
  if (chart.kind == ChartKind::DilationShell) {
    log_k_ = std::log(chart.group.shell_ratio());
    pad_ = 2;
    int n0 = chart.n0(), n1 = chart.n1(), n2 = chart.n2();
    double k = chart.group.shell_ratio();
    double up = std::pow(k, -wexp_), down = std::pow(k, wexp_);
    int g = chart.deck_phi_shift;
    padded_.resize((n0 + 2 * pad_) * n1 * n2);
    for (int j = -pad_; j < n0 + pad_; ++j) {
      int src_j = ((j % n0) + n0) % n0;
      int copies = (j - src_j) / n0;  // -1, 0 or +1
      double scale = copies > 0 ? up : (copies < 0 ? down : 1.0);
      int rot = copies * g;
      for (int i = 0; i < n1; ++i)
        for (int l = 0; l < n2; ++l) {
          int src_l = (((l - rot) % n2) + n2) % n2;
          padded_[((j + pad_) * n1 + i) * n2 + l] =
              nodal_values[chart.index(src_j, i, src_l)] * scale;
        }
    }
  } else {
    padded_ = nodal_values;
  }
}

double ChartInterpolator::interp_coords(double c0, double c1, double c2) const {
  const Chart& c = chart_;
  int n1 = c.n1(), n2 = c.n2();
  int f1;
  double w1[4];
  lagrange_stencil(c.axis1, c1, &f1, w1);
  int i2[4];
  double w2[4];
  periodic_stencil(c.axis2, c2, i2, w2);

  double out = 0.0;
  if (c.kind == ChartKind::DilationShell) {
    // Uniform (midpoint) log-radius axis extended across the seam.
    int n0 = c.n0();
    double step = log_k_ / n0;
    double pos = (c0 - c.axis0[0]) / step;
    int base = static_cast<int>(std::floor(pos));
    base = std::clamp(base, -pad_ + 1, n0 + pad_ - 3);
    double w0[4];
    for (int a = 0; a < 4; ++a) {
      double wa = 1.0;
      for (int b = 0; b < 4; ++b) {
        if (a == b) continue;
        wa *= (pos - (base - 1 + b)) / ((a)-double(b));
      }
      w0[a] = wa;
    }
    for (int a = 0; a < 4; ++a) {
      int j = base - 1 + a + pad_;
      for (int b = 0; b < 4; ++b)
        for (int d = 0; d < 4; ++d)
          out += w0[a] * w1[b] * w2[d] * padded_[(j * n1 + (f1 + b)) * n2 + i2[d]];
    }
  } else {
    int f0;
    double w0[4];
    lagrange_stencil(c.axis0, c0, &f0, w0);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        for (int d = 0; d < 4; ++d)
          out += w0[a] * w1[b] * w2[d] *
                 padded_[c.index(f0 + a, f1 + b, i2[d])];
  }
  return out;
}

double ChartInterpolator::operator()(const Vec& x) const {
  const Chart& c = chart_;
  if (c.kind == ChartKind::DilationShell) {
    double r = x.norm();
    if (r <= 0.0) throw std::domain_error("ChartInterpolator: limit point");
    double k = c.group.shell_ratio();
    double rho = std::log(r);
    int m = static_cast<int>(std::floor(rho / log_k_));
    double rho0 = rho - m * log_k_;
    // Rotate back by the deck rotation's m-th power (azimuth shift).
    double phi = std::atan2(x[1], x[0]);
    double dphi = 2.0 * M_PI * c.deck_phi_shift / c.n2();
    phi -= m * dphi;
    double t = x[2] / r;
    t = std::clamp(t, -1.0, 1.0);
    double v = interp_coords(rho0, t, phi);
    return v * std::pow(k, -double(m) * wexp_);
  }
  Vec P = stereographic_lift(x);
  double c1 = std::clamp(P[3], -1.0, 1.0);
  double theta = std::acos(c1);
  double s1 = std::sin(theta);
  double t = s1 > 1e-14 ? std::clamp(P[2] / s1, -1.0, 1.0) : 0.0;
  double phi = std::atan2(P[1], P[0]);
  return interp_coords(theta, t, phi);
}

}  // namespace ialpha
