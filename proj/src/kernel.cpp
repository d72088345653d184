#include "ialpha/kernel.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace ialpha {

double ktilde(const ProblemSpec& spec, const Vec& x, const Vec& y) {
  double d2 = (x - y).squaredNorm();
  if (d2 == 0.0) throw std::domain_error("ktilde: coincident points");
  double s = 0.5 * (spec.n - spec.alpha);
  double fx = 0.5 * (1.0 + x.squaredNorm());
  double fy = 0.5 * (1.0 + y.squaredNorm());
  return spec.c * std::pow(d2, -s) * std::pow(fx * fy, s);
}

double periodized_kernel(const ProblemSpec& spec, const KleinianGroup& group,
                         const Vec& x, const Vec& y, int cutoff) {
  double s = 0.5 * (spec.n - spec.alpha);
  double acc = ktilde(spec, x, y);
  const auto& elems = group.elements();
  for (const auto& e : elems) {
    if (e.word_length > cutoff) break;
    Vec gy = e.map(y);
    acc += ktilde(spec, x, gy) * std::pow(e.map.spherical_derivative(y), s);
  }
  return acc;
}

double covariance_deviation(const ProblemSpec& spec, const MoebiusMap& g, const Vec& x,
                            const Vec& y) {
  double s = 0.5 * (spec.n - spec.alpha);
  Vec gx = g(x), gy = g(y);
  double lhs = ktilde(spec, gx, gy) *
               std::pow(g.spherical_derivative(x) * g.spherical_derivative(y), s);
  return std::abs(lhs / ktilde(spec, x, y) - 1.0);
}

namespace {

struct OrbitTables {
  // Per element e and node q: image coordinates, the combined smooth factor
  // ((1+|gy|^2)/2)^s |g'(y~)|^s, and the raw spherical stretch, laid out
  // q-major for the entry loop.
  int nelem = 0;
  Mat images;   // (N*nelem) x n, row q*nelem + e
  Vec factors;  // N*nelem
  Vec stretch;  // N*nelem, |g'(y~)|
};

OrbitTables build_orbit_tables(const Chart& chart, const ProblemSpec& spec, int cutoff) {
  const auto& elems = chart.group.elements();
  int nelem = 0;
  while (nelem < static_cast<int>(elems.size()) && elems[nelem].word_length <= cutoff)
    ++nelem;
  OrbitTables t;
  t.nelem = nelem;
  int N = chart.size();
  t.images.resize(static_cast<long>(N) * nelem, chart.n);
  t.factors.resize(static_cast<long>(N) * nelem);
  t.stretch.resize(static_cast<long>(N) * nelem);
  double s = 0.5 * (spec.n - spec.alpha);
  for (int q = 0; q < N; ++q) {
    Vec y = chart.nodes.row(q).transpose();
    for (int e = 0; e < nelem; ++e) {
      Vec gy = elems[e].map(y);
      long row = static_cast<long>(q) * nelem + e;
      double stretch = elems[e].map.spherical_derivative(y);
      t.images.row(row) = gy.transpose();
      t.factors[row] = std::pow(0.5 * (1.0 + gy.squaredNorm()), s) * std::pow(stretch, s);
      t.stretch[row] = stretch;
    }
  }
  return t;
}

// Sub-grid tables for the near-field cell integrals.
constexpr int kNearLevels = 4;

struct NearTables {
  // x-side: per node and level, points and h(x) * measure.
  std::vector<std::array<Mat, kNearLevels>> pts;
  std::vector<std::array<Vec, kNearLevels>> hmeas;
  std::vector<std::array<double, kNearLevels>> msum;
  // z-side per near element (word length 1): gamma-transformed points and
  // h(gy) |gamma'(y~)|^s * measure.
  std::vector<std::vector<std::array<Mat, kNearLevels>>> zpts;    // [e][q][level]
  std::vector<std::vector<std::array<Vec, kNearLevels>>> zhmeas;  // [e][q][level]
  int near_elems = 0;
};

NearTables build_near_tables(const Chart& chart, const ProblemSpec& spec, int nelem,
                             const std::array<int, 4>& orders) {
  NearTables t;
  int N = chart.size();
  double s = 0.5 * (spec.n - spec.alpha);
  const auto& elems = chart.group.elements();
  t.near_elems = 0;
  while (t.near_elems < nelem && elems[t.near_elems].word_length <= 1) ++t.near_elems;

  t.pts.resize(N);
  t.hmeas.resize(N);
  t.msum.resize(N);
  for (int q = 0; q < N; ++q) {
    for (int level = 0; level < kNearLevels; ++level) {
      SubCell sc = chart_subcell(chart, q, orders[level]);
      int m = static_cast<int>(sc.meas.size());
      Vec hm(m);
      for (int i = 0; i < m; ++i)
        hm[i] = std::pow(0.5 * (1.0 + sc.pts.row(i).squaredNorm()), s) * sc.meas[i];
      t.pts[q][level] = std::move(sc.pts);
      t.hmeas[q][level] = std::move(hm);
      t.msum[q][level] = sc.meas.sum();
    }
  }
  t.zpts.resize(t.near_elems);
  t.zhmeas.resize(t.near_elems);
  for (int e = 0; e < t.near_elems; ++e) {
    t.zpts[e].resize(N);
    t.zhmeas[e].resize(N);
    const MoebiusMap& g = elems[e].map;
    for (int q = 0; q < N; ++q) {
      for (int level = 0; level < kNearLevels; ++level) {
        SubCell sc = chart_subcell(chart, q, orders[level]);
        int m = static_cast<int>(sc.meas.size());
        Mat zp(m, chart.n);
        Vec hm(m);
        for (int i = 0; i < m; ++i) {
          Vec y = sc.pts.row(i).transpose();
          Vec gy = g(y);
          zp.row(i) = gy.transpose();
          hm[i] = std::pow(0.5 * (1.0 + gy.squaredNorm()), s) *
                  std::pow(g.spherical_derivative(y), s) * sc.meas[i];
        }
        t.zpts[e][q][level] = std::move(zp);
        t.zhmeas[e][q][level] = std::move(hm);
      }
    }
  }
  return t;
}

// Distance in the chordal metric, where cell sizes are uniform.
inline double chordal(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
  return 2.0 * (a - b).norm() /
         std::sqrt((1.0 + a.squaredNorm()) * (1.0 + b.squaredNorm()));
}

// Integral of ktilde(x_p, .) over the cell of node p at one sub-grid level:
// midpoint everywhere except the sub-cell holding the singularity, which gets
// the closed-form equal-volume ball value.
double diagonal_cell_level(const Chart& chart, const ProblemSpec& spec, int p, int s) {
  SubCell sc = chart_subcell(chart, p, s);
  Vec xp = chart.nodes.row(p).transpose();
  int m = static_cast<int>(sc.meas.size());
  int sing = 0;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < m; ++i) {
    double d = (sc.pts.row(i).transpose() - xp).squaredNorm();
    if (d < best) {
      best = d;
      sing = i;
    }
  }
  double acc = spec.c * singular_cell_integral(sc.meas[sing], spec.n, spec.alpha);
  for (int i = 0; i < m; ++i) {
    if (i == sing) continue;
    acc += ktilde(spec, xp, sc.pts.row(i).transpose()) * sc.meas[i];
  }
  return acc / sc.meas.sum();
}

// Diagonal entry: cell average of the kernel, Richardson-extrapolated over
// two sub-grid levels. The singular core keeps the ball correction; the
// extrapolation removes the midpoint error of the smooth remainder.
double diagonal_cell_entry(const Chart& chart, const ProblemSpec& spec, int p) {
  const int s0 = 7, s1 = 15;
  double c0 = diagonal_cell_level(chart, spec, p, s0);
  double c1 = diagonal_cell_level(chart, spec, p, s1);
  double r = double(s1) * s1 / (double(s0) * s0);
  return (r * c1 - c0) / (r - 1.0);
}

inline int level_from_ratio(double r, const std::array<double, 4>& cuts) {
  if (r < cuts[0]) return 3;
  if (r < cuts[1]) return 2;
  if (r < cuts[2]) return 1;
  if (r < cuts[3]) return 0;
  return -1;  // plain midpoint
}

// Cell average against the weighted sub-grid: sum_j |x - z_j|^{2 e2} b_j.
inline double cell_sum(const Eigen::RowVectorXd& x, const Mat& zp, const Vec& zb,
                       double e2, bool inv_sqrt) {
  double acc = 0.0;
  int mz = static_cast<int>(zb.size());
  for (int j = 0; j < mz; ++j) {
    double d2 = (x - zp.row(j)).squaredNorm();
    acc += (inv_sqrt ? 1.0 / std::sqrt(d2) : std::pow(d2, e2)) * zb[j];
  }
  return acc;
}

// Largest value over the outermost included shell and all node pairs of the
// bounded kernel factor c |x - gy|^{alpha-n} ((1+|gy|^2)/2)^s: the constant
// multiplying the Poincare tail in the truncation bound.
double tail_constant(const Chart& chart, const ProblemSpec& spec, int cutoff) {
  const auto& shells = chart.group.shells();
  if (cutoff < 1 || shells.empty()) return 0.0;
  int shell_idx = std::min(cutoff, static_cast<int>(shells.size())) - 1;
  auto [begin, end] = shells[shell_idx];
  const auto& elems = chart.group.elements();
  double s = 0.5 * (spec.n - spec.alpha);
  int N = chart.size();
  double worst = 0.0;
  for (int e = begin; e < end; ++e) {
    for (int q = 0; q < N; ++q) {
      Vec gy = elems[e].map(chart.nodes.row(q).transpose());
      double fy = std::pow(0.5 * (1.0 + gy.squaredNorm()), s);
      double min_d2 = std::numeric_limits<double>::infinity();
      for (int p = 0; p < N; ++p)
        min_d2 = std::min(min_d2, (chart.nodes.row(p).transpose() - gy).squaredNorm());
      worst = std::max(worst, spec.c * std::pow(min_d2, -s) * fy);
    }
  }
  return worst;
}

struct TailEstimate {
  double bound = 0.0;
  bool ok = false;
};

// Shell sums of |gamma'(y~)|^s per node, extrapolated geometrically past the
// cutoff and multiplied by the tail constant.
TailEstimate tail_bound_at(const Chart& chart, const ProblemSpec& spec,
                           const Mat& shell_sums, int cutoff) {
  TailEstimate est;
  int available = static_cast<int>(shell_sums.cols());
  if (cutoff < 2 || cutoff > available) return est;
  double worst_tail = 0.0;
  for (int q = 0; q < shell_sums.rows(); ++q) {
    double last = shell_sums(q, cutoff - 1);
    double prev = shell_sums(q, cutoff - 2);
    if (!(prev > 0.0)) continue;
    double r = last / prev;
    if (r >= 1.0) return est;  // no decay: bound unavailable
    worst_tail = std::max(worst_tail, last * r / (1.0 - r));
  }
  est.bound = tail_constant(chart, spec, cutoff) * worst_tail;
  est.ok = true;
  return est;
}

}  // namespace

KernelMatrix assemble(const Chart& chart, const ProblemSpec& spec,
                      const AssemblyOptions& opts) {
  int N = chart.size();
  double s = 0.5 * (spec.n - spec.alpha);
  KernelMatrix K;
  K.entries.resize(N, N);
  K.diagonal_correction.resize(N);

  int cutoff = 0;
  double tail = 0.0;
  if (!chart.group.is_trivial()) {
    int max_cutoff = std::min(opts.max_cutoff, chart.group.max_word_length());
    // Shell sums of the spherical derivative powers for every node.
    Mat shell_sums(N, max_cutoff);
    const auto& shells = chart.group.shells();
    const auto& elems = chart.group.elements();
    for (int q = 0; q < N; ++q) {
      Vec y = chart.nodes.row(q).transpose();
      for (int l = 0; l < max_cutoff; ++l) {
        double sum = 0.0;
        for (int i = shells[l].first; i < shells[l].second; ++i)
          sum += std::pow(elems[i].map.spherical_derivative(y), s);
        shell_sums(q, l) = sum;
      }
    }
    if (opts.forced_cutoff > 0) {
      cutoff = std::min(opts.forced_cutoff, max_cutoff);
      TailEstimate est = tail_bound_at(chart, spec, shell_sums, cutoff);
      tail = est.ok ? est.bound : std::numeric_limits<double>::infinity();
    } else {
      bool reached = false;
      double achieved = std::numeric_limits<double>::infinity();
      for (cutoff = 4; cutoff <= max_cutoff; cutoff += 4) {
        TailEstimate est = tail_bound_at(chart, spec, shell_sums, cutoff);
        if (!est.ok) continue;
        achieved = est.bound;
        if (est.bound <= spec.tol.tail_tol) {
          reached = true;
          tail = est.bound;
          break;
        }
      }
      if (!reached) {
        cutoff = max_cutoff;
        TailEstimate est = tail_bound_at(chart, spec, shell_sums, cutoff);
        if (est.ok) achieved = est.bound;
        std::ostringstream msg;
        msg << "assemble: tail tolerance " << spec.tol.tail_tol
            << " unreachable at cutoff " << cutoff << "; achieved bound " << achieved;
        throw std::runtime_error(msg.str());
      }
    }
  }

  OrbitTables tables = chart.group.is_trivial()
                           ? OrbitTables{}
                           : build_orbit_tables(chart, spec, cutoff);

  const bool near = opts.near_field && chart.grid_valid;
  NearTables nt;
  if (near) nt = build_near_tables(chart, spec, tables.nelem, opts.near_orders);
  std::array<double, 4> cuts = opts.near_cuts;

  Vec G(N);  // ((1+|x|^2)/2)^s per node
  Vec cell_size(N);
  for (int p = 0; p < N; ++p) {
    G[p] = std::pow(0.5 * (1.0 + chart.nodes.row(p).squaredNorm()), s);
    cell_size[p] =
        std::pow(chart.weights[p] * std::pow(chart.eta[p], chart.n), 1.0 / chart.n);
  }

  // Pairing of the word-length-1 elements with their inverses, for the
  // symmetric near-field level choice.
  std::vector<int> inverse_of(near ? nt.near_elems : 0, -1);
  for (int e = 0; e < static_cast<int>(inverse_of.size()); ++e) {
    const auto& elems = chart.group.elements();
    for (int f = 0; f < nt.near_elems; ++f)
      if (compose(elems[e].map, elems[f].map).is_identity(1e-9)) inverse_of[e] = f;
  }

  const double c = spec.c;
  const double e2 = -s;  // exponent of squared distance
  const bool inv_sqrt = std::abs(e2 + 0.5) < 1e-14;
  const int nelem = tables.nelem;
  const int n = chart.n;

  // Singular diagonal: refined cell integral when the grid is available,
  // otherwise the plain equal-volume-ball value with frozen smooth factors.
  parallel_for(N, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t pp = lo; pp < hi; ++pp) {
      const int p = static_cast<int>(pp);
      if (near)
        K.diagonal_correction[p] = diagonal_cell_entry(chart, spec, p);
      else
        K.diagonal_correction[p] =
            G[p] * G[p] * c *
            singular_cell_integral(chart.weights[p], n, spec.alpha) /
            chart.weights[p];
    }
  }, opts.threads);

  parallel_for(N, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t pp = lo; pp < hi; ++pp) {
      const int p = static_cast<int>(pp);
      const auto xp = chart.nodes.row(p);
      for (int q = 0; q < N; ++q) {
        double acc;
        if (p == q) {
          acc = K.diagonal_correction[p];
        } else {
          const auto xq = chart.nodes.row(q);
          int level = -1;
          if (near) {
            double r = chordal(xp, xq) / std::max(cell_size[p], cell_size[q]);
            level = level_from_ratio(r, cuts);
          }
          if (level >= 0) {
            // Locally corrected entry: collocated cell integrals, averaged
            // over the two directions so the matrix stays exactly symmetric.
            double tpq = G[p] *
                         cell_sum(xp, nt.pts[q][level], nt.hmeas[q][level], e2,
                                  inv_sqrt) /
                         nt.msum[q][level];
            double tqp = G[q] *
                         cell_sum(xq, nt.pts[p][level], nt.hmeas[p][level], e2,
                                  inv_sqrt) /
                         nt.msum[p][level];
            acc = 0.5 * c * (tpq + tqp);
          } else {
            double d2 = (xp - xq).squaredNorm();
            acc = c * (inv_sqrt ? 1.0 / std::sqrt(d2) : std::pow(d2, e2)) * G[p] * G[q];
          }
        }
        if (nelem > 0) {
          long base = static_cast<long>(q) * nelem;
          double orbit = 0.0;
          int e = 0;
          if (near) {
            // Word-length-1 images can sit a cell away across the seam;
            // their terms get the same local correction. The level is chosen
            // symmetrically in (p, q, element) so pairing survives exactly.
            for (; e < nt.near_elems; ++e) {
              const auto ze = tables.images.row(base + e);
              double de_q = cell_size[q] * tables.stretch[base + e];
              double r1 = chordal(xp, ze) / std::max(cell_size[p], de_q);
              int ebar = inverse_of[e];
              long pbase = static_cast<long>(p) * nelem + ebar;
              const auto zbar = tables.images.row(pbase);
              double de_p = cell_size[p] * tables.stretch[pbase];
              double r2 = chordal(chart.nodes.row(q), zbar) /
                          std::max(cell_size[q], de_p);
              int level = level_from_ratio(std::min(r1, r2), cuts);
              if (level >= 0) {
                double tpq = G[p] *
                             cell_sum(xp, nt.zpts[e][q][level], nt.zhmeas[e][q][level],
                                      e2, inv_sqrt) /
                             nt.msum[q][level];
                double tqp = G[q] *
                             cell_sum(chart.nodes.row(q), nt.zpts[ebar][p][level],
                                      nt.zhmeas[ebar][p][level], e2, inv_sqrt) /
                             nt.msum[p][level];
                acc += 0.5 * c * (tpq + tqp);
              } else {
                double d2 = (xp - ze).squaredNorm();
                acc += c * (inv_sqrt ? 1.0 / std::sqrt(d2) : std::pow(d2, e2)) * G[p] *
                       tables.factors[base + e];
              }
            }
          }
          for (; e < nelem; ++e) {
            double d2 = (xp - tables.images.row(base + e)).squaredNorm();
            orbit += (inv_sqrt ? 1.0 / std::sqrt(d2) : std::pow(d2, e2)) *
                     tables.factors[base + e];
          }
          acc += c * G[p] * orbit;
        }
        K.entries(p, q) = acc;
      }
    }
  }, opts.threads);

  K.tail_bound = tail;
  K.group_cutoff = cutoff;
  return K;
}

double matrix_asymmetry(const KernelMatrix& K) {
  int N = static_cast<int>(K.entries.rows());
  double worst = 0.0;
  for (int p = 0; p < N; ++p)
    for (int q = p + 1; q < N; ++q)
      worst = std::max(worst, std::abs(K.entries(p, q) - K.entries(q, p)));
  return worst;
}

}  // namespace ialpha
