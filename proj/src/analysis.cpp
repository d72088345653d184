#include "ialpha/analysis.hpp"

#include <cmath>
#include <memory>
#include <random>

namespace ialpha {

Vec reflect(const Vec& x, double lambda) {
  Vec y = x;
  y[y.size() - 1] = 2.0 * lambda - x[x.size() - 1];
  return y;
}

FieldFn make_chart_field(const Chart& chart, const Vec& values, double weight_exponent) {
  auto chart_copy = std::make_shared<Chart>(chart);
  auto interp =
      std::make_shared<ChartInterpolator>(*chart_copy, values, weight_exponent);
  return [chart_copy, interp](const Vec& x) { return (*interp)(x); };
}

FieldFn kelvin_transform(FieldFn base, const MoebiusMap& mu, const ProblemSpec& spec) {
  MoebiusMap inv = mu.inverse();
  double s = 0.5 * (spec.n - spec.alpha);
  return [base = std::move(base), inv, s](const Vec& x) {
    Vec y = inv(x);
    return base(y) * std::pow(inv.euclidean_derivative(x), s);
  };
}

FieldFn make_bubble_field(const ProblemSpec& spec, const Bubble& b) {
  return [spec, b](const Vec& x) { return bubble_value(spec, b, x); };
}

FieldFn rotate_field(FieldFn base, const Mat& rotation) {
  Mat Rt = rotation.transpose();
  return [base = std::move(base), Rt](const Vec& x) { return base(Rt * x); };
}

MovingPlaneReport moving_plane_scan(const FieldFn& vhat,
                                    const std::vector<double>& lambdas,
                                    const std::vector<Vec>& limit_points,
                                    const MovingPlaneOptions& opts) {
  for (std::size_t i = 1; i < lambdas.size(); ++i)
    if (!(lambdas[i] < lambdas[i - 1]))
      throw std::invalid_argument("moving_plane_scan: lambdas must strictly decrease");

  const int n = opts.n;
  const int spa = opts.samples_per_axis;
  const double B = opts.box_halfwidth;
  double cell = std::pow(2.0 * B / spa, n - 1) * (B / spa);

  MovingPlaneReport rep;
  rep.lambdas = lambdas;
  for (double lambda : lambdas) {
    double clearance = std::numeric_limits<double>::infinity();
    if (opts.limit_contains_infinity) clearance = -std::numeric_limits<double>::infinity();
    for (const auto& l : limit_points)
      clearance = std::min(clearance, lambda - l[n - 1]);
    rep.clearance.push_back(clearance);
    if (!(clearance > 0.0)) {
      rep.scanned.push_back(false);
      rep.sigma_minus_measure.push_back(std::numeric_limits<double>::quiet_NaN());
      rep.min_gap.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    double min_gap = std::numeric_limits<double>::infinity();
    double measure = 0.0;
    Vec x(n);
    std::vector<int> idx(n, 0);
    long total = 1;
    for (int d = 0; d < n; ++d) total *= spa;
    for (long flat = 0; flat < total; ++flat) {
      long rem = flat;
      for (int d = 0; d < n - 1; ++d) {
        int i = rem % spa;
        rem /= spa;
        x[d] = -B + (2.0 * B) * (i + 0.5) / spa;
      }
      int iz = rem % spa;
      x[n - 1] = lambda + B * (iz + 0.5) / spa;
      double gap = vhat(reflect(x, lambda)) - vhat(x);
      min_gap = std::min(min_gap, gap);
      if (gap < -opts.floor) measure += cell;
    }
    rep.scanned.push_back(true);
    rep.sigma_minus_measure.push_back(measure);
    rep.min_gap.push_back(min_gap);
    rep.limit_set_clearance = clearance;

    if (std::abs(lambda) < 1e-15) {
      // One-sided normal derivative on the plane itself; the worst (largest)
      // value over the plane samples.
      double worst = -std::numeric_limits<double>::infinity();
      Vec q(n);
      long ptotal = 1;
      for (int d = 0; d < n - 1; ++d) ptotal *= spa;
      for (long flat = 0; flat < ptotal; ++flat) {
        long rem = flat;
        for (int d = 0; d < n - 1; ++d) {
          int i = rem % spa;
          rem /= spa;
          q[d] = -B + (2.0 * B) * (i + 0.5) / spa;
        }
        q[n - 1] = 0.0;
        double v0 = vhat(q);
        q[n - 1] = opts.fd_step;
        double v1 = vhat(q);
        worst = std::max(worst, (v1 - v0) / opts.fd_step);
      }
      rep.boundary_derivative = worst;
      rep.boundary_derivative_evaluated = true;
    }
  }
  return rep;
}

RescaledField rescale(const SolutionField& u, const Chart& chart,
                      const ProblemSpec& spec, int p0_index, double lambda,
                      double window, int samples_per_axis) {
  if (lambda < 1.0) throw std::invalid_argument("rescale: lambda must be >= 1");
  RescaledField out;
  out.lambda = lambda;
  out.center = chart.nodes.row(p0_index).transpose();
  double t0 = 0.5 * (1.0 + out.center.squaredNorm());
  double shrink = std::pow(lambda, -2.0 / (spec.n - spec.alpha));
  out.sigma = t0 * shrink;

  // Keep the sample ball clear of the sampled limit set.
  double dist = std::numeric_limits<double>::infinity();
  for (const auto& l : chart.group.limit_point_samples())
    dist = std::min(dist, (l - out.center).norm());
  double wmax = std::isfinite(dist) ? 0.9 * dist / out.sigma : window;
  out.window = std::min(window, wmax);
  out.clipped = out.window < window;

  ChartInterpolator interp(chart, u.values, 0.0);
  int spa = samples_per_axis;
  long total = 1;
  for (int d = 0; d < spec.n; ++d) total *= spa;
  out.points.resize(total, spec.n);
  out.values.resize(total);
  Vec x(spec.n);
  for (long flat = 0; flat < total; ++flat) {
    long rem = flat;
    for (int d = 0; d < spec.n; ++d) {
      int i = rem % spa;
      rem /= spa;
      x[d] = -out.window + 2.0 * out.window * i / (spa - 1);
    }
    out.points.row(flat) = x.transpose();
    out.values[flat] = interp(out.center + out.sigma * x) / lambda;
  }
  out.center_value = interp(out.center) / lambda;
  return out;
}

double kernel_flat_limit_gap(const ProblemSpec& spec, const KleinianGroup& group,
                             const Vec& z0, double lambda, double window,
                             int cutoff, int npairs) {
  double t0 = 0.5 * (1.0 + z0.squaredNorm());
  double sigma = t0 * std::pow(lambda, -2.0 / (spec.n - spec.alpha));
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-window, window);
  double gap = 0.0;
  int made = 0;
  while (made < npairs) {
    Vec x(spec.n), y(spec.n);
    for (int d = 0; d < spec.n; ++d) {
      x[d] = u(rng);
      y[d] = u(rng);
    }
    if (x.norm() > window || y.norm() > window) continue;
    if ((x - y).norm() < 0.3) continue;
    ++made;
    double kval = periodized_kernel(spec, group, z0 + sigma * x, z0 + sigma * y, cutoff) /
                  (lambda * lambda);
    double flat = spec.c * std::pow((x - y).squaredNorm(), 0.5 * (spec.alpha - spec.n));
    gap = std::max(gap, std::abs(kval - flat));
  }
  return gap;
}

BubbleFit bubble_fit(const Mat& points, const Vec& values, const ProblemSpec& spec) {
  const long N = points.rows();
  const int n = static_cast<int>(points.cols());
  const double s = 0.5 * (spec.n - spec.alpha);
  BubbleFit out;

  // Initial guess from the sample peak and its half-height radius.
  long imax;
  double vmax = values.maxCoeff(&imax);
  if (!(vmax > 0.0)) return out;
  Vec x0 = points.row(imax).transpose();
  double drop = std::pow(2.0, -s);  // value at radius t relative to the peak
  double t = 0.0;
  int cnt = 0;
  for (long i = 0; i < N; ++i) {
    if (values[i] < drop * vmax * 1.05 && values[i] > drop * vmax * 0.95) {
      t += (points.row(i).transpose() - x0).norm();
      ++cnt;
    }
  }
  t = cnt > 0 ? t / cnt : 0.5;
  t = std::max(t, 1e-3);
  double A = vmax * std::pow(t, s);

  Vec theta(n + 2);  // (log t, x0, log A)
  theta[0] = std::log(t);
  theta.segment(1, n) = x0;
  theta[n + 1] = std::log(A);

  auto model = [&](const Vec& th, const Vec& x) {
    double tt = std::exp(th[0]);
    double r2 = (x - th.segment(1, n)).squaredNorm();
    return std::exp(th[n + 1]) * std::pow(tt / (tt * tt + r2), s);
  };

  double mu = 1e-3;
  double prev_cost = std::numeric_limits<double>::infinity();
  bool ok = false;
  for (int it = 0; it < 200; ++it) {
    double tt = std::exp(theta[0]);
    Vec r(N);
    Mat J(N, n + 2);
    for (long i = 0; i < N; ++i) {
      Vec d = points.row(i).transpose() - theta.segment(1, n);
      double r2 = d.squaredNorm();
      double q = tt * tt + r2;
      double m = std::exp(theta[n + 1]) * std::pow(tt / q, s);
      r[i] = m - values[i];
      J(i, 0) = m * s * (1.0 - 2.0 * tt * tt / q);
      J.block(i, 1, 1, n) = (2.0 * s * m / q) * d.transpose();
      J(i, n + 1) = m;
    }
    double cost = r.squaredNorm();
    Mat H = J.transpose() * J;
    Vec g = J.transpose() * r;
    Vec step = (H + mu * Mat::Identity(n + 2, n + 2)).ldlt().solve(-g);
    Vec trial = theta + step;
    double tcost = 0.0;
    for (long i = 0; i < N; ++i) {
      double d = model(trial, points.row(i).transpose()) - values[i];
      tcost += d * d;
    }
    if (tcost < cost) {
      theta = trial;
      mu = std::max(mu * 0.3, 1e-12);
      if (std::abs(cost - tcost) < 1e-16 * (1.0 + cost) && it > 3) {
        ok = true;
        break;
      }
      prev_cost = tcost;
    } else {
      mu *= 4.0;
      if (mu > 1e10) break;
    }
    if (g.cwiseAbs().maxCoeff() < 1e-13 * (1.0 + std::sqrt(cost))) {
      ok = true;
      break;
    }
  }
  (void)prev_cost;

  out.bubble.t = std::exp(theta[0]);
  out.bubble.center = theta.segment(1, n);
  out.bubble.amplitude = std::exp(theta[n + 1]);
  double worst = 0.0;
  for (long i = 0; i < N; ++i)
    worst = std::max(worst,
                     std::abs(model(theta, points.row(i).transpose()) - values[i]));
  out.fit_residual = worst / values.cwiseAbs().maxCoeff();
  out.converged = ok || out.fit_residual < 1e-6;
  return out;
}

ContinuationPath continue_alpha(const Chart& chart, double alpha_lo, double alpha_hi,
                                const ContinuationOptions& opts) {
  ContinuationPath path;
  if (!chart.group.is_trivial()) {
    double delta = exponent_estimate(chart.group);
    if (!(alpha_hi < chart.n - 2.0 * delta))
      throw std::invalid_argument(
          "continue_alpha: alpha range exceeds n - 2 * exponent estimate");
  }
  int m = std::max(1, static_cast<int>(std::round((alpha_hi - alpha_lo) / opts.step)));
  Vec warm;
  path.compact = true;
  for (int i = 0; i <= m; ++i) {
    double alpha = alpha_lo + (alpha_hi - alpha_lo) * i / m;
    ProblemSpec spec(chart.n, alpha, opts.tol);
    KernelMatrix K = assemble(chart, spec, opts.assembly);
    KernelOperator op(K, chart);
    Vec u0 = i == 0 ? default_initial_guess(spec, chart, op) : warm;
    auto [sol, rep] = solve_integral_equation(spec, chart, op, u0, opts.solve);
    if (!rep.converged) {
      path.failure = "solve failed at alpha " + format_double(alpha) + ": " + rep.failure;
      return path;
    }
    ContinuationStep step;
    step.alpha = alpha;
    step.solution = sol;
    step.sup_norm = rep.max_value;
    step.inf_value = rep.min_value;
    step.residual = rep.final_residual;
    step.yamabe = rep.yamabe_alpha_estimate;
    step.bound_lhs = rep.integral_bound_lhs;
    step.bound_rhs = rep.integral_bound_rhs;
    path.steps.push_back(step);
    path.last_good_alpha = alpha;
    warm = sol.values;
    if (step.sup_norm > opts.bound || 1.0 / step.inf_value > opts.bound) {
      path.compact = false;
      path.failure = "admissible-set bound violated at alpha " + format_double(alpha);
      return path;
    }
  }
  path.completed = true;
  return path;
}

}  // namespace ialpha
