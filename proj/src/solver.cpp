#include "ialpha/solver.hpp"

#include <cmath>
#include <random>

namespace ialpha {

KernelOperator::KernelOperator(const KernelMatrix& K, const Chart& chart) {
  int N = chart.size();
  V_.resize(N);
  for (int i = 0; i < N; ++i)
    V_[i] = chart.weights[i] * std::pow(chart.eta[i], chart.n);
  M_ = K.entries * V_.asDiagonal();
  lu_.compute(M_);
  tail_bound_ = K.tail_bound;

  // Crude 1-norm condition estimate from a few solves.
  double norm1 = M_.cwiseAbs().colwise().sum().maxCoeff();
  double inv_norm = 0.0;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 4; ++trial) {
    Vec r(N);
    for (int i = 0; i < N; ++i) r[i] = u(rng);
    r /= r.cwiseAbs().sum();
    inv_norm = std::max(inv_norm, lu_.solve(r).cwiseAbs().sum());
  }
  cond_ = norm1 * inv_norm;
}

Vec KernelOperator::apply_I(const Vec& f) const { return M_ * f; }

Vec KernelOperator::apply_P(const Vec& u) const {
  Vec f = lu_.solve(u);
  // One step of iterative refinement.
  Vec r = u - M_ * f;
  f += lu_.solve(r);
  double rel = (u - M_ * f).cwiseAbs().maxCoeff() /
               std::max(1e-300, u.cwiseAbs().maxCoeff());
  if (rel > 1e-6)
    throw std::runtime_error(
        "apply_P: ill-conditioned solve, relative residual " + format_double(rel) +
        ", condition estimate " + format_double(cond_));
  return f;
}

Vec default_initial_guess(const ProblemSpec& spec, const Chart& chart,
                          const KernelOperator& op) {
  Vec one = Vec::Ones(chart.size());
  double mean = op.apply_P(one).mean();
  double c0 = std::pow(std::max(mean, 1e-12),
                       (spec.n - spec.alpha) / (2.0 * spec.alpha));
  return Vec::Constant(chart.size(), c0);
}

std::pair<SolutionField, SolveReport> solve_integral_equation(
    const ProblemSpec& spec, const Chart& chart, const KernelOperator& op, Vec u0,
    const SolveOptions& opts) {
  const int N = chart.size();
  SolutionField field;
  SolveReport rep;
  field.alpha = spec.alpha;
  rep.condition_estimate = op.condition_estimate();
  if (u0.minCoeff() <= 0.0) {
    rep.failure = "initial guess not positive";
    field.values = u0;
    return {field, rep};
  }

  auto residual = [&](const Vec& u) -> Vec {
    Vec up = u.array().pow(spec.p);
    return u - op.apply_I(up);
  };

  Vec u = u0;
  Vec F = residual(u);
  double res = F.cwiseAbs().maxCoeff();
  field.residual_history.push_back(res);

  int stalled = 0;
  int iter = 0;
  for (; iter < opts.max_iterations && res > spec.tol.solve_tol; ++iter) {
    // Newton step: J = Id - p * M * diag(u^{p-1}).
    Vec up1 = u.array().pow(spec.p - 1.0);
    Mat J = Mat::Identity(N, N) - spec.p * (op.weighted_matrix() * up1.asDiagonal());
    Vec delta = Eigen::PartialPivLU<Mat>(J).solve(-F);

    double lam = 1.0;
    bool accepted = false;
    while (lam > 1e-4) {
      Vec trial = u + lam * delta;
      if (trial.minCoeff() > 0.0) {
        Vec Ft = residual(trial);
        double rt = Ft.cwiseAbs().maxCoeff();
        if (rt < res) {
          u = trial;
          F = Ft;
          res = rt;
          accepted = true;
          break;
        }
      }
      lam *= 0.5;
    }
    if (!accepted) {
      // Damped fixed-point fallback; positive by construction.
      Vec up = u.array().pow(spec.p);
      Vec trial = (1.0 - opts.picard_damping) * u + opts.picard_damping * op.apply_I(up);
      if (trial.minCoeff() <= 0.0) {
        rep.failure = "positivity lost, unrecoverable by damping";
        break;
      }
      Vec Ft = residual(trial);
      double rt = Ft.cwiseAbs().maxCoeff();
      stalled = rt < res ? 0 : stalled + 1;
      u = trial;
      F = Ft;
      res = rt;
      if (stalled > 8) {
        rep.failure = "stalled: no residual decrease over fallback steps";
        break;
      }
    } else {
      stalled = 0;
    }
    field.residual_history.push_back(res);
  }

  field.values = u;
  rep.iterations = iter;
  rep.final_residual = res;
  rep.min_value = u.minCoeff();
  rep.max_value = u.maxCoeff();
  rep.converged = res <= spec.tol.solve_tol && rep.min_value > 0.0;
  if (!rep.converged && rep.failure.empty())
    rep.failure = "no convergence within max iterations; best residual " +
                  format_double(res);

  if (rep.converged) {
    auto [lhs, rhs] = apriori_integral_bound(spec, chart, op, u);
    rep.integral_bound_lhs = lhs;
    rep.integral_bound_rhs = rhs;
    if (opts.with_yamabe)
      rep.yamabe_alpha_estimate =
          yamabe_alpha(spec, chart, op, opts.yamabe_starts, opts.yamabe_iterations);
  }
  return {field, rep};
}

namespace {

double rayleigh_quotient(const ProblemSpec& spec, const KernelOperator& op,
                         const Vec& V, const Vec& phi, Vec* grad) {
  double m = 2.0 * spec.n / (spec.n - spec.alpha);
  Vec Pphi = op.apply_P(phi);
  double E = (V.array() * phi.array() * Pphi.array()).sum();
  double S = (V.array() * phi.array().pow(m)).sum();
  double D = std::pow(S, 2.0 / m);
  double Q = E / D;
  if (grad) {
    Vec dE = 2.0 * (V.array() * Pphi.array()).matrix();
    Vec dD = (2.0 * std::pow(S, 2.0 / m - 1.0)) *
             (V.array() * phi.array().pow(m - 1.0)).matrix();
    *grad = (dE - Q * dD) / D;
  }
  return Q;
}

}  // namespace

double yamabe_alpha(const ProblemSpec& spec, const Chart& chart,
                    const KernelOperator& op, int random_starts, int iterations,
                    std::uint64_t seed) {
  const int N = chart.size();
  const Vec& V = op.volume_weights();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 0.3);

  double best = std::numeric_limits<double>::infinity();
  for (int start = 0; start <= random_starts; ++start) {
    Vec phi;
    if (start == 0) {
      phi = Vec::Ones(N);
    } else {
      phi.resize(N);
      for (int i = 0; i < N; ++i) phi[i] = std::exp(gauss(rng));
    }
    Vec grad;
    double Q = rayleigh_quotient(spec, op, V, phi, &grad);
    double step = 0.1;
    for (int it = 0; it < iterations; ++it) {
      Vec trial = phi - step * grad;
      double floor = 1e-8 * trial.cwiseAbs().maxCoeff();
      trial = trial.cwiseMax(floor);
      trial /= trial.maxCoeff();
      Vec tgrad;
      double Qt = rayleigh_quotient(spec, op, V, trial, &tgrad);
      if (Qt < Q) {
        phi = trial;
        Q = Qt;
        grad = tgrad;
        step *= 1.3;
      } else {
        step *= 0.4;
        if (step < 1e-12) break;
      }
    }
    best = std::min(best, Q);
  }
  return best;
}

std::pair<double, double> apriori_integral_bound(const ProblemSpec& spec,
                                                 const Chart& chart,
                                                 const KernelOperator& op,
                                                 const Vec& u) {
  const Vec& V = op.volume_weights();
  double lhs = (V.array() * u.array().pow(spec.p)).sum();
  Vec P1 = op.apply_P(Vec::Ones(chart.size()));
  double vol = V.sum();
  double rhs = std::pow(P1.cwiseAbs().maxCoeff(),
                        (spec.n + spec.alpha) / (2.0 * spec.alpha)) *
               vol;
  return {lhs, rhs};
}

}  // namespace ialpha
