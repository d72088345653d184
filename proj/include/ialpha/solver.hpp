#pragma once

#include <Eigen/LU>
#include <string>

#include "ialpha/geometry.hpp"
#include "ialpha/kernel.hpp"

namespace ialpha {

/// Positive nodal solution with its iteration history.
struct SolutionField {
  Vec values;
  std::vector<double> residual_history;
  double alpha = 2.0;
};

struct SolveReport {
  bool converged = false;
  int iterations = 0;
  double final_residual = 0.0;
  double min_value = 0.0;
  double max_value = 0.0;
  double yamabe_alpha_estimate = 0.0;
  double integral_bound_lhs = 0.0;
  double integral_bound_rhs = 0.0;
  double condition_estimate = 0.0;
  std::string failure;
};

/// The weighted discrete operator: I f = entries * diag(w .* eta^n) f, and
/// its left inverse P realized by a dense LU solve with one step of
/// iterative refinement.
class KernelOperator {
 public:
  KernelOperator(const KernelMatrix& K, const Chart& chart);

  Vec apply_I(const Vec& f) const;
  Vec apply_P(const Vec& u) const;

  const Vec& volume_weights() const { return V_; }
  const Mat& weighted_matrix() const { return M_; }
  double condition_estimate() const { return cond_; }
  double tail_bound() const { return tail_bound_; }

 private:
  Mat M_;
  Vec V_;
  Eigen::PartialPivLU<Mat> lu_;
  double cond_ = 0.0;
  double tail_bound_ = 0.0;
};

struct SolveOptions {
  int max_iterations = 60;
  double picard_damping = 0.5;
  bool with_yamabe = true;
  int yamabe_starts = 5;
  int yamabe_iterations = 150;
};

/// Damped Newton on F(u) = u - I(u^p) with a positivity-preserving line
/// search, falling back to damped fixed-point steps when Newton stalls.
std::pair<SolutionField, SolveReport> solve_integral_equation(
    const ProblemSpec& spec, const Chart& chart, const KernelOperator& op, Vec u0,
    const SolveOptions& opts = {});

/// Default initial guess: the constant c0 with c0^{p-1} = mean(P 1).
Vec default_initial_guess(const ProblemSpec& spec, const Chart& chart,
                          const KernelOperator& op);

/// Best value of the Rayleigh quotient
///   <phi, P phi>_V / (sum_V phi^{2n/(n-alpha)})^{(n-alpha)/n}
/// found by projected gradient descent over positive fields, from the
/// constant start plus the given number of seeded random starts.
double yamabe_alpha(const ProblemSpec& spec, const Chart& chart,
                    const KernelOperator& op, int random_starts = 5,
                    int iterations = 150, std::uint64_t seed = 2024);

/// (lhs, rhs) of the a-priori integral bound:
///   int u^p dV  <=  max|P 1|^{(n+alpha)/(2 alpha)} * vol.
std::pair<double, double> apriori_integral_bound(const ProblemSpec& spec,
                                                 const Chart& chart,
                                                 const KernelOperator& op,
                                                 const Vec& u);

}  // namespace ialpha
