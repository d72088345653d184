#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>

namespace ialpha {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Splits [0, count) into contiguous chunks and runs them on worker threads.
/// Each index is processed by exactly one thread, so per-index results do not
/// depend on the thread count. threads <= 0 picks hardware concurrency.
void parallel_for(std::size_t count,
                  const std::function<void(std::size_t, std::size_t)>& chunk,
                  int threads = 0);

struct QuadratureRule {
  Vec nodes;
  Vec weights;
};

/// Gauss-Legendre rule with m points on [-1, 1].
QuadratureRule gauss_legendre(int m);

/// Gauss-Legendre rule mapped to [a, b].
QuadratureRule gauss_legendre(int m, double a, double b);

/// Shortest-roundtrip-ish fixed formatting used for all CSV output, so that
/// identical runs produce byte-identical files.
std::string format_double(double v);

}  // namespace ialpha
