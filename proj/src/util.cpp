#include "ialpha/util.hpp"

#include <cmath>
#include <cstdio>
#include <thread>
#include <vector>

namespace ialpha {

void parallel_for(std::size_t count,
                  const std::function<void(std::size_t, std::size_t)>& chunk,
                  int threads) {
  if (count == 0) return;
  unsigned n = threads > 0 ? static_cast<unsigned>(threads)
                           : std::max(1u, std::thread::hardware_concurrency());
  n = std::min<unsigned>(n, static_cast<unsigned>(count));
  if (n <= 1) {
    chunk(0, count);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(n);
  std::size_t base = count / n, extra = count % n, begin = 0;
  for (unsigned i = 0; i < n; ++i) {
    std::size_t len = base + (i < extra ? 1 : 0);
    pool.emplace_back(chunk, begin, begin + len);
    begin += len;
  }
  for (auto& t : pool) t.join();
}

QuadratureRule gauss_legendre(int m) {
  QuadratureRule r;
  r.nodes.resize(m);
  r.weights.resize(m);
  // Newton iteration on Legendre polynomials, symmetric pairs.
  for (int i = 0; i < (m + 1) / 2; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (m + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= m; ++k) {
        double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = m * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    r.nodes[i] = -x;
    r.weights[i] = w;
    r.nodes[m - 1 - i] = x;
    r.weights[m - 1 - i] = w;
  }
  return r;
}

QuadratureRule gauss_legendre(int m, double a, double b) {
  QuadratureRule r = gauss_legendre(m);
  double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  r.nodes = (r.nodes.array() * half + mid).matrix();
  r.weights *= half;
  return r;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace ialpha
