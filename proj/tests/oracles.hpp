#pragma once

// Independent numerical oracles shared by the tests.

#include <cmath>
#include <functional>
#include <numbers>
#include <utility>
#include <vector>

namespace oracle {

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_m.
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int m) {
  std::vector<double> x(m), w(m);
  for (int i = 0; i < m; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (m + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= m; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = m * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  return {x, w};
}

/// Composite Gauss-Legendre on [lo, hi] with `panels` panels of order 20.
inline double integrate(const std::function<double(double)>& f, double lo, double hi,
                        int panels = 8) {
  static const auto rule = gauss_legendre(20);
  const double h = (hi - lo) / panels;
  double s = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double a = lo + p * h;
    for (std::size_t i = 0; i < rule.first.size(); ++i) {
      s += rule.second[i] * f(a + 0.5 * h * (rule.first[i] + 1.0));
    }
  }
  return 0.5 * h * s;
}

inline double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace oracle
