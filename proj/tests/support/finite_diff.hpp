#pragma once

// Test-only numerical oracles. Nothing here calls into the reverse-mode code.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>

namespace magi::testing {

/// Central differences of a scalar function over every coordinate of x.
inline Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                          const Eigen::VectorXd& x, double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double orig = probe[k];
    probe[k] = orig + h;
    const double up = f(probe);
    probe[k] = orig - h;
    const double down = f(probe);
    probe[k] = orig;
    g[k] = (up - down) / (2.0 * h);
  }
  return g;
}

/// Central differences that step around ReLU kinks. A coordinate whose left and
/// right one-sided slopes disagree has a kink within h; its step shrinks tenfold
/// until the slopes agree or h reaches h_min.
inline Eigen::VectorXd kink_aware_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                             const Eigen::VectorXd& x, double h = 1e-5, double h_min = 1e-8) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd probe = x;
  const double f0 = f(x);
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double orig = probe[k];
    for (double step = h;; step /= 10.0) {
      probe[k] = orig + step;
      const double up = f(probe);
      probe[k] = orig - step;
      const double down = f(probe);
      const double right = (up - f0) / step, left = (f0 - down) / step;
      g[k] = (up - down) / (2.0 * step);
      if (std::abs(right - left) <= 1e-3 * std::max({std::abs(right), std::abs(left), 1e-6}) || step / 10.0 < h_min)
        break;
    }
    probe[k] = orig;
  }
  return g;
}

/// ||a - b|| / max(||a||, ||b||), with an absolute floor for all-zero gradients.
inline double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-12});
  return (a - b).norm() / scale;
}

/// Composite Simpson rule on [lo, hi] with n (even) intervals.
inline double simpson(const std::function<double(double)>& f, double lo, double hi, int n) {
  const double h = (hi - lo) / n;
  double s = f(lo) + f(hi);
  for (int k = 1; k < n; ++k) s += f(lo + k * h) * (k % 2 == 1 ? 4.0 : 2.0);
  return s * h / 3.0;
}

}  // namespace magi::testing
