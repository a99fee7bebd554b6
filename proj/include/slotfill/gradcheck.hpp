#pragma once

#include <algorithm>
#include <functional>

#include "slotfill/tensor.hpp"

namespace slotfill {

// Central finite differences of a scalar function, one coordinate at a time.
inline Tensor fd_gradient(const std::function<double(const Tensor&)>& f,
                          const Tensor& x, double eps = 1e-5) {
  if (eps <= 0.0) throw std::invalid_argument("fd_gradient: eps must be > 0");
  Tensor g(x.shape());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + eps;
    const double hi = f(probe);
    probe[i] = x[i] - eps;
    const double lo = f(probe);
    probe[i] = x[i];
    g[i] = (hi - lo) / (2.0 * eps);
  }
  return g;
}

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max(1e-8, std::abs(a) + std::abs(b));
}

inline double max_relative_error(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_relative_error");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, relative_error(a[i], b[i]));
  return worst;
}

// Compares an analytic gradient against central differences of f at x.
inline double finite_difference_check(
    const std::function<double(const Tensor&)>& f, const Tensor& x,
    const Tensor& analytic, double eps = 1e-5) {
  return max_relative_error(analytic, fd_gradient(f, x, eps));
}

}  // namespace slotfill
