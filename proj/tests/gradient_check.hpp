#pragma once

// Central finite-difference oracle for layer gradients. The checked loss is
// L(x, theta) = sum(c .* f(x, theta)) for a fixed random coefficient tensor c,
// so dL/dy = c feeds each layer's backward. Kept independent of the library's
// backward implementations.

#include <algorithm>
#include <cmath>
#include <functional>

#include "cmit/tensor.hpp"

namespace gradcheck {

inline double rel_err(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-2});
  return std::abs(analytic - numeric) / denom;
}

inline double weighted_sum(const cmit::Tensor& y, const cmit::Tensor& c) {
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += y[i] * c[i];
  return acc;
}

/// Max relative error between `analytic` and the central difference of
/// L = sum(c .* fwd()) with respect to `target`, perturbing one entry at a
/// time. `fwd` must read `target` afresh on every call.
inline double max_rel_error(cmit::Tensor& target, const cmit::Tensor& analytic,
                            const cmit::Tensor& c,
                            const std::function<cmit::Tensor()>& fwd,
                            double step = 1e-5) {
  double worst = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double saved = target[i];
    target[i] = saved + step;
    const double lp = weighted_sum(fwd(), c);
    target[i] = saved - step;
    const double lm = weighted_sum(fwd(), c);
    target[i] = saved;
    const double numeric = (lp - lm) / (2.0 * step);
    worst = std::max(worst, rel_err(analytic[i], numeric));
  }
  return worst;
}

}  // namespace gradcheck
