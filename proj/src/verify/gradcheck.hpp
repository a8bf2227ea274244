// Central-difference gradient checking against analytic backward passes.
#pragma once

#include <cmath>

#include "core/tensor.hpp"

namespace lvt {

/// Numeric gradient of a scalar-valued functional via central differences.
/// `f` is called with perturbed copies of `x`; non-finite values abort the check.
template <typename T, typename Fn>
TensorT<T> finite_diff_grad(Fn&& f, const TensorT<T>& x, T eps) {
  TensorT<T> g(x.shape());
  TensorT<T> probe = x;
  for (index_t i = 0; i < x.numel(); ++i) {
    const T saved = probe[i];
    probe[i] = saved + eps;
    const T up = f(probe);
    probe[i] = saved - eps;
    const T down = f(probe);
    probe[i] = saved;
    if (!std::isfinite(double(up)) || !std::isfinite(double(down))) {
      throw ValueError("finite_diff_grad: functional returned a non-finite value");
    }
    g[i] = (up - down) / (2 * eps);
  }
  return g;
}

/// Symmetric relative error, zero-safe: |a-b| / (|a|+|b|+1e-12).
template <typename T>
double rel_err(T a, T b) {
  return std::abs(double(a) - double(b)) /
         (std::abs(double(a)) + std::abs(double(b)) + 1e-12);
}

/// Worst elementwise relative error between two same-shape gradients.
/// `floor` joins the denominator, so |a-b| <= tol*floor always passes: with
/// floor 1e-5 and tol 1e-4 that is an absolute allowance of 1e-9, which keeps
/// structurally-zero gradients (both sides pure roundoff noise, e.g. a bias
/// that a downstream softmax cancels) from comparing as noise ratios.
template <typename T>
double max_rel_err(const TensorT<T>& a, const TensorT<T>& b, double floor = 1e-12) {
  if (!a.same_shape(b)) {
    throw ShapeError("max_rel_err: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  }
  double worst = 0;
  for (index_t i = 0; i < a.numel(); ++i) {
    worst = std::max(worst, std::abs(double(a[i]) - double(b[i])) /
                                (std::abs(double(a[i])) + std::abs(double(b[i])) + floor));
  }
  return worst;
}

}  // namespace lvt
