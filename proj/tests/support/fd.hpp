#pragma once

#include <functional>
#include <vector>

#include "aap/core/tensor.hpp"

namespace testsup {

// Central finite difference of a double-precision scalar function with
// respect to one flat input vector. `f` must be a 64-bit shadow of the
// computation whose analytic gradient is being checked.
inline std::vector<double> central_diff(const std::function<double(const std::vector<double>&)>& f,
                                        std::vector<double> x, double h = 1e-3) {
  std::vector<double> g(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double fp = f(x);
    x[i] = x0 - h;
    const double fm = f(x);
    x[i] = x0;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline double rel_err(double a, double b, double floor = 1e-6) {
  const double denom = std::max({std::abs(a), std::abs(b), floor});
  return std::abs(a - b) / denom;
}

inline std::vector<double> to_double(const aap::Tensor& t) {
  std::vector<double> v(t.size());
  for (int64_t i = 0; i < t.size(); ++i) v[i] = t[i];
  return v;
}

}  // namespace testsup
