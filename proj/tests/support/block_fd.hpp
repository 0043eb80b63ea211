#pragma once

#include <functional>

#include "aap/nn/backend.hpp"
#include "support/fd.hpp"

namespace testsup {

// FD check for a ParamStore-backed block: builds the scalar through the taped
// backend, then compares every parameter gradient against central differences
// of `ref`, a double shadow receiving all parameter values in registration
// order.
inline double check_param_grads(
    aap::ParamStore& ps, const std::function<aap::Node*(aap::Graph&, aap::Taped&)>& build,
    const std::function<double(const std::vector<std::vector<double>>&)>& ref, double h = 1e-3) {
  aap::Graph g;
  aap::Taped tb{&ps, &g};
  ps.zero_grads();
  aap::Node* out = build(g, tb);
  g.backward(out);

  std::vector<std::vector<double>> base;
  for (size_t i = 0; i < ps.count(); ++i)
    base.push_back(to_double(ps.value(static_cast<aap::ParamId>(i))));

  double worst = 0.0;
  for (size_t pi = 0; pi < ps.count(); ++pi) {
    auto f = [&](const std::vector<double>& x) {
      auto args = base;
      args[pi] = x;
      return ref(args);
    };
    const std::vector<double> fd = central_diff(f, base[pi], h);
    double leaf_scale = 0.0;
    for (double v : fd) leaf_scale = std::max(leaf_scale, std::abs(v));
    const double floor = std::max(1e-6, 1e-3 * leaf_scale);
    const aap::Tensor& grad = ps.node(static_cast<aap::ParamId>(pi))->grad;
    for (size_t j = 0; j < fd.size(); ++j) {
      const double an = grad.empty() ? 0.0 : grad[static_cast<int64_t>(j)];
      worst = std::max(worst, rel_err(an, fd[j], floor));
    }
  }
  return worst;
}

}  // namespace testsup
