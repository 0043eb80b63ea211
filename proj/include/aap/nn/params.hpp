#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "aap/core/graph.hpp"
#include "aap/core/rng.hpp"

namespace aap {

using ParamId = int32_t;

// Named trainable leaves. Registration order is fixed by network construction
// and defines checkpoint layout, so identical configs produce byte-identical
// checkpoints.
class ParamStore {
 public:
  ParamId add(std::string name, Tensor init) {
    if (by_name_.count(name)) throw std::invalid_argument("duplicate parameter: " + name);
    auto n = std::make_unique<Node>();
    n->value = std::move(init);
    n->requires_grad = true;
    n->is_leaf = true;
    ParamId id = static_cast<ParamId>(params_.size());
    by_name_.emplace(name, id);
    names_.push_back(std::move(name));
    params_.push_back(std::move(n));
    return id;
  }

  Node* node(ParamId id) const { return params_.at(id).get(); }
  Tensor& value(ParamId id) { return params_.at(id)->value; }
  const Tensor& value(ParamId id) const { return params_.at(id)->value; }
  const std::string& name(ParamId id) const { return names_.at(id); }
  size_t count() const { return params_.size(); }

  ParamId find(const std::string& name) const {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? -1 : it->second;
  }

  std::vector<Node*> leaves() const {
    std::vector<Node*> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p.get());
    return out;
  }

  void zero_grads() {
    for (const auto& p : params_) p->zero_grad();
  }

  int64_t total_size() const {
    int64_t n = 0;
    for (const auto& p : params_) n += p->value.size();
    return n;
  }

 private:
  std::vector<std::unique_ptr<Node>> params_;
  std::vector<std::string> names_;
  std::unordered_map<std::string, ParamId> by_name_;
};

namespace init {

inline Tensor glorot_uniform(Rng& rng, int64_t fan_in, int64_t fan_out,
                             std::vector<int64_t> shape, double gain = 1.0) {
  const double limit = gain * std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<float>(rng.uniform(-limit, limit));
  return t;
}

}  // namespace init
}  // namespace aap
