#pragma once

#include "aap/core/ops.hpp"
#include "aap/nn/params.hpp"

namespace aap {

// Network forwards are written once as templates over a backend. Eager runs
// the kernels directly (rollout/evaluation); Taped records the same kernels
// on a Graph for backprop. Both backends call identical kernel code, so the
// two paths produce identical arithmetic.

struct Eager {
  const ParamStore* ps;

  using V = Tensor;
  static const Tensor& val(const V& v) { return v; }

  V param(ParamId id) const { return ps->value(id); }
  V constant(Tensor t) const { return t; }

  V matmul(const V& a, const V& b) const { return kern::matmul(a, b); }
  V add(const V& a, const V& b) const { return kern::add(a, b); }
  V sub(const V& a, const V& b) const { return kern::sub(a, b); }
  V mul(const V& a, const V& b) const { return kern::mul(a, b); }
  V scale(const V& a, float c) const { return kern::scale(a, c); }
  V add_scalar(const V& a, float c) const { return kern::add_scalar(a, c); }
  V add_rowvec(const V& a, const V& v) const { return kern::add_rowvec(a, v); }
  V tanh(const V& a) const { return kern::tanh(a); }
  V sigmoid(const V& a) const { return kern::sigmoid(a); }
  V relu(const V& a) const { return kern::relu(a); }
  V exp(const V& a) const { return kern::exp(a); }
  V log(const V& a) const { return kern::log(a); }
  V clamp(const V& a, float lo, float hi) const { return kern::clamp(a, lo, hi); }
  V minimum(const V& a, const V& b) const { return kern::minimum(a, b); }
  V softmax_rows(const V& a) const { return kern::softmax_rows(a); }
  V log_softmax_rows(const V& a) const { return kern::log_softmax_rows(a); }
  V sum_all(const V& a) const { return kern::sum_all(a); }
  V concat_cols(const V& a, const V& b) const { return kern::concat_cols(a, b); }
  V concat_rows(const std::vector<V>& parts) const { return kern::concat_rows(parts); }
  V slice_rows(const V& a, int64_t r0, int64_t r1) const { return kern::slice_rows(a, r0, r1); }
  V slice_cols(const V& a, int64_t c0, int64_t c1) const { return kern::slice_cols(a, c0, c1); }
  V reshape(const V& a, std::vector<int64_t> s) const { return a.reshaped(std::move(s)); }
  V transpose(const V& a) const { return kern::transpose(a); }
  V mul_const(const V& a, const Tensor& c) const { return kern::mul(a, c); }
  V scale_rows(const V& a, const std::vector<float>& s) const { return kern::scale_rows(a, s); }
  V tile_cols(const V& a, int64_t n) const { return kern::tile_cols(a, n); }
  V gather_segments(const V& a, const std::vector<int>& idx, int64_t d) const {
    return kern::gather_segments(a, idx, d);
  }
  V scatter_segments(const V& a, const V& vals, const std::vector<int>& idx) const {
    return kern::scatter_segments(a, vals, idx);
  }
  V gather_cols(const V& a, const std::vector<int>& idx) const { return kern::gather_cols(a, idx); }
  V join_groups(const V& a, const V& b, int64_t g) const { return kern::join_groups(a, b, g); }
  V group_head(const V& a, int64_t g) const { return kern::group_head(a, g); }
  V group_tail(const V& a, int64_t g) const { return kern::group_tail(a, g); }
  V block_matmul_nt(const V& a, const V& b, int64_t t) const {
    return kern::block_matmul_nt(a, b, t);
  }
  V block_matmul_nn(const V& a, const V& b, int64_t t) const {
    return kern::block_matmul_nn(a, b, t);
  }
  V layer_norm(const V& x, const V& gain, const V& bias, float eps = 1e-5f) const {
    return kern::layer_norm_rows(x, gain, bias, eps, nullptr);
  }
};

struct Taped {
  ParamStore* ps;
  Graph* g;

  using V = Node*;
  static const Tensor& val(V v) { return v->value; }

  V param(ParamId id) const { return ps->node(id); }
  V constant(Tensor t) const { return g->constant(std::move(t)); }

  V matmul(V a, V b) const { return ops::matmul(*g, a, b); }
  V add(V a, V b) const { return ops::add(*g, a, b); }
  V sub(V a, V b) const { return ops::sub(*g, a, b); }
  V mul(V a, V b) const { return ops::mul(*g, a, b); }
  V scale(V a, float c) const { return ops::scale(*g, a, c); }
  V add_scalar(V a, float c) const { return ops::add_scalar(*g, a, c); }
  V add_rowvec(V a, V v) const { return ops::add_rowvec(*g, a, v); }
  V tanh(V a) const { return ops::tanh(*g, a); }
  V sigmoid(V a) const { return ops::sigmoid(*g, a); }
  V relu(V a) const { return ops::relu(*g, a); }
  V exp(V a) const { return ops::exp(*g, a); }
  V log(V a) const { return ops::log(*g, a); }
  V clamp(V a, float lo, float hi) const { return ops::clamp(*g, a, lo, hi); }
  V minimum(V a, V b) const { return ops::minimum(*g, a, b); }
  V softmax_rows(V a) const { return ops::softmax_rows(*g, a); }
  V log_softmax_rows(V a) const { return ops::log_softmax_rows(*g, a); }
  V sum_all(V a) const { return ops::sum_all(*g, a); }
  V concat_cols(V a, V b) const { return ops::concat_cols(*g, a, b); }
  V concat_rows(const std::vector<V>& parts) const { return ops::concat_rows(*g, parts); }
  V slice_rows(V a, int64_t r0, int64_t r1) const { return ops::slice_rows(*g, a, r0, r1); }
  V slice_cols(V a, int64_t c0, int64_t c1) const { return ops::slice_cols(*g, a, c0, c1); }
  V reshape(V a, std::vector<int64_t> s) const { return ops::reshape(*g, a, std::move(s)); }
  V transpose(V a) const { return ops::transpose(*g, a); }
  V mul_const(V a, const Tensor& c) const { return ops::mul_const(*g, a, c); }
  V scale_rows(V a, const std::vector<float>& s) const { return ops::scale_rows(*g, a, s); }
  V tile_cols(V a, int64_t n) const { return ops::tile_cols(*g, a, n); }
  V gather_segments(V a, const std::vector<int>& idx, int64_t d) const {
    return ops::gather_segments(*g, a, idx, d);
  }
  V scatter_segments(V a, V vals, const std::vector<int>& idx) const {
    return ops::scatter_segments(*g, a, vals, idx);
  }
  V gather_cols(V a, const std::vector<int>& idx) const { return ops::gather_cols(*g, a, idx); }
  V join_groups(V a, V b, int64_t grp) const { return ops::join_groups(*g, a, b, grp); }
  V group_head(V a, int64_t grp) const { return ops::group_head(*g, a, grp); }
  V group_tail(V a, int64_t grp) const { return ops::group_tail(*g, a, grp); }
  V block_matmul_nt(V a, V b, int64_t t) const { return ops::block_matmul_nt(*g, a, b, t); }
  V block_matmul_nn(V a, V b, int64_t t) const { return ops::block_matmul_nn(*g, a, b, t); }
  V layer_norm(V x, V gain, V bias, float eps = 1e-5f) const {
    return ops::layer_norm_rows(*g, x, gain, bias, eps);
  }
};

}  // namespace aap
