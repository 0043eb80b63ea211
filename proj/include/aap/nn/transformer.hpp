#pragma once

#include <cmath>

#include "aap/nn/blocks.hpp"

namespace aap::nn {

// Transformer encoder used as the order-invariant policy head. There is no
// positional encoding and no parameter indexed by token position: every token
// passes through the same projections, so permuting the input rows of a group
// permutes the output rows identically.
struct TransformerSpec {
  int64_t layers = 2;
  int64_t heads = 4;
  int64_t dim = 64;
  int64_t ff = 0;  // defaults to 4*dim

  int64_t ff_dim() const { return ff > 0 ? ff : 4 * dim; }

  void validate() const {
    if (layers <= 0 || heads <= 0 || dim <= 0)
      throw std::invalid_argument("TransformerSpec: non-positive size");
    if (dim % heads != 0) throw std::invalid_argument("TransformerSpec: dim not divisible by heads");
    if (ff_dim() < dim) throw std::invalid_argument("TransformerSpec: ff dim smaller than model dim");
  }
};

struct TransformerLayerParams {
  LinearParams qkv, proj, ff1, ff2;
  LayerNormParams ln1, ln2;
};

struct TransformerParams {
  TransformerSpec spec;
  std::vector<TransformerLayerParams> layers;
  LayerNormParams ln_final;

  static TransformerParams create(ParamStore& ps, const std::string& name, TransformerSpec spec,
                                  Rng& rng) {
    spec.validate();
    TransformerParams p;
    p.spec = spec;
    const int64_t d = spec.dim, f = spec.ff_dim();
    for (int64_t i = 0; i < spec.layers; ++i) {
      const std::string ln = name + ".layer" + std::to_string(i);
      TransformerLayerParams lp;
      lp.qkv = LinearParams::create(ps, ln + ".qkv", d, 3 * d, rng);
      lp.proj = LinearParams::create(ps, ln + ".proj", d, d, rng);
      lp.ff1 = LinearParams::create(ps, ln + ".ff1", d, f, rng);
      lp.ff2 = LinearParams::create(ps, ln + ".ff2", f, d, rng);
      lp.ln1 = LayerNormParams::create(ps, ln + ".ln1", d);
      lp.ln2 = LayerNormParams::create(ps, ln + ".ln2", d);
      p.layers.push_back(lp);
    }
    p.ln_final = LayerNormParams::create(ps, name + ".ln_final", d);
    return p;
  }
};

// tokens: [groups*t, dim], each consecutive block of t rows is one attention
// group (full self-attention within the block). Pre-LN residual layout.
template <class B>
typename B::V transformer_forward(const B& b, const TransformerParams& p, typename B::V tokens,
                                  int64_t t) {
  const int64_t d = p.spec.dim;
  if (B::val(tokens).cols() != d || B::val(tokens).rows() % t != 0)
    shape_fail("transformer_forward", B::val(tokens), "bad token matrix");
  const int64_t dh = d / p.spec.heads;
  const float inv_sqrt_dh = 1.0f / std::sqrt(static_cast<float>(dh));

  auto x = tokens;
  for (const auto& lp : p.layers) {
    auto xn = layer_norm(b, lp.ln1, x);
    auto qkv = linear(b, lp.qkv, xn);
    typename B::V heads_out{};
    for (int64_t h = 0; h < p.spec.heads; ++h) {
      auto q = b.slice_cols(qkv, h * dh, (h + 1) * dh);
      auto k = b.slice_cols(qkv, d + h * dh, d + (h + 1) * dh);
      auto v = b.slice_cols(qkv, 2 * d + h * dh, 2 * d + (h + 1) * dh);
      auto scores = b.scale(b.block_matmul_nt(q, k, t), inv_sqrt_dh);
      auto attn = b.softmax_rows(scores);
      auto o = b.block_matmul_nn(attn, v, t);
      heads_out = (h == 0) ? o : b.concat_cols(heads_out, o);
    }
    x = b.add(x, linear(b, lp.proj, heads_out));
    auto xn2 = layer_norm(b, lp.ln2, x);
    x = b.add(x, linear(b, lp.ff2, b.relu(linear(b, lp.ff1, xn2))));
  }
  return layer_norm(b, p.ln_final, x);
}

// Single-group convenience wrapper: one set of tokens in, one out.
template <class B>
typename B::V oi_encoder_forward(const B& b, const TransformerParams& p, typename B::V tokens) {
  return transformer_forward(b, p, tokens, B::val(tokens).rows());
}

}  // namespace aap::nn
