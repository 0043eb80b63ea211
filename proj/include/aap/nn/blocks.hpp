#pragma once

#include <string>
#include <vector>

#include "aap/nn/backend.hpp"

namespace aap::nn {

struct LinearParams {
  ParamId w = -1, b = -1;
  int64_t in = 0, out = 0;

  static LinearParams create(ParamStore& ps, const std::string& name, int64_t in, int64_t out,
                             Rng& rng, double gain = 1.0) {
    LinearParams p;
    p.in = in;
    p.out = out;
    p.w = ps.add(name + ".w", init::glorot_uniform(rng, in, out, {in, out}, gain));
    p.b = ps.add(name + ".b", Tensor::zeros({1, out}));
    return p;
  }
};

template <class B>
typename B::V linear(const B& b, const LinearParams& p, typename B::V x) {
  if (B::val(x).cols() != p.in) shape_fail("linear", B::val(x), "input dim != " + std::to_string(p.in));
  return b.add_rowvec(b.matmul(x, b.param(p.w)), b.param(p.b));
}

enum class Activation { tanh, relu };

struct MlpSpec {
  std::vector<int64_t> widths;  // input width first
  Activation act = Activation::tanh;
  bool activate_last = true;
};

struct MlpParams {
  MlpSpec spec;
  std::vector<LinearParams> layers;

  static MlpParams create(ParamStore& ps, const std::string& name, MlpSpec spec, Rng& rng) {
    if (spec.widths.size() < 2)
      throw std::invalid_argument("MlpSpec: need at least input and output widths");
    MlpParams p;
    p.spec = std::move(spec);
    for (size_t i = 0; i + 1 < p.spec.widths.size(); ++i)
      p.layers.push_back(LinearParams::create(ps, name + ".l" + std::to_string(i),
                                              p.spec.widths[i], p.spec.widths[i + 1], rng));
    return p;
  }
};

template <class B>
typename B::V activate(const B& b, Activation act, typename B::V x) {
  return act == Activation::tanh ? b.tanh(x) : b.relu(x);
}

template <class B>
typename B::V mlp_forward(const B& b, const MlpParams& p, typename B::V x) {
  for (size_t i = 0; i < p.layers.size(); ++i) {
    x = linear(b, p.layers[i], x);
    if (i + 1 < p.layers.size() || p.spec.activate_last) x = activate(b, p.spec.act, x);
  }
  return x;
}

// GRU cell with packed gates (reset | update | candidate).
struct GruParams {
  ParamId wi = -1, wh = -1, bi = -1, bh = -1;
  int64_t in = 0, hidden = 0;

  static GruParams create(ParamStore& ps, const std::string& name, int64_t in, int64_t hidden,
                          Rng& rng) {
    GruParams p;
    p.in = in;
    p.hidden = hidden;
    p.wi = ps.add(name + ".wi", init::glorot_uniform(rng, in, hidden, {in, 3 * hidden}));
    p.wh = ps.add(name + ".wh", init::glorot_uniform(rng, hidden, hidden, {hidden, 3 * hidden}));
    p.bi = ps.add(name + ".bi", Tensor::zeros({1, 3 * hidden}));
    p.bh = ps.add(name + ".bh", Tensor::zeros({1, 3 * hidden}));
    return p;
  }
};

template <class B>
typename B::V one_minus(const B& b, typename B::V x) {
  return b.add_scalar(b.scale(x, -1.0f), 1.0f);
}

// h' = (1 - z) * n + z * h; the new hidden is also the cell output.
template <class B>
typename B::V gru_step(const B& b, const GruParams& p, typename B::V x, typename B::V h) {
  if (B::val(x).cols() != p.in || B::val(h).cols() != p.hidden)
    shape_fail("gru_step", B::val(x), B::val(h));
  const int64_t H = p.hidden;
  auto gi = b.add_rowvec(b.matmul(x, b.param(p.wi)), b.param(p.bi));
  auto gh = b.add_rowvec(b.matmul(h, b.param(p.wh)), b.param(p.bh));
  auto r = b.sigmoid(b.add(b.slice_cols(gi, 0, H), b.slice_cols(gh, 0, H)));
  auto z = b.sigmoid(b.add(b.slice_cols(gi, H, 2 * H), b.slice_cols(gh, H, 2 * H)));
  auto cand = b.tanh(b.add(b.slice_cols(gi, 2 * H, 3 * H), b.mul(r, b.slice_cols(gh, 2 * H, 3 * H))));
  return b.add(b.mul(one_minus(b, z), cand), b.mul(z, h));
}

struct LayerNormParams {
  ParamId gain = -1, bias = -1;

  static LayerNormParams create(ParamStore& ps, const std::string& name, int64_t dim) {
    LayerNormParams p;
    p.gain = ps.add(name + ".gain", Tensor::full({1, dim}, 1.0f));
    p.bias = ps.add(name + ".bias", Tensor::zeros({1, dim}));
    return p;
  }
};

template <class B>
typename B::V layer_norm(const B& b, const LayerNormParams& p, typename B::V x) {
  return b.layer_norm(x, b.param(p.gain), b.param(p.bias));
}

}  // namespace aap::nn
