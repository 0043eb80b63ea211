#pragma once

#include <vector>

#include "support/dmat.hpp"

// Double-precision shadows of the network blocks, written against the same
// parameter layout the blocks register (Linear: w then b; GRU: wi,wh,bi,bh;
// Transformer layer: qkv,proj,ff1,ff2,ln1,ln2 then the final norm). They are
// hand-rolled here so gradient checks do not share code with the library.
namespace oracle {

inline DMat dlinear(const DMat& x, const DMat& w, const DMat& b) {
  return add_rowvec(matmul(x, w), b);
}

inline DMat dmlp_tanh(const DMat& x, const std::vector<DMat>& wb, bool activate_last) {
  DMat h = x;
  const size_t layers = wb.size() / 2;
  for (size_t i = 0; i < layers; ++i) {
    h = dlinear(h, wb[2 * i], wb[2 * i + 1]);
    if (i + 1 < layers || activate_last) h = tanh(h);
  }
  return h;
}

inline DMat dgru(const DMat& x, const DMat& h, const DMat& wi, const DMat& wh, const DMat& bi,
                 const DMat& bh) {
  const int64_t H = h.cols;
  DMat gi = add_rowvec(matmul(x, wi), bi);
  DMat gh = add_rowvec(matmul(h, wh), bh);
  DMat out(h.rows, H);
  for (int64_t r = 0; r < h.rows; ++r) {
    for (int64_t c = 0; c < H; ++c) {
      const double rr = 1.0 / (1.0 + std::exp(-(gi.at(r, c) + gh.at(r, c))));
      const double zz = 1.0 / (1.0 + std::exp(-(gi.at(r, H + c) + gh.at(r, H + c))));
      const double nn = std::tanh(gi.at(r, 2 * H + c) + rr * gh.at(r, 2 * H + c));
      out.at(r, c) = (1.0 - zz) * nn + zz * h.at(r, c);
    }
  }
  return out;
}

struct DTransformerLayer {
  DMat qkv_w, qkv_b, proj_w, proj_b, ff1_w, ff1_b, ff2_w, ff2_b;
  DMat ln1_g, ln1_b, ln2_g, ln2_b;
};

inline DMat dattention_block(const DMat& x, const DTransformerLayer& p, int64_t heads) {
  const int64_t t = x.rows, d = x.cols, dh = d / heads;
  DMat xn = layer_norm_rows(x, p.ln1_g, p.ln1_b, 1e-5);
  DMat qkv = dlinear(xn, p.qkv_w, p.qkv_b);
  DMat heads_out(t, d);
  for (int64_t h = 0; h < heads; ++h) {
    DMat q = slice_cols(qkv, h * dh, (h + 1) * dh);
    DMat k = slice_cols(qkv, d + h * dh, d + (h + 1) * dh);
    DMat v = slice_cols(qkv, 2 * d + h * dh, 2 * d + (h + 1) * dh);
    DMat kt(dh, t);
    for (int64_t i = 0; i < t; ++i)
      for (int64_t j = 0; j < dh; ++j) kt.at(j, i) = k.at(i, j);
    DMat sc = matmul(q, kt);
    for (double& s : sc.d) s /= std::sqrt(static_cast<double>(dh));
    DMat pm = softmax_rows(sc);
    DMat o = matmul(pm, v);
    for (int64_t i = 0; i < t; ++i)
      for (int64_t j = 0; j < dh; ++j) heads_out.at(i, h * dh + j) = o.at(i, j);
  }
  DMat y = add(x, dlinear(heads_out, p.proj_w, p.proj_b));
  DMat yn = layer_norm_rows(y, p.ln2_g, p.ln2_b, 1e-5);
  DMat ff = dlinear(relu(dlinear(yn, p.ff1_w, p.ff1_b)), p.ff2_w, p.ff2_b);
  return add(y, ff);
}

inline DMat dtransformer(const DMat& tokens, const std::vector<DTransformerLayer>& layers,
                         const DMat& lnf_g, const DMat& lnf_b, int64_t heads, int64_t t) {
  const int64_t groups = tokens.rows / t;
  DMat out(tokens.rows, tokens.cols);
  for (int64_t g = 0; g < groups; ++g) {
    DMat x(t, tokens.cols);
    for (int64_t i = 0; i < t * tokens.cols; ++i) x.d[i] = tokens.d[g * t * tokens.cols + i];
    for (const auto& lp : layers) x = dattention_block(x, lp, heads);
    x = layer_norm_rows(x, lnf_g, lnf_b, 1e-5);
    for (int64_t i = 0; i < t * tokens.cols; ++i) out.d[g * t * tokens.cols + i] = x.d[i];
  }
  return out;
}

}  // namespace oracle
