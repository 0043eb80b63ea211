#pragma once

#include "aap/core/graph.hpp"
#include "aap/core/tensor.hpp"

namespace aap::ops {

// Graph wrappers around the kernels in aap::kern. Each op evaluates eagerly
// and records a closure that pushes gradients into its parents.

inline Node* matmul(Graph& g, Node* a, Node* b) {
  return g.make(kern::matmul(a->value, b->value), {a, b}, [a, b](Node& n) {
    if (a->requires_grad) {
      if (a->grad.empty()) a->grad = Tensor::zeros(a->value.shape());
      kern::matmul_nt_acc(a->grad, n.grad, b->value);
    }
    if (b->requires_grad) {
      if (b->grad.empty()) b->grad = Tensor::zeros(b->value.shape());
      kern::matmul_tn_acc(b->grad, a->value, n.grad);
    }
  });
}

inline Node* add(Graph& g, Node* a, Node* b) {
  return g.make(kern::add(a->value, b->value), {a, b}, [a, b](Node& n) {
    if (a->requires_grad) a->accum_grad(n.grad);
    if (b->requires_grad) b->accum_grad(n.grad);
  });
}

inline Node* sub(Graph& g, Node* a, Node* b) {
  return g.make(kern::sub(a->value, b->value), {a, b}, [a, b](Node& n) {
    if (a->requires_grad) a->accum_grad(n.grad);
    if (b->requires_grad) b->accum_grad(kern::scale(n.grad, -1.0f));
  });
}

inline Node* mul(Graph& g, Node* a, Node* b) {
  return g.make(kern::mul(a->value, b->value), {a, b}, [a, b](Node& n) {
    if (a->requires_grad) a->accum_grad(kern::mul(n.grad, b->value));
    if (b->requires_grad) b->accum_grad(kern::mul(n.grad, a->value));
  });
}

inline Node* scale(Graph& g, Node* a, float c) {
  return g.make(kern::scale(a->value, c), {a}, [a, c](Node& n) {
    if (a->requires_grad) a->accum_grad(kern::scale(n.grad, c));
  });
}

inline Node* add_scalar(Graph& g, Node* a, float c) {
  return g.make(kern::add_scalar(a->value, c), {a}, [a](Node& n) {
    if (a->requires_grad) a->accum_grad(n.grad);
  });
}

inline Node* add_rowvec(Graph& g, Node* a, Node* v) {
  return g.make(kern::add_rowvec(a->value, v->value), {a, v}, [a, v](Node& n) {
    if (a->requires_grad) a->accum_grad(n.grad);
    if (v->requires_grad) {
      Tensor dv({1, v->value.cols()});
      const int64_t m = n.grad.rows(), c = n.grad.cols();
      for (int64_t r = 0; r < m; ++r)
        for (int64_t j = 0; j < c; ++j) dv[j] += n.grad[r * c + j];
      v->accum_grad(dv);
    }
  });
}

inline Node* tanh(Graph& g, Node* a) {
  Node* out = g.make(kern::tanh(a->value), {a}, nullptr);
  out->backfn = [a, out](Node& n) {
    if (!a->requires_grad) return;
    Tensor d(n.grad.shape());
    for (int64_t i = 0; i < d.size(); ++i) {
      const float y = out->value[i];
      d[i] = n.grad[i] * (1.0f - y * y);
    }
    a->accum_grad(d);
  };
  return out;
}

inline Node* sigmoid(Graph& g, Node* a) {
  Node* out = g.make(kern::sigmoid(a->value), {a}, nullptr);
  out->backfn = [a, out](Node& n) {
    if (!a->requires_grad) return;
    Tensor d(n.grad.shape());
    for (int64_t i = 0; i < d.size(); ++i) {
      const float y = out->value[i];
      d[i] = n.grad[i] * y * (1.0f - y);
    }
    a->accum_grad(d);
  };
  return out;
}

inline Node* relu(Graph& g, Node* a) {
  return g.make(kern::relu(a->value), {a}, [a](Node& n) {
    if (!a->requires_grad) return;
    Tensor d(n.grad.shape());
    for (int64_t i = 0; i < d.size(); ++i) d[i] = a->value[i] > 0.0f ? n.grad[i] : 0.0f;
    a->accum_grad(d);
  });
}

inline Node* exp(Graph& g, Node* a) {
  Node* out = g.make(kern::exp(a->value), {a}, nullptr);
  out->backfn = [a, out](Node& n) {
    if (a->requires_grad) a->accum_grad(kern::mul(n.grad, out->value));
  };
  return out;
}

inline Node* log(Graph& g, Node* a) {
  return g.make(kern::log(a->value), {a}, [a](Node& n) {
    if (!a->requires_grad) return;
    Tensor d(n.grad.shape());
    for (int64_t i = 0; i < d.size(); ++i) d[i] = n.grad[i] / a->value[i];
    a->accum_grad(d);
  });
}

// Subgradient convention: pass-through on [lo, hi] inclusive.
inline Node* clamp(Graph& g, Node* a, float lo, float hi) {
  return g.make(kern::clamp(a->value, lo, hi), {a}, [a, lo, hi](Node& n) {
    if (!a->requires_grad) return;
    Tensor d(n.grad.shape());
    for (int64_t i = 0; i < d.size(); ++i) {
      const float x = a->value[i];
      d[i] = (x >= lo && x <= hi) ? n.grad[i] : 0.0f;
    }
    a->accum_grad(d);
  });
}

// Ties route the gradient to `a`.
inline Node* minimum(Graph& g, Node* a, Node* b) {
  return g.make(kern::minimum(a->value, b->value), {a, b}, [a, b](Node& n) {
    Tensor da(n.grad.shape()), db(n.grad.shape());
    for (int64_t i = 0; i < n.grad.size(); ++i) {
      if (a->value[i] <= b->value[i])
        da[i] = n.grad[i];
      else
        db[i] = n.grad[i];
    }
    if (a->requires_grad) a->accum_grad(da);
    if (b->requires_grad) b->accum_grad(db);
  });
}

inline Node* softmax_rows(Graph& g, Node* a) {
  Node* out = g.make(kern::softmax_rows(a->value), {a}, nullptr);
  out->backfn = [a, out](Node& n) {
    if (!a->requires_grad) return;
    const Tensor& y = out->value;
    Tensor d(n.grad.shape());
    const int64_t m = y.rows(), c = y.cols();
    for (int64_t r = 0; r < m; ++r) {
      float dot = 0.0f;
      for (int64_t j = 0; j < c; ++j) dot += n.grad[r * c + j] * y[r * c + j];
      for (int64_t j = 0; j < c; ++j)
        d[r * c + j] = (n.grad[r * c + j] - dot) * y[r * c + j];
    }
    a->accum_grad(d);
  };
  return out;
}

inline Node* log_softmax_rows(Graph& g, Node* a) {
  Node* out = g.make(kern::log_softmax_rows(a->value), {a}, nullptr);
  out->backfn = [a, out](Node& n) {
    if (!a->requires_grad) return;
    const Tensor& y = out->value;  // log-probabilities
    Tensor d(n.grad.shape());
    const int64_t m = y.rows(), c = y.cols();
    for (int64_t r = 0; r < m; ++r) {
      float gsum = 0.0f;
      for (int64_t j = 0; j < c; ++j) gsum += n.grad[r * c + j];
      for (int64_t j = 0; j < c; ++j)
        d[r * c + j] = n.grad[r * c + j] - std::exp(y[r * c + j]) * gsum;
    }
    a->accum_grad(d);
  };
  return out;
}

inline Node* sum_all(Graph& g, Node* a) {
  return g.make(kern::sum_all(a->value), {a}, [a](Node& n) {
    if (a->requires_grad) a->accum_grad(Tensor::full(a->value.shape(), n.grad[0]));
  });
}

inline Node* concat_cols(Graph& g, Node* a, Node* b) {
  return g.make(kern::concat_cols(a->value, b->value), {a, b}, [a, b](Node& n) {
    const int64_t na = a->value.cols();
    if (a->requires_grad) a->accum_grad(kern::slice_cols(n.grad, 0, na));
    if (b->requires_grad) b->accum_grad(kern::slice_cols(n.grad, na, n.grad.cols()));
  });
}

inline Node* concat_rows(Graph& g, std::vector<Node*> parts) {
  std::vector<Tensor> vals;
  vals.reserve(parts.size());
  for (Node* p : parts) vals.push_back(p->value);
  return g.make(kern::concat_rows(vals), std::vector<Node*>(parts), [parts](Node& n) {
    int64_t r = 0;
    for (Node* p : parts) {
      const int64_t rows = p->value.rows();
      if (p->requires_grad) p->accum_grad(kern::slice_rows(n.grad, r, r + rows));
      r += rows;
    }
  });
}

inline Node* slice_rows(Graph& g, Node* a, int64_t r0, int64_t r1) {
  return g.make(kern::slice_rows(a->value, r0, r1), {a}, [a, r0](Node& n) {
    if (!a->requires_grad) return;
    Tensor d = Tensor::zeros(a->value.shape());
    std::copy_n(n.grad.ptr(), n.grad.size(), d.ptr() + r0 * a->value.cols());
    a->accum_grad(d);
  });
}

inline Node* slice_cols(Graph& g, Node* a, int64_t c0, int64_t c1) {
  return g.make(kern::slice_cols(a->value, c0, c1), {a}, [a, c0, c1](Node& n) {
    if (!a->requires_grad) return;
    Tensor d = Tensor::zeros(a->value.shape());
    const int64_t w = c1 - c0, cols = a->value.cols();
    for (int64_t r = 0; r < n.grad.rows(); ++r)
      std::copy_n(n.grad.ptr() + r * w, w, d.ptr() + r * cols + c0);
    a->accum_grad(d);
  });
}

inline Node* reshape(Graph& g, Node* a, std::vector<int64_t> shape) {
  Tensor v = a->value.reshaped(shape);
  return g.make(std::move(v), {a}, [a](Node& n) {
    if (a->requires_grad) a->accum_grad(n.grad.reshaped(a->value.shape()));
  });
}

inline Node* transpose(Graph& g, Node* a) {
  return g.make(kern::transpose(a->value), {a}, [a](Node& n) {
    if (a->requires_grad) a->accum_grad(kern::transpose(n.grad));
  });
}

// Multiplication by a constant mask/tensor (no gradient to the constant).
inline Node* mul_const(Graph& g, Node* a, Tensor c) {
  Tensor v = kern::mul(a->value, c);
  return g.make(std::move(v), {a}, [a, c = std::move(c)](Node& n) {
    if (a->requires_grad) a->accum_grad(kern::mul(n.grad, c));
  });
}

inline Node* scale_rows(Graph& g, Node* a, std::vector<float> s) {
  Tensor v = kern::scale_rows(a->value, s);
  return g.make(std::move(v), {a}, [a, s = std::move(s)](Node& n) {
    if (a->requires_grad) a->accum_grad(kern::scale_rows(n.grad, s));
  });
}

inline Node* tile_cols(Graph& g, Node* a, int64_t reps) {
  return g.make(kern::tile_cols(a->value, reps), {a}, [a, reps](Node& n) {
    if (!a->requires_grad) return;
    const int64_t d = a->value.cols();
    Tensor acc({1, d});
    for (int64_t i = 0; i < reps; ++i)
      for (int64_t j = 0; j < d; ++j) acc[j] += n.grad[i * d + j];
    a->accum_grad(acc);
  });
}

inline Node* gather_segments(Graph& g, Node* a, std::vector<int> idx, int64_t d) {
  Tensor v = kern::gather_segments(a->value, idx, d);
  return g.make(std::move(v), {a}, [a, idx = std::move(idx), d](Node& n) {
    if (!a->requires_grad) return;
    Tensor da = Tensor::zeros(a->value.shape());
    const int64_t cols = a->value.cols();
    for (int64_t r = 0; r < n.grad.rows(); ++r) {
      if (idx[r] < 0) continue;
      for (int64_t j = 0; j < d; ++j) da[r * cols + idx[r] * d + j] += n.grad[r * d + j];
    }
    a->accum_grad(da);
  });
}

inline Node* scatter_segments(Graph& g, Node* a, Node* vals, std::vector<int> idx) {
  Tensor v = kern::scatter_segments(a->value, vals->value, idx);
  const int64_t d = vals->value.cols();
  return g.make(std::move(v), {a, vals}, [a, vals, idx = std::move(idx), d](Node& n) {
    const int64_t cols = a->value.cols();
    if (a->requires_grad) {
      Tensor da = n.grad.clone();
      for (int64_t r = 0; r < da.rows(); ++r)
        if (idx[r] >= 0) std::fill_n(da.ptr() + r * cols + idx[r] * d, d, 0.0f);
      a->accum_grad(da);
    }
    if (vals->requires_grad) {
      Tensor dv = Tensor::zeros(vals->value.shape());
      for (int64_t r = 0; r < dv.rows(); ++r)
        if (idx[r] >= 0)
          std::copy_n(n.grad.ptr() + r * cols + idx[r] * d, d, dv.ptr() + r * d);
      vals->accum_grad(dv);
    }
  });
}

inline Node* gather_cols(Graph& g, Node* a, std::vector<int> idx) {
  Tensor v = kern::gather_cols(a->value, idx);
  return g.make(std::move(v), {a}, [a, idx = std::move(idx)](Node& n) {
    if (!a->requires_grad) return;
    Tensor da = Tensor::zeros(a->value.shape());
    for (int64_t r = 0; r < n.grad.rows(); ++r) da[r * a->value.cols() + idx[r]] += n.grad[r];
    a->accum_grad(da);
  });
}

inline Node* join_groups(Graph& g, Node* a, Node* b, int64_t group) {
  return g.make(kern::join_groups(a->value, b->value, group), {a, b}, [a, b, group](Node& n) {
    if (a->requires_grad) a->accum_grad(kern::group_head(n.grad, group));
    if (b->requires_grad) b->accum_grad(kern::group_tail(n.grad, group));
  });
}

inline Node* group_head(Graph& g, Node* a, int64_t group) {
  return g.make(kern::group_head(a->value, group), {a}, [a, group](Node& n) {
    if (!a->requires_grad) return;
    const int64_t d = a->value.cols(), s = a->value.rows() / (group + 1);
    Tensor da = Tensor::zeros(a->value.shape());
    for (int64_t i = 0; i < s; ++i)
      std::copy_n(n.grad.ptr() + i * group * d, group * d, da.ptr() + i * (group + 1) * d);
    a->accum_grad(da);
  });
}

inline Node* group_tail(Graph& g, Node* a, int64_t group) {
  return g.make(kern::group_tail(a->value, group), {a}, [a, group](Node& n) {
    if (!a->requires_grad) return;
    const int64_t d = a->value.cols(), s = a->value.rows() / (group + 1);
    Tensor da = Tensor::zeros(a->value.shape());
    for (int64_t i = 0; i < s; ++i)
      std::copy_n(n.grad.ptr() + i * d, d, da.ptr() + (i * (group + 1) + group) * d);
    a->accum_grad(da);
  });
}

inline Node* block_matmul_nt(Graph& g, Node* a, Node* b, int64_t t) {
  return g.make(kern::block_matmul_nt(a->value, b->value, t), {a, b}, [a, b, t](Node& n) {
    if (a->requires_grad) a->accum_grad(kern::block_matmul_nn(n.grad, b->value, t));
    if (b->requires_grad) b->accum_grad(kern::block_matmul_tn(n.grad, a->value, t));
  });
}

inline Node* block_matmul_nn(Graph& g, Node* a, Node* b, int64_t t) {
  return g.make(kern::block_matmul_nn(a->value, b->value, t), {a, b}, [a, b, t](Node& n) {
    if (a->requires_grad) a->accum_grad(kern::block_matmul_nt(n.grad, b->value, t));
    if (b->requires_grad) b->accum_grad(kern::block_matmul_tn(a->value, n.grad, t));
  });
}

inline Node* layer_norm_rows(Graph& g, Node* x, Node* gain, Node* bias, float eps = 1e-5f) {
  auto cache = std::make_shared<kern::LayerNormCache>();
  Tensor v = kern::layer_norm_rows(x->value, gain->value, bias->value, eps, cache.get());
  return g.make(std::move(v), {x, gain, bias}, [x, gain, bias, cache](Node& n) {
    const Tensor& xhat = cache->xhat;
    const int64_t m = xhat.rows(), c = xhat.cols();
    if (gain->requires_grad) {
      Tensor dg({1, c});
      for (int64_t r = 0; r < m; ++r)
        for (int64_t j = 0; j < c; ++j) dg[j] += n.grad[r * c + j] * xhat[r * c + j];
      gain->accum_grad(dg);
    }
    if (bias->requires_grad) {
      Tensor db({1, c});
      for (int64_t r = 0; r < m; ++r)
        for (int64_t j = 0; j < c; ++j) db[j] += n.grad[r * c + j];
      bias->accum_grad(db);
    }
    if (x->requires_grad) {
      Tensor dx(xhat.shape());
      const float inv_n = 1.0f / static_cast<float>(c);
      for (int64_t r = 0; r < m; ++r) {
        float mean_gy = 0.0f, mean_gyx = 0.0f;
        for (int64_t j = 0; j < c; ++j) {
          const float gy = n.grad[r * c + j] * gain->value[j];
          mean_gy += gy;
          mean_gyx += gy * xhat[r * c + j];
        }
        mean_gy *= inv_n;
        mean_gyx *= inv_n;
        for (int64_t j = 0; j < c; ++j) {
          const float gy = n.grad[r * c + j] * gain->value[j];
          dx[r * c + j] = (gy - mean_gy - xhat[r * c + j] * mean_gyx) * cache->inv_std[r];
        }
      }
      x->accum_grad(dx);
    }
  });
}

}  // namespace aap::ops
