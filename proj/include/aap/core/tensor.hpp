#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace aap {

// Dense row-major float32 array. Data is shared between copies; reshape is
// zero-copy. Rank 1 and 2 cover everything in this codebase; rank-1 tensors
// are treated as [1, n] rows by the 2-D kernels.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int64_t> shape)
      : shape_(std::move(shape)),
        data_(std::make_shared<std::vector<float>>(count(shape_), 0.0f)) {}

  Tensor(std::vector<int64_t> shape, std::vector<float> values)
      : shape_(std::move(shape)),
        data_(std::make_shared<std::vector<float>>(std::move(values))) {
    if (static_cast<int64_t>(data_->size()) != count(shape_))
      throw std::invalid_argument("Tensor: data length does not match shape");
  }

  static Tensor zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<int64_t> shape, float v) {
    Tensor t(std::move(shape));
    std::fill(t.data().begin(), t.data().end(), v);
    return t;
  }

  static Tensor scalar(float v) { return Tensor({1, 1}, {v}); }

  static Tensor row(std::vector<float> values) {
    int64_t n = static_cast<int64_t>(values.size());
    return Tensor({1, n}, std::move(values));
  }

  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t rank() const { return static_cast<int64_t>(shape_.size()); }
  int64_t size() const { return count(shape_); }
  bool empty() const { return !data_; }

  // 2-D view: rank-1 tensors read as a single row.
  int64_t rows() const {
    if (shape_.size() == 1) return 1;
    check_rank2("rows");
    return shape_[0];
  }
  int64_t cols() const {
    if (shape_.size() == 1) return shape_[0];
    check_rank2("cols");
    return shape_[1];
  }

  std::vector<float>& data() { return *data_; }
  const std::vector<float>& data() const { return *data_; }
  float* ptr() { return data_->data(); }
  const float* ptr() const { return data_->data(); }

  float& at(int64_t r, int64_t c) { return (*data_)[r * cols() + c]; }
  float at(int64_t r, int64_t c) const { return (*data_)[r * cols() + c]; }
  float& operator[](int64_t i) { return (*data_)[i]; }
  float operator[](int64_t i) const { return (*data_)[i]; }

  // Shares storage; only the shape changes.
  Tensor reshaped(std::vector<int64_t> shape) const {
    if (count(shape) != size())
      throw std::invalid_argument("Tensor::reshaped: element count mismatch");
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = data_;
    return t;
  }

  // Deep copy with fresh storage.
  Tensor clone() const {
    Tensor t;
    t.shape_ = shape_;
    t.data_ = std::make_shared<std::vector<float>>(*data_);
    return t;
  }

  void fill(float v) { std::fill(data_->begin(), data_->end(), v); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (float v : *data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape_.size(); ++i) os << (i ? "x" : "") << shape_[i];
    os << "]";
    return os.str();
  }

  static int64_t count(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) {
      if (d <= 0) throw std::invalid_argument("Tensor: non-positive dimension");
      n *= d;
    }
    return n;
  }

 private:
  void check_rank2(const char* what) const {
    if (shape_.size() != 2)
      throw std::logic_error(std::string("Tensor::") + what + ": tensor is not 2-D " + shape_str());
  }

  std::vector<int64_t> shape_;
  std::shared_ptr<std::vector<float>> data_;
};

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void shape_fail(const char* prim, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(prim) + ": incompatible shapes " + a.shape_str() + " and " +
                   b.shape_str());
}

inline void shape_fail(const char* prim, const Tensor& a, const std::string& detail) {
  throw ShapeError(std::string(prim) + ": " + detail + " (got " + a.shape_str() + ")");
}

namespace kern {

using EMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<EMat>;
using CMap = Eigen::Map<const EMat>;

inline CMap mat(const Tensor& t) { return CMap(t.ptr(), t.rows(), t.cols()); }
inline Map mat(Tensor& t) { return Map(t.ptr(), t.rows(), t.cols()); }

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) shape_fail("matmul", a, b);
  Tensor out({a.rows(), b.cols()});
  mat(out).noalias() = mat(a) * mat(b);
  return out;
}

// out += a^T * b, accumulated into an existing tensor (backward helper).
inline void matmul_tn_acc(Tensor& out, const Tensor& a, const Tensor& b) {
  mat(out).noalias() += mat(a).transpose() * mat(b);
}
inline void matmul_nt_acc(Tensor& out, const Tensor& a, const Tensor& b) {
  mat(out).noalias() += mat(a) * mat(b).transpose();
}

inline Tensor transpose(const Tensor& a) {
  Tensor out({a.cols(), a.rows()});
  mat(out) = mat(a).transpose();
  return out;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) shape_fail("add", a, b);
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) shape_fail("sub", a, b);
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) shape_fail("mul", a, b);
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

inline Tensor scale(const Tensor& a, float c) {
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out[i] = a[i] * c;
  return out;
}

inline Tensor add_scalar(const Tensor& a, float c) {
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out[i] = a[i] + c;
  return out;
}

// The only broadcast in this library: [m,n] + [1,n] bias rows.
inline Tensor add_rowvec(const Tensor& a, const Tensor& v) {
  if (v.rows() != 1 || v.cols() != a.cols()) shape_fail("add_rowvec", a, v);
  Tensor out(a.shape());
  const int64_t m = a.rows(), n = a.cols();
  for (int64_t r = 0; r < m; ++r)
    for (int64_t c = 0; c < n; ++c) out[r * n + c] = a[r * n + c] + v[c];
  return out;
}

// Per-row scaling by a length-m vector (recurrent-state masking).
inline Tensor scale_rows(const Tensor& a, const std::vector<float>& s) {
  if (static_cast<int64_t>(s.size()) != a.rows()) shape_fail("scale_rows", a, "bad scale length");
  Tensor out(a.shape());
  const int64_t m = a.rows(), n = a.cols();
  for (int64_t r = 0; r < m; ++r)
    for (int64_t c = 0; c < n; ++c) out[r * n + c] = a[r * n + c] * s[r];
  return out;
}

inline Tensor tanh(const Tensor& a) {
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out[i] = std::tanh(a[i]);
  return out;
}

inline Tensor sigmoid(const Tensor& a) {
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out[i] = 1.0f / (1.0f + std::exp(-a[i]));
  return out;
}

inline Tensor relu(const Tensor& a) {
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out[i] = a[i] > 0.0f ? a[i] : 0.0f;
  return out;
}

inline Tensor exp(const Tensor& a) {
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out[i] = std::exp(a[i]);
  return out;
}

inline Tensor log(const Tensor& a) {
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out[i] = std::log(a[i]);
  return out;
}

inline Tensor clamp(const Tensor& a, float lo, float hi) {
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out[i] = a[i] < lo ? lo : (a[i] > hi ? hi : a[i]);
  return out;
}

inline Tensor minimum(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) shape_fail("minimum", a, b);
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out[i] = a[i] < b[i] ? a[i] : b[i];
  return out;
}

// Numerically stable row-wise softmax over the last axis.
inline Tensor softmax_rows(const Tensor& a) {
  Tensor out(a.shape());
  const int64_t m = a.rows(), n = a.cols();
  for (int64_t r = 0; r < m; ++r) {
    const float* x = a.ptr() + r * n;
    float* y = out.ptr() + r * n;
    float mx = x[0];
    for (int64_t c = 1; c < n; ++c) mx = std::max(mx, x[c]);
    float sum = 0.0f;
    for (int64_t c = 0; c < n; ++c) {
      y[c] = std::exp(x[c] - mx);
      sum += y[c];
    }
    for (int64_t c = 0; c < n; ++c) y[c] /= sum;
  }
  return out;
}

inline Tensor log_softmax_rows(const Tensor& a) {
  Tensor out(a.shape());
  const int64_t m = a.rows(), n = a.cols();
  for (int64_t r = 0; r < m; ++r) {
    const float* x = a.ptr() + r * n;
    float* y = out.ptr() + r * n;
    float mx = x[0];
    for (int64_t c = 1; c < n; ++c) mx = std::max(mx, x[c]);
    float sum = 0.0f;
    for (int64_t c = 0; c < n; ++c) sum += std::exp(x[c] - mx);
    const float lse = std::log(sum) + mx;
    for (int64_t c = 0; c < n; ++c) y[c] = x[c] - lse;
  }
  return out;
}

inline Tensor sum_all(const Tensor& a) {
  float s = 0.0f;
  for (int64_t i = 0; i < a.size(); ++i) s += a[i];
  return Tensor::scalar(s);
}

inline Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) shape_fail("concat_cols", a, b);
  Tensor out({a.rows(), a.cols() + b.cols()});
  const int64_t m = a.rows(), na = a.cols(), nb = b.cols();
  for (int64_t r = 0; r < m; ++r) {
    std::copy_n(a.ptr() + r * na, na, out.ptr() + r * (na + nb));
    std::copy_n(b.ptr() + r * nb, nb, out.ptr() + r * (na + nb) + na);
  }
  return out;
}

inline Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty input");
  const int64_t n = parts[0].cols();
  int64_t m = 0;
  for (const Tensor& p : parts) {
    if (p.cols() != n) shape_fail("concat_rows", parts[0], p);
    m += p.rows();
  }
  Tensor out({m, n});
  int64_t r = 0;
  for (const Tensor& p : parts) {
    std::copy_n(p.ptr(), p.size(), out.ptr() + r * n);
    r += p.rows();
  }
  return out;
}

inline Tensor slice_rows(const Tensor& a, int64_t r0, int64_t r1) {
  if (r0 < 0 || r1 > a.rows() || r0 >= r1) shape_fail("slice_rows", a, "bad row range");
  Tensor out({r1 - r0, a.cols()});
  std::copy_n(a.ptr() + r0 * a.cols(), (r1 - r0) * a.cols(), out.ptr());
  return out;
}

inline Tensor slice_cols(const Tensor& a, int64_t c0, int64_t c1) {
  if (c0 < 0 || c1 > a.cols() || c0 >= c1) shape_fail("slice_cols", a, "bad column range");
  Tensor out({a.rows(), c1 - c0});
  for (int64_t r = 0; r < a.rows(); ++r)
    std::copy_n(a.ptr() + r * a.cols() + c0, c1 - c0, out.ptr() + r * (c1 - c0));
  return out;
}

// Repeats a [1,d] row n times along columns, producing [1, n*d].
inline Tensor tile_cols(const Tensor& a, int64_t n) {
  if (a.rows() != 1) shape_fail("tile_cols", a, "expected a single row");
  Tensor out({1, a.cols() * n});
  for (int64_t i = 0; i < n; ++i) std::copy_n(a.ptr(), a.cols(), out.ptr() + i * a.cols());
  return out;
}

// Per-row segment gather: rows of `a` are n segments of width d; picks segment
// idx[r] from row r. idx[r] < 0 yields a zero row.
inline Tensor gather_segments(const Tensor& a, const std::vector<int>& idx, int64_t d) {
  const int64_t m = a.rows();
  if (static_cast<int64_t>(idx.size()) != m || a.cols() % d != 0)
    shape_fail("gather_segments", a, "bad index length or segment width");
  const int64_t n = a.cols() / d;
  Tensor out({m, d});
  for (int64_t r = 0; r < m; ++r) {
    if (idx[r] < 0) continue;
    if (idx[r] >= n) shape_fail("gather_segments", a, "segment index out of range");
    std::copy_n(a.ptr() + r * a.cols() + idx[r] * d, d, out.ptr() + r * d);
  }
  return out;
}

// Per-row segment scatter: returns a copy of `a` with segment idx[r] of row r
// replaced by vals row r. idx[r] < 0 leaves the row untouched.
inline Tensor scatter_segments(const Tensor& a, const Tensor& vals, const std::vector<int>& idx) {
  const int64_t m = a.rows(), d = vals.cols();
  if (vals.rows() != m || static_cast<int64_t>(idx.size()) != m || a.cols() % d != 0)
    shape_fail("scatter_segments", a, vals);
  Tensor out = a.clone();
  const int64_t n = a.cols() / d;
  for (int64_t r = 0; r < m; ++r) {
    if (idx[r] < 0) continue;
    if (idx[r] >= n) shape_fail("scatter_segments", a, "segment index out of range");
    std::copy_n(vals.ptr() + r * d, d, out.ptr() + r * a.cols() + idx[r] * d);
  }
  return out;
}

// Picks one column per row: out[r,0] = a[r, idx[r]].
inline Tensor gather_cols(const Tensor& a, const std::vector<int>& idx) {
  const int64_t m = a.rows();
  if (static_cast<int64_t>(idx.size()) != m) shape_fail("gather_cols", a, "bad index length");
  Tensor out({m, 1});
  for (int64_t r = 0; r < m; ++r) {
    if (idx[r] < 0 || idx[r] >= a.cols()) shape_fail("gather_cols", a, "column index out of range");
    out[r] = a.at(r, idx[r]);
  }
  return out;
}

// Interleaves per-sample groups: a holds g rows per sample, b one row per
// sample; output groups are [a-rows..., b-row] of size g+1.
inline Tensor join_groups(const Tensor& a, const Tensor& b, int64_t g) {
  if (a.cols() != b.cols() || a.rows() != b.rows() * g) shape_fail("join_groups", a, b);
  const int64_t s = b.rows(), d = a.cols();
  Tensor out({s * (g + 1), d});
  for (int64_t i = 0; i < s; ++i) {
    std::copy_n(a.ptr() + i * g * d, g * d, out.ptr() + i * (g + 1) * d);
    std::copy_n(b.ptr() + i * d, d, out.ptr() + (i * (g + 1) + g) * d);
  }
  return out;
}

// Inverse selections of join_groups.
inline Tensor group_head(const Tensor& x, int64_t g) {
  if (x.rows() % (g + 1) != 0) shape_fail("group_head", x, "rows not divisible by group size");
  const int64_t s = x.rows() / (g + 1), d = x.cols();
  Tensor out({s * g, d});
  for (int64_t i = 0; i < s; ++i)
    std::copy_n(x.ptr() + i * (g + 1) * d, g * d, out.ptr() + i * g * d);
  return out;
}

inline Tensor group_tail(const Tensor& x, int64_t g) {
  if (x.rows() % (g + 1) != 0) shape_fail("group_tail", x, "rows not divisible by group size");
  const int64_t s = x.rows() / (g + 1), d = x.cols();
  Tensor out({s, d});
  for (int64_t i = 0; i < s; ++i)
    std::copy_n(x.ptr() + (i * (g + 1) + g) * d, d, out.ptr() + i * d);
  return out;
}

// Block-diagonal matmuls used by self-attention: a and b hold one t-row block
// per group; each group is multiplied independently.
inline Tensor block_matmul_nt(const Tensor& a, const Tensor& b, int64_t t) {
  if (a.rows() % t != 0 || a.rows() != b.rows() || a.cols() != b.cols())
    shape_fail("block_matmul_nt", a, b);
  const int64_t groups = a.rows() / t;
  Tensor out({groups * t, t});
  for (int64_t g = 0; g < groups; ++g) {
    CMap A(a.ptr() + g * t * a.cols(), t, a.cols());
    CMap B(b.ptr() + g * t * b.cols(), t, b.cols());
    Map O(out.ptr() + g * t * t, t, t);
    O.noalias() = A * B.transpose();
  }
  return out;
}

inline Tensor block_matmul_nn(const Tensor& a, const Tensor& b, int64_t t) {
  if (a.rows() % t != 0 || a.rows() != b.rows() || a.cols() != t)
    shape_fail("block_matmul_nn", a, b);
  const int64_t groups = a.rows() / t;
  Tensor out({groups * t, b.cols()});
  for (int64_t g = 0; g < groups; ++g) {
    CMap A(a.ptr() + g * t * t, t, t);
    CMap B(b.ptr() + g * t * b.cols(), t, b.cols());
    Map O(out.ptr() + g * t * b.cols(), t, b.cols());
    O.noalias() = A * B;
  }
  return out;
}

// out_g = A_g^T * B_g, with A blocks of t rows; used only in backward passes.
inline Tensor block_matmul_tn(const Tensor& a, const Tensor& b, int64_t t) {
  if (a.rows() % t != 0 || a.rows() != b.rows()) shape_fail("block_matmul_tn", a, b);
  const int64_t groups = a.rows() / t;
  Tensor out({groups * a.cols(), b.cols()});
  for (int64_t g = 0; g < groups; ++g) {
    CMap A(a.ptr() + g * t * a.cols(), t, a.cols());
    CMap B(b.ptr() + g * t * b.cols(), t, b.cols());
    Map O(out.ptr() + g * a.cols() * b.cols(), a.cols(), b.cols());
    O.noalias() = A.transpose() * B;
  }
  return out;
}

struct LayerNormCache {
  Tensor xhat;       // normalized input
  std::vector<float> inv_std;
};

inline Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias, float eps,
                              LayerNormCache* cache) {
  if (gain.rows() != 1 || gain.cols() != x.cols() || !gain.same_shape(bias))
    shape_fail("layer_norm_rows", x, gain);
  const int64_t m = x.rows(), n = x.cols();
  Tensor out(x.shape());
  Tensor xhat(x.shape());
  std::vector<float> inv_std(m);
  for (int64_t r = 0; r < m; ++r) {
    const float* xr = x.ptr() + r * n;
    float mean = 0.0f;
    for (int64_t c = 0; c < n; ++c) mean += xr[c];
    mean /= static_cast<float>(n);
    float var = 0.0f;
    for (int64_t c = 0; c < n; ++c) {
      const float d = xr[c] - mean;
      var += d * d;
    }
    var /= static_cast<float>(n);
    const float is = 1.0f / std::sqrt(var + eps);
    inv_std[r] = is;
    for (int64_t c = 0; c < n; ++c) {
      const float xh = (xr[c] - mean) * is;
      xhat[r * n + c] = xh;
      out[r * n + c] = xh * gain[c] + bias[c];
    }
  }
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return out;
}

}  // namespace kern
}  // namespace aap
