#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

// Minimal double-precision row-major matrix math for test oracles. Written
// independently of the library kernels on purpose: gradient checks compare
// the library's backward pass against central finite differences evaluated
// with this 64-bit reference.
namespace oracle {

struct DMat {
  int64_t rows = 0, cols = 0;
  std::vector<double> d;

  DMat() = default;
  DMat(int64_t r, int64_t c) : rows(r), cols(c), d(r * c, 0.0) {}

  double& at(int64_t r, int64_t c) { return d[r * cols + c]; }
  double at(int64_t r, int64_t c) const { return d[r * cols + c]; }
  int64_t size() const { return rows * cols; }
};

inline DMat matmul(const DMat& a, const DMat& b) {
  if (a.cols != b.rows) throw std::logic_error("oracle matmul shape");
  DMat o(a.rows, b.cols);
  for (int64_t i = 0; i < a.rows; ++i)
    for (int64_t k = 0; k < a.cols; ++k) {
      const double av = a.at(i, k);
      for (int64_t j = 0; j < b.cols; ++j) o.at(i, j) += av * b.at(k, j);
    }
  return o;
}

inline DMat add(const DMat& a, const DMat& b) {
  DMat o = a;
  for (int64_t i = 0; i < o.size(); ++i) o.d[i] += b.d[i];
  return o;
}

inline DMat sub(const DMat& a, const DMat& b) {
  DMat o = a;
  for (int64_t i = 0; i < o.size(); ++i) o.d[i] -= b.d[i];
  return o;
}

inline DMat mul(const DMat& a, const DMat& b) {
  DMat o = a;
  for (int64_t i = 0; i < o.size(); ++i) o.d[i] *= b.d[i];
  return o;
}

inline DMat add_rowvec(const DMat& a, const DMat& v) {
  DMat o = a;
  for (int64_t r = 0; r < a.rows; ++r)
    for (int64_t c = 0; c < a.cols; ++c) o.at(r, c) += v.d[c];
  return o;
}

template <typename F>
DMat apply(const DMat& a, F f) {
  DMat o = a;
  for (int64_t i = 0; i < o.size(); ++i) o.d[i] = f(o.d[i]);
  return o;
}

inline DMat tanh(const DMat& a) { return apply(a, [](double x) { return std::tanh(x); }); }
inline DMat sigmoid(const DMat& a) {
  return apply(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
}
inline DMat relu(const DMat& a) { return apply(a, [](double x) { return x > 0 ? x : 0.0; }); }

inline DMat softmax_rows(const DMat& a) {
  DMat o(a.rows, a.cols);
  for (int64_t r = 0; r < a.rows; ++r) {
    double mx = a.at(r, 0);
    for (int64_t c = 1; c < a.cols; ++c) mx = std::max(mx, a.at(r, c));
    double s = 0.0;
    for (int64_t c = 0; c < a.cols; ++c) s += std::exp(a.at(r, c) - mx);
    for (int64_t c = 0; c < a.cols; ++c) o.at(r, c) = std::exp(a.at(r, c) - mx) / s;
  }
  return o;
}

inline DMat log_softmax_rows(const DMat& a) {
  DMat p = softmax_rows(a);
  return apply(p, [](double x) { return std::log(x); });
}

inline DMat layer_norm_rows(const DMat& x, const DMat& gain, const DMat& bias, double eps) {
  DMat o(x.rows, x.cols);
  for (int64_t r = 0; r < x.rows; ++r) {
    double mean = 0.0;
    for (int64_t c = 0; c < x.cols; ++c) mean += x.at(r, c);
    mean /= x.cols;
    double var = 0.0;
    for (int64_t c = 0; c < x.cols; ++c) var += (x.at(r, c) - mean) * (x.at(r, c) - mean);
    var /= x.cols;
    const double is = 1.0 / std::sqrt(var + eps);
    for (int64_t c = 0; c < x.cols; ++c)
      o.at(r, c) = (x.at(r, c) - mean) * is * gain.d[c] + bias.d[c];
  }
  return o;
}

inline DMat concat_cols(const DMat& a, const DMat& b) {
  DMat o(a.rows, a.cols + b.cols);
  for (int64_t r = 0; r < a.rows; ++r) {
    for (int64_t c = 0; c < a.cols; ++c) o.at(r, c) = a.at(r, c);
    for (int64_t c = 0; c < b.cols; ++c) o.at(r, a.cols + c) = b.at(r, c);
  }
  return o;
}

inline DMat slice_cols(const DMat& a, int64_t c0, int64_t c1) {
  DMat o(a.rows, c1 - c0);
  for (int64_t r = 0; r < a.rows; ++r)
    for (int64_t c = c0; c < c1; ++c) o.at(r, c - c0) = a.at(r, c);
  return o;
}

inline double sum(const DMat& a) {
  double s = 0.0;
  for (double v : a.d) s += v;
  return s;
}

inline double dot(const DMat& a, const DMat& b) {
  double s = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) s += a.d[i] * b.d[i];
  return s;
}

}  // namespace oracle
