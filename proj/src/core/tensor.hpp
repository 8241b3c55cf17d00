#pragma once

#include <cstring>
#include <numeric>
#include <string>
#include <vector>

#include "common.hpp"

namespace ls::num {

// Dense row-major tensor of doubles. Rank is small (<= 4); most of the code
// works on matrices [rows, cols] and image batches [n, c, h, w].
struct Tensor {
  std::vector<int> shape;
  std::vector<real> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(numel_of(shape), 0.0);
  }
  Tensor(std::vector<int> s, std::vector<real> d) : shape(std::move(s)), data(std::move(d)) {
    check(data.size() == size_t(numel_of(shape)), "tensor shape/data mismatch");
  }

  static long numel_of(const std::vector<int>& s) {
    long n = 1;
    for (int d : s) n *= d;
    return n;
  }

  long numel() const { return long(data.size()); }
  int dim(int i) const { return shape[size_t(i)]; }
  int rank() const { return int(shape.size()); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  real* ptr() { return data.data(); }
  const real* ptr() const { return data.data(); }

  real& at(long i) { return data[size_t(i)]; }
  real at(long i) const { return data[size_t(i)]; }

  static Tensor scalar(real v) { return Tensor({1}, {v}); }
  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<int> s, real v) {
    Tensor t(std::move(s));
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }
  static Tensor randn(std::vector<int> s, Rng& rng, real stddev = 1.0) {
    Tensor t(std::move(s));
    for (real& x : t.data) x = stddev * rng.normal();
    return t;
  }

  std::string shape_str() const {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); i++) {
      if (i) s += ",";
      s += std::to_string(shape[i]);
    }
    return s + "]";
  }
};

// Vector [d] (or any tensor) viewed as a single-row matrix [1, d].
inline Tensor as_row(const Tensor& v) {
  Tensor t({1, int(v.numel())});
  t.data = v.data;
  return t;
}

// C[m,n] = A[m,k] * B[k,n]. Accumulates into C (callers zero it first when
// needed); the i,k,j order keeps the inner loop contiguous.
inline void matmul_acc(const real* a, const real* b, real* c, int m, int k, int n) {
  for (int i = 0; i < m; i++) {
    const real* arow = a + size_t(i) * k;
    real* crow = c + size_t(i) * n;
    for (int p = 0; p < k; p++) {
      const real av = arow[p];
      if (av == 0.0) continue;
      const real* brow = b + size_t(p) * n;
      for (int j = 0; j < n; j++) crow[j] += av * brow[j];
    }
  }
}

// dA[m,k] += dC[m,n] * B^T  (i.e. dA[i,p] += dot(dC[i,:], B[p,:]))
inline void matmul_acc_bt(const real* dc, const real* b, real* da, int m, int k, int n) {
  for (int i = 0; i < m; i++) {
    const real* dcrow = dc + size_t(i) * n;
    real* darow = da + size_t(i) * k;
    for (int p = 0; p < k; p++) {
      const real* brow = b + size_t(p) * n;
      real acc = 0.0;
      for (int j = 0; j < n; j++) acc += dcrow[j] * brow[j];
      darow[p] += acc;
    }
  }
}

// dB[k,n] += A^T * dC  (row-wise accumulation keeps dB's inner loop contiguous)
inline void matmul_acc_at(const real* a, const real* dc, real* db, int m, int k, int n) {
  for (int i = 0; i < m; i++) {
    const real* arow = a + size_t(i) * k;
    const real* dcrow = dc + size_t(i) * n;
    for (int p = 0; p < k; p++) {
      const real av = arow[p];
      if (av == 0.0) continue;
      real* dbrow = db + size_t(p) * n;
      for (int j = 0; j < n; j++) dbrow[j] += av * dcrow[j];
    }
  }
}

}  // namespace ls::num
