#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "morphparse/common.hpp"
#include "morphparse/rng.hpp"

namespace morphparse {

/// Dense row-major 2-D tensor. Vectors are [1, n] rows, scalars [1, 1].
template <class S>
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, S(0)) {}

  static Tensor zeros(std::size_t rows, std::size_t cols) { return Tensor(rows, cols); }

  static Tensor full(std::size_t rows, std::size_t cols, S v) {
    Tensor t(rows, cols);
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
  }

  static Tensor scalar(S v) { return full(1, 1, v); }

  static Tensor from_rows(std::size_t rows, std::size_t cols, std::vector<S> data) {
    require(data.size() == rows * cols, "tensor data length ", data.size(), " does not match shape [",
            rows, " x ", cols, "]");
    Tensor t;
    t.rows_ = rows;
    t.cols_ = cols;
    t.data_ = std::move(data);
    return t;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  std::vector<std::size_t> shape() const { return {rows_, cols_}; }
  bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  S* data() { return data_.data(); }
  const S* data() const { return data_.data(); }
  S* row(std::size_t i) { return data_.data() + i * cols_; }
  const S* row(std::size_t i) const { return data_.data() + i * cols_; }

  S& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  S operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  S& at(std::size_t flat) { return data_[flat]; }
  S at(std::size_t flat) const { return data_[flat]; }

  void fill(S v) { std::fill(data_.begin(), data_.end(), v); }
  void zero() { fill(S(0)); }

  bool has_nan() const {
    for (S v : data_)
      if (std::isnan(static_cast<double>(v))) return true;
    return false;
  }

  template <class S2>
  Tensor<S2> cast() const {
    Tensor<S2> t(rows_, cols_);
    for (std::size_t i = 0; i < data_.size(); ++i) t.at(i) = static_cast<S2>(data_[i]);
    return t;
  }

  bool operator==(const Tensor& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<S> data_;
};

namespace detail {

// Register-tiled GEMM kernels. The layouts below keep every inner loop on
// contiguous rows so -O3 auto-vectorizes them. Accumulation over the
// reduction dimension is strictly sequential per output element, which makes
// results independent of how many rows are batched together.

inline constexpr std::size_t kGemmMR = 4;
inline constexpr std::size_t kGemmNR = 32;

/// C [M,N] (+)= A [M,K] * B [K,N]
template <class S>
void gemm_nn(const S* a, const S* b, S* c, std::size_t M, std::size_t K, std::size_t N, bool acc) {
  if (!acc) std::fill(c, c + M * N, S(0));
  const std::size_t NP = N - N % kGemmNR;
  for (std::size_t j0 = 0; j0 < NP; j0 += kGemmNR) {
    for (std::size_t i0 = 0; i0 < M; i0 += kGemmMR) {
      const std::size_t mi = std::min(kGemmMR, M - i0);
      S accbuf[kGemmMR][kGemmNR];
      for (std::size_t r = 0; r < mi; ++r)
        for (std::size_t j = 0; j < kGemmNR; ++j) accbuf[r][j] = c[(i0 + r) * N + j0 + j];
      for (std::size_t k = 0; k < K; ++k) {
        const S* brow = b + k * N + j0;
        for (std::size_t r = 0; r < mi; ++r) {
          const S av = a[(i0 + r) * K + k];
          for (std::size_t j = 0; j < kGemmNR; ++j) accbuf[r][j] += av * brow[j];
        }
      }
      for (std::size_t r = 0; r < mi; ++r)
        for (std::size_t j = 0; j < kGemmNR; ++j) c[(i0 + r) * N + j0 + j] = accbuf[r][j];
    }
  }
  if (NP < N) {
    for (std::size_t i = 0; i < M; ++i) {
      S* crow = c + i * N;
      for (std::size_t k = 0; k < K; ++k) {
        const S av = a[i * K + k];
        const S* brow = b + k * N;
        for (std::size_t j = NP; j < N; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

/// C [M,N] (+)= A [M,K] * B^T where B is [N,K]
template <class S>
void gemm_nt(const S* a, const S* b, S* c, std::size_t M, std::size_t K, std::size_t N, bool acc) {
  for (std::size_t i = 0; i < M; ++i) {
    const S* arow = a + i * K;
    S* crow = c + i * N;
    for (std::size_t j = 0; j < N; ++j) {
      const S* brow = b + j * K;
      S sum = S(0);
      for (std::size_t k = 0; k < K; ++k) sum += arow[k] * brow[k];
      crow[j] = acc ? crow[j] + sum : sum;
    }
  }
}

/// C [K,N] (+)= A^T * B where A is [M,K], B is [M,N]
template <class S>
void gemm_tn(const S* a, const S* b, S* c, std::size_t M, std::size_t K, std::size_t N, bool acc) {
  if (!acc) std::fill(c, c + K * N, S(0));
  for (std::size_t i = 0; i < M; ++i) {
    const S* brow = b + i * N;
    const S* arow = a + i * K;
    for (std::size_t k = 0; k < K; ++k) {
      const S av = arow[k];
      if (av == S(0)) continue;
      S* crow = c + k * N;
      for (std::size_t j = 0; j < N; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace detail

}  // namespace morphparse
