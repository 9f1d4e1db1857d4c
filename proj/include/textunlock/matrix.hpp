#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "textunlock/error.hpp"

namespace textunlock {

/// Dense row-major matrix. Files always hold float; training and test
/// harnesses instantiate it with double.
template <typename T>
class Matrix {
 public:
  using value_type = T;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    require(data_.size() == rows_ * cols_, ErrorKind::dim_mismatch,
            "matrix: data length does not match rows*cols");
  }
  Matrix(std::initializer_list<std::initializer_list<T>> init) {
    rows_ = init.size();
    cols_ = rows_ ? init.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& r : init) {
      require(r.size() == cols_, ErrorKind::dim_mismatch, "matrix: ragged initializer");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }
  const T& operator()(std::size_t r, std::size_t c) const {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<T> flat() noexcept { return data_; }
  std::span<const T> flat() const noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using MatrixF = Matrix<float>;
using MatrixD = Matrix<double>;

template <typename To, typename From>
Matrix<To> cast(const Matrix<From>& m) {
  std::vector<To> out(m.size());
  std::transform(m.flat().begin(), m.flat().end(), out.begin(),
                 [](From v) { return static_cast<To>(v); });
  return Matrix<To>(m.rows(), m.cols(), std::move(out));
}

inline std::string shape_str(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

/// A * B. Accumulates in double regardless of T.
template <typename T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
  require(a.cols() == b.rows(), ErrorKind::dim_mismatch,
          "matmul: " + shape_str(a.rows(), a.cols()) + " * " + shape_str(b.rows(), b.cols()));
  Matrix<T> out(a.rows(), b.cols());
  std::vector<double> acc(b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) acc[j] += aik * static_cast<double>(brow[j]);
    }
    for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) = static_cast<T>(acc[j]);
  }
  return out;
}

/// A * B^T, i.e. all pairwise row dot products.
template <typename T>
Matrix<T> matmul_bt(const Matrix<T>& a, const Matrix<T>& b) {
  require(a.cols() == b.cols(), ErrorKind::dim_mismatch,
          "matmul_bt: " + shape_str(a.rows(), a.cols()) + " * (" +
              shape_str(b.rows(), b.cols()) + ")^T");
  Matrix<T> out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto arow = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto brow = b.row(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k)
        acc += static_cast<double>(arow[k]) * static_cast<double>(brow[k]);
      out(i, j) = static_cast<T>(acc);
    }
  }
  return out;
}

/// A^T * B.
template <typename T>
Matrix<T> matmul_at(const Matrix<T>& a, const Matrix<T>& b) {
  require(a.rows() == b.rows(), ErrorKind::dim_mismatch,
          "matmul_at: (" + shape_str(a.rows(), a.cols()) + ")^T * " +
              shape_str(b.rows(), b.cols()));
  std::vector<double> acc(a.cols() * b.cols(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto arow = a.row(r);
    auto brow = b.row(r);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double ai = arow[i];
      if (ai == 0.0) continue;
      double* dst = acc.data() + i * b.cols();
      for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += ai * static_cast<double>(brow[j]);
    }
  }
  Matrix<T> out(a.cols(), b.cols());
  for (std::size_t i = 0; i < acc.size(); ++i) out.flat()[i] = static_cast<T>(acc[i]);
  return out;
}

template <typename T>
Matrix<T> transpose(const Matrix<T>& m) {
  Matrix<T> out(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
  return out;
}

/// Rows `idx` of m, in that order.
template <typename T>
Matrix<T> gather_rows(const Matrix<T>& m, std::span<const std::size_t> idx) {
  Matrix<T> out(idx.size(), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    require(idx[i] < m.rows(), ErrorKind::invalid_argument, "gather_rows: index out of range");
    std::copy(m.row(idx[i]).begin(), m.row(idx[i]).end(), out.row(i).begin());
  }
  return out;
}

template <typename T>
Matrix<T> slice_rows(const Matrix<T>& m, std::size_t begin, std::size_t end) {
  require(begin <= end && end <= m.rows(), ErrorKind::invalid_argument,
          "slice_rows: bad range");
  Matrix<T> out(end - begin, m.cols());
  std::copy(m.flat().begin() + begin * m.cols(), m.flat().begin() + end * m.cols(),
            out.flat().begin());
  return out;
}

/// Index of the row maximum; the lowest index wins ties.
template <typename Row>
std::size_t argmax(const Row& row) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < row.size(); ++i)
    if (row[i] > row[best]) best = i;
  return best;
}

template <typename T>
std::vector<std::size_t> argmax_rows(const Matrix<T>& m) {
  std::vector<std::size_t> out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) out[i] = argmax(m.row(i));
  return out;
}

template <typename T>
double max_abs_diff(const Matrix<T>& a, const Matrix<T>& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::dim_mismatch,
          "max_abs_diff: shape mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(static_cast<double>(a.flat()[i]) -
                                     static_cast<double>(b.flat()[i])));
  return worst;
}

}  // namespace textunlock
