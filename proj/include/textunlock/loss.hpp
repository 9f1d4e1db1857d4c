#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "textunlock/error.hpp"
#include "textunlock/matrix.hpp"

namespace textunlock {

inline constexpr double kSimplexTolerance = 1e-5;

/// Max-subtracted softmax of one row.
template <typename T>
std::vector<double> softmax(std::span<const T> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(static_cast<double>(logits[i]) - mx);
    sum += out[i];
  }
  for (auto& v : out) v /= sum;
  return out;
}

inline std::vector<double> softmax(std::initializer_list<double> logits) {
  return softmax(std::span<const double>(logits.begin(), logits.size()));
}

template <typename T>
std::vector<double> log_softmax(std::span<const T> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (T v : logits) sum += std::exp(static_cast<double>(v) - mx);
  const double lse = mx + std::log(sum);
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = static_cast<double>(logits[i]) - lse;
  return out;
}

/// Row-wise softmax of a matrix.
template <typename T>
Matrix<T> softmax_rows(const Matrix<T>& logits) {
  Matrix<T> out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto p = softmax(logits.row(i));
    std::transform(p.begin(), p.end(), out.row(i).begin(), [](double v) { return static_cast<T>(v); });
  }
  return out;
}

/// Shannon entropy in nats, 0 log 0 := 0.
template <typename T>
double entropy(std::span<const T> dist) {
  double h = 0.0;
  for (T p : dist)
    if (p > 0) h -= static_cast<double>(p) * std::log(static_cast<double>(p));
  return h;
}

template <typename T>
void check_simplex(std::span<const T> row, std::size_t index = 0) {
  double sum = 0.0;
  for (T v : row) {
    require(v >= 0 && std::isfinite(static_cast<double>(v)), ErrorKind::invalid_argument,
            "distribution row " + std::to_string(index) + " has a negative or non-finite entry");
    sum += v;
  }
  require(std::abs(sum - 1.0) <= kSimplexTolerance, ErrorKind::invalid_argument,
          "distribution row " + std::to_string(index) + " sums to " + std::to_string(sum));
}

/// KL(target || pred) = sum o log(o / p). Returns +inf when pred has a zero
/// where target does not.
template <typename T>
double kl_divergence(std::span<const T> target, std::span<const T> pred) {
  require(target.size() == pred.size(), ErrorKind::dim_mismatch, "kl_divergence: length mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double o = target[i];
    if (o <= 0.0) continue;
    const double p = pred[i];
    if (p <= 0.0) return std::numeric_limits<double>::infinity();
    kl += o * std::log(o / p);
  }
  return kl;
}

inline double kl_divergence(std::initializer_list<double> target, std::initializer_list<double> pred) {
  return kl_divergence(std::span<const double>(target.begin(), target.size()),
                       std::span<const double>(pred.begin(), pred.size()));
}

/// Mean over rows of KL(target_i || pred_i).
template <typename T>
double kl_divergence(const Matrix<T>& target, const Matrix<T>& pred) {
  require(target.rows() == pred.rows() && target.cols() == pred.cols(), ErrorKind::dim_mismatch,
          "kl_divergence: shape mismatch");
  if (target.rows() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < target.rows(); ++i) total += kl_divergence(target.row(i), pred.row(i));
  return total / static_cast<double>(target.rows());
}

template <typename T>
struct LossAndGrad {
  double loss = 0.0;
  Matrix<T> grad;  // d loss / d logits
};

/// Mean over rows of -sum_i o_i log softmax(s)_i, plus its gradient
/// (softmax(s) - o) / N with respect to the logits.
template <typename T>
LossAndGrad<T> soft_cross_entropy_with_grad(const Matrix<T>& pred_logits, const Matrix<T>& target) {
  require(pred_logits.rows() == target.rows() && pred_logits.cols() == target.cols(),
          ErrorKind::dim_mismatch,
          "soft_cross_entropy: logits " + shape_str(pred_logits.rows(), pred_logits.cols()) +
              " vs target " + shape_str(target.rows(), target.cols()));
  LossAndGrad<T> out{0.0, Matrix<T>(pred_logits.rows(), pred_logits.cols())};
  const std::size_t n = pred_logits.rows();
  if (n == 0) return out;
  for (std::size_t i = 0; i < n; ++i) {
    auto o = target.row(i);
    check_simplex(o, i);
    const auto ls = log_softmax(pred_logits.row(i));
    double row_loss = 0.0;
    for (std::size_t k = 0; k < ls.size(); ++k) {
      if (o[k] > 0) row_loss -= static_cast<double>(o[k]) * ls[k];
      out.grad(i, k) = static_cast<T>((std::exp(ls[k]) - static_cast<double>(o[k])) / static_cast<double>(n));
    }
    out.loss += row_loss;
  }
  out.loss /= static_cast<double>(n);
  return out;
}

template <typename T>
double soft_cross_entropy(const Matrix<T>& pred_logits, const Matrix<T>& target) {
  return soft_cross_entropy_with_grad(pred_logits, target).loss;
}

}  // namespace textunlock
