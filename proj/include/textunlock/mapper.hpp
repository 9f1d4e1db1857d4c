#pragma once

// MLP projector from visual features (dim n) into the text-embedding space
// (dim m):
//
//   [Linear -> LayerNorm -> GELU -> Dropout]      first hidden block
//   [Linear -> LayerNorm -> GELU] x (hidden-1)    remaining hidden blocks
//   Linear                                        output projection
//
// Hidden width is n * dim_out_factor. Dropout is inverted (scaled by
// 1/(1-p) at train time) so eval mode is a plain deterministic function.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "textunlock/error.hpp"
#include "textunlock/matrix.hpp"
#include "textunlock/random.hpp"

namespace textunlock {

struct MapperHyper {
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t dim_out_factor = 2;
  double dropout_p = 0.5;
  /// Number of Linear-LayerNorm-GELU blocks before the output projection.
  std::size_t hidden_layers = 2;

  std::size_t hidden() const { return n * dim_out_factor; }
  std::size_t num_linear() const { return hidden_layers + 1; }

  friend bool operator==(const MapperHyper&, const MapperHyper&) = default;
};

inline constexpr double kLayerNormEps = 1e-5;

template <typename T>
struct MapperParams {
  MapperHyper hyper;
  std::vector<Matrix<T>> weight;    // in x out, one per linear layer
  std::vector<Matrix<T>> bias;      // 1 x out
  std::vector<Matrix<T>> ln_scale;  // 1 x hidden, one per hidden block
  std::vector<Matrix<T>> ln_shift;  // 1 x hidden

  /// Visits every tensor in a fixed order with a stable name.
  template <typename F>
  void for_each(F&& f) { visit(*this, f); }
  template <typename F>
  void for_each(F&& f) const { visit(*this, f); }

  std::size_t num_parameters() const {
    std::size_t total = 0;
    for_each([&](const std::string&, const Matrix<T>& t) { total += t.size(); });
    return total;
  }

  bool all_finite() const {
    bool ok = true;
    for_each([&](const std::string&, const Matrix<T>& t) { ok = ok && t.all_finite(); });
    return ok;
  }

  friend bool operator==(const MapperParams&, const MapperParams&) = default;

 private:
  template <typename Self, typename F>
  static void visit(Self& self, F& f) {
    for (std::size_t i = 0; i < self.weight.size(); ++i) {
      f("layer" + std::to_string(i) + ".weight", self.weight[i]);
      f("layer" + std::to_string(i) + ".bias", self.bias[i]);
      if (i < self.ln_scale.size()) {
        f("norm" + std::to_string(i) + ".scale", self.ln_scale[i]);
        f("norm" + std::to_string(i) + ".shift", self.ln_shift[i]);
      }
    }
  }
};

using MapperParamsF = MapperParams<float>;

template <typename To, typename From>
MapperParams<To> cast(const MapperParams<From>& p) {
  MapperParams<To> out;
  out.hyper = p.hyper;
  auto conv = [](const std::vector<Matrix<From>>& v) {
    std::vector<Matrix<To>> r;
    r.reserve(v.size());
    for (const auto& m : v) r.push_back(cast<To>(m));
    return r;
  };
  out.weight = conv(p.weight);
  out.bias = conv(p.bias);
  out.ln_scale = conv(p.ln_scale);
  out.ln_shift = conv(p.ln_shift);
  return out;
}

/// Zero tensors with the same shapes as `p` (gradient / moment storage).
template <typename To, typename From>
MapperParams<To> zeros_like(const MapperParams<From>& p) {
  MapperParams<To> out;
  out.hyper = p.hyper;
  auto z = [](const std::vector<Matrix<From>>& v) {
    std::vector<Matrix<To>> r;
    for (const auto& m : v) r.emplace_back(m.rows(), m.cols());
    return r;
  };
  out.weight = z(p.weight);
  out.bias = z(p.bias);
  out.ln_scale = z(p.ln_scale);
  out.ln_shift = z(p.ln_shift);
  return out;
}

inline void validate_hyper(const MapperHyper& h) {
  require(h.n >= 1 && h.m >= 1 && h.dim_out_factor >= 1, ErrorKind::invalid_argument,
          "mapper: n, m and dim_out_factor must be >= 1");
  require(h.hidden_layers >= 1, ErrorKind::invalid_argument, "mapper: hidden_layers must be >= 1");
  require(h.dropout_p >= 0.0 && h.dropout_p < 1.0, ErrorKind::invalid_argument,
          "mapper: dropout_p must be in [0, 1)");
}

/// Weights uniform in +-1/sqrt(fan_in), biases zero, LayerNorm identity.
template <typename T = float>
MapperParams<T> init_mapper(const MapperHyper& hyper, std::uint64_t seed) {
  validate_hyper(hyper);
  MapperParams<T> p;
  p.hyper = hyper;
  Rng rng(seed);
  const std::size_t h = hyper.hidden();
  for (std::size_t i = 0; i < hyper.num_linear(); ++i) {
    const std::size_t in = i == 0 ? hyper.n : h;
    const std::size_t out = i + 1 == hyper.num_linear() ? hyper.m : h;
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    Matrix<T> w(in, out);
    for (auto& v : w.flat()) v = static_cast<T>(rng.uniform(-bound, bound));
    p.weight.push_back(std::move(w));
    p.bias.emplace_back(1, out, T{0});
  }
  for (std::size_t i = 0; i < hyper.hidden_layers; ++i) {
    p.ln_scale.emplace_back(1, h, T{1});
    p.ln_shift.emplace_back(1, h, T{0});
  }
  return p;
}

template <typename T = float>
MapperParams<T> init_mapper(std::size_t n, std::size_t m, std::size_t dim_out_factor,
                            std::uint64_t seed) {
  MapperHyper hyper;
  hyper.n = n;
  hyper.m = m;
  hyper.dim_out_factor = dim_out_factor;
  return init_mapper<T>(hyper, seed);
}

// ---------------------------------------------------------------------------

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

/// d/dx [x * Phi(x)] = Phi(x) + x * phi(x)
inline double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) * (std::numbers::inv_sqrtpi / std::numbers::sqrt2);
  return cdf + x * pdf;
}

enum class Mode { train, eval };

template <typename T>
struct BlockTrace {
  Matrix<T> input;         // block input (N x in)
  Matrix<T> xhat;          // normalized pre-activation
  std::vector<T> inv_std;  // per row
  Matrix<T> ln_out;        // GELU input
  Matrix<T> mask;          // dropout multipliers; empty when no dropout
};

template <typename T>
struct ForwardTrace {
  MapperHyper hyper;
  std::vector<BlockTrace<T>> blocks;
  Matrix<T> final_input;
};

template <typename T>
struct ForwardResult {
  Matrix<T> output;
  std::optional<ForwardTrace<T>> trace;  // present iff run in train mode
};

namespace detail {

template <typename T>
Matrix<T> affine(const Matrix<T>& x, const Matrix<T>& w, const Matrix<T>& b) {
  auto y = matmul(x, w);
  for (std::size_t i = 0; i < y.rows(); ++i) {
    auto r = y.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += b(0, j);
  }
  return y;
}

}  // namespace detail

/// Runs the MLP on N x n features. Train mode applies dropout with masks
/// drawn from `seed` and records everything backward() needs.
template <typename T>
ForwardResult<T> forward(const MapperParams<T>& params, const Matrix<T>& feats, Mode mode,
                         std::uint64_t seed = 0) {
  const auto& hp = params.hyper;
  require(feats.cols() == hp.n, ErrorKind::dim_mismatch,
          "mapper: features have " + std::to_string(feats.cols()) + " columns, mapper expects n = " +
              std::to_string(hp.n));
  require(params.weight.size() == hp.num_linear() && params.ln_scale.size() == hp.hidden_layers,
          ErrorKind::invalid_argument, "mapper: parameter layout does not match hyperparameters");

  const bool train = mode == Mode::train;
  ForwardTrace<T> trace;
  trace.hyper = hp;
  Rng rng(seed);

  Matrix<T> x = feats;
  for (std::size_t b = 0; b < hp.hidden_layers; ++b) {
    BlockTrace<T> bt;
    auto z = detail::affine(x, params.weight[b], params.bias[b]);
    const std::size_t width = z.cols();
    Matrix<T> xhat(z.rows(), width);
    Matrix<T> y(z.rows(), width);
    std::vector<T> inv_std(z.rows());
    for (std::size_t i = 0; i < z.rows(); ++i) {
      auto zr = z.row(i);
      double mu = 0.0;
      for (T v : zr) mu += v;
      mu /= static_cast<double>(width);
      double var = 0.0;
      for (T v : zr) var += (v - mu) * (v - mu);
      var /= static_cast<double>(width);
      const double is = 1.0 / std::sqrt(var + kLayerNormEps);
      inv_std[i] = static_cast<T>(is);
      for (std::size_t j = 0; j < width; ++j) {
        const double xh = (zr[j] - mu) * is;
        xhat(i, j) = static_cast<T>(xh);
        y(i, j) = static_cast<T>(params.ln_scale[b](0, j) * xh + params.ln_shift[b](0, j));
      }
    }
    Matrix<T> out(y.rows(), width);
    for (std::size_t k = 0; k < y.size(); ++k) out.flat()[k] = static_cast<T>(gelu(y.flat()[k]));

    if (train && b == 0 && hp.dropout_p > 0.0) {
      const double keep_scale = 1.0 / (1.0 - hp.dropout_p);
      Matrix<T> mask(out.rows(), width);
      for (auto& v : mask.flat()) v = static_cast<T>(rng.uniform() < hp.dropout_p ? 0.0 : keep_scale);
      for (std::size_t k = 0; k < out.size(); ++k) out.flat()[k] *= mask.flat()[k];
      bt.mask = std::move(mask);
    }
    if (train) {
      bt.input = std::move(x);
      bt.xhat = std::move(xhat);
      bt.inv_std = std::move(inv_std);
      bt.ln_out = std::move(y);
      trace.blocks.push_back(std::move(bt));
    }
    x = std::move(out);
  }
  auto result = detail::affine(x, params.weight.back(), params.bias.back());
  if (!train) return {std::move(result), std::nullopt};
  trace.final_input = std::move(x);
  return {std::move(result), std::move(trace)};
}

template <typename T>
Matrix<T> forward_eval(const MapperParams<T>& params, const Matrix<T>& feats) {
  return forward(params, feats, Mode::eval).output;
}

/// Exact gradients of sum(upstream * output) with respect to every parameter.
template <typename T>
MapperParams<T> backward(const MapperParams<T>& params, const ForwardTrace<T>& trace,
                         const Matrix<T>& upstream) {
  const auto& hp = params.hyper;
  require(trace.hyper == hp && trace.blocks.size() == hp.hidden_layers, ErrorKind::invalid_argument,
          "mapper: trace was produced by a different mapper configuration");
  require(upstream.rows() == trace.final_input.rows() && upstream.cols() == hp.m,
          ErrorKind::dim_mismatch, "mapper: upstream gradient shape does not match the trace");

  auto grads = zeros_like<T>(params);
  auto column_sums = [](const Matrix<T>& g) {
    Matrix<T> s(1, g.cols());
    std::vector<double> acc(g.cols(), 0.0);
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) acc[j] += g(i, j);
    for (std::size_t j = 0; j < g.cols(); ++j) s(0, j) = static_cast<T>(acc[j]);
    return s;
  };

  const std::size_t last = hp.hidden_layers;
  grads.weight[last] = matmul_at(trace.final_input, upstream);
  grads.bias[last] = column_sums(upstream);
  Matrix<T> g = matmul_bt(upstream, params.weight[last]);  // d/d(block output)

  for (std::size_t b = hp.hidden_layers; b-- > 0;) {
    const auto& bt = trace.blocks[b];
    const std::size_t width = bt.ln_out.cols();
    if (!bt.mask.empty())
      for (std::size_t k = 0; k < g.size(); ++k) g.flat()[k] *= bt.mask.flat()[k];
    for (std::size_t k = 0; k < g.size(); ++k) g.flat()[k] *= static_cast<T>(gelu_grad(bt.ln_out.flat()[k]));

    // LayerNorm
    Matrix<T> dz(g.rows(), width);
    std::vector<double> dscale(width, 0.0), dshift(width, 0.0);
    for (std::size_t i = 0; i < g.rows(); ++i) {
      double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
      for (std::size_t j = 0; j < width; ++j) {
        const double gij = g(i, j);
        dscale[j] += gij * bt.xhat(i, j);
        dshift[j] += gij;
        const double dxh = gij * params.ln_scale[b](0, j);
        mean_dxhat += dxh;
        mean_dxhat_xhat += dxh * bt.xhat(i, j);
      }
      mean_dxhat /= static_cast<double>(width);
      mean_dxhat_xhat /= static_cast<double>(width);
      for (std::size_t j = 0; j < width; ++j) {
        const double dxh = static_cast<double>(g(i, j)) * params.ln_scale[b](0, j);
        dz(i, j) = static_cast<T>(bt.inv_std[i] * (dxh - mean_dxhat - bt.xhat(i, j) * mean_dxhat_xhat));
      }
    }
    for (std::size_t j = 0; j < width; ++j) {
      grads.ln_scale[b](0, j) = static_cast<T>(dscale[j]);
      grads.ln_shift[b](0, j) = static_cast<T>(dshift[j]);
    }

    grads.weight[b] = matmul_at(bt.input, dz);
    grads.bias[b] = column_sums(dz);
    if (b > 0) g = matmul_bt(dz, params.weight[b]);
  }
  return grads;
}

// ---------------------------------------------------------------------------

inline constexpr double kDegenerateNorm = 1e-12;

template <typename T>
struct NormalizedRows {
  Matrix<T> rows;
  std::vector<double> norms;
  std::vector<bool> degenerate;  // norm < 1e-12: row returned unchanged

  std::size_t degenerate_count() const {
    return static_cast<std::size_t>(std::count(degenerate.begin(), degenerate.end(), true));
  }
};

template <typename T>
NormalizedRows<T> l2_normalize_rows(const Matrix<T>& m) {
  NormalizedRows<T> out{m, std::vector<double>(m.rows()), std::vector<bool>(m.rows(), false)};
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double sq = 0.0;
    for (T v : m.row(i)) sq += static_cast<double>(v) * v;
    const double norm = std::sqrt(sq);
    out.norms[i] = norm;
    if (norm < kDegenerateNorm) {
      out.degenerate[i] = true;
      continue;
    }
    for (auto& v : out.rows.row(i)) v = static_cast<T>(v / norm);
  }
  return out;
}

/// Backprop through y = x / |x|: dx = (g - y (y . g)) / |x|. Degenerate rows
/// were passed through unchanged, so their gradient is passed through too.
template <typename T>
Matrix<T> l2_normalize_backward(const NormalizedRows<T>& fwd, const Matrix<T>& grad) {
  require(grad.rows() == fwd.rows.rows() && grad.cols() == fwd.rows.cols(), ErrorKind::dim_mismatch,
          "l2_normalize_backward: shape mismatch");
  Matrix<T> dx(grad.rows(), grad.cols());
  for (std::size_t i = 0; i < grad.rows(); ++i) {
    auto y = fwd.rows.row(i);
    auto g = grad.row(i);
    if (fwd.degenerate[i]) {
      std::copy(g.begin(), g.end(), dx.row(i).begin());
      continue;
    }
    double dot = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) dot += static_cast<double>(y[j]) * g[j];
    for (std::size_t j = 0; j < g.size(); ++j)
      dx(i, j) = static_cast<T>((g[j] - y[j] * dot) / fwd.norms[i]);
  }
  return dx;
}

}  // namespace textunlock
