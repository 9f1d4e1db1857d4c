#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

#include "textunlock/error.hpp"
#include "textunlock/mapper.hpp"

namespace textunlock {

/// base_lr * 0.5 * (1 + cos(pi * step / total_steps)), evaluated per
/// optimizer step.
inline double cosine_lr(std::size_t step, std::size_t total_steps, double base_lr) {
  require(total_steps >= 1 && step <= total_steps, ErrorKind::invalid_argument,
          "cosine_lr: need 0 <= step <= total_steps and total_steps >= 1");
  const double t = static_cast<double>(step) / static_cast<double>(total_steps);
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  MapperParams<double> m;  // first moment
  MapperParams<double> v;  // second moment
  std::uint64_t step = 0;

  template <typename T>
  static AdamState for_params(const MapperParams<T>& p) {
    return {zeros_like<double>(p), zeros_like<double>(p), 0};
  }
};

/// One bias-corrected Adam update. Throws non_finite_gradient (naming the
/// offending tensor and index) before touching any state.
template <typename P, typename G>
void adam_step(MapperParams<P>& params, const MapperParams<G>& grads, AdamState& state, double lr,
               const AdamConfig& cfg = {}) {
  std::vector<const Matrix<G>*> gs;
  grads.for_each([&](const std::string& name, const Matrix<G>& g) {
    gs.push_back(&g);
    for (std::size_t i = 0; i < g.size(); ++i)
      require(std::isfinite(static_cast<double>(g.flat()[i])), ErrorKind::non_finite_gradient,
              "adam: non-finite gradient in " + name + " at flat index " + std::to_string(i) +
                  " (step " + std::to_string(state.step) + ")");
  });
  std::vector<Matrix<double>*> ms, vs;
  state.m.for_each([&](const std::string&, Matrix<double>& t) { ms.push_back(&t); });
  state.v.for_each([&](const std::string&, Matrix<double>& t) { vs.push_back(&t); });
  require(gs.size() == ms.size() && gs.size() == vs.size(), ErrorKind::dim_mismatch,
          "adam: optimizer state does not match parameters");

  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  std::size_t t = 0;
  params.for_each([&](const std::string& name, Matrix<P>& p) {
    const auto& g = *gs[t];
    auto& m = *ms[t];
    auto& v = *vs[t];
    ++t;
    require(p.size() == g.size() && p.size() == m.size(), ErrorKind::dim_mismatch,
            "adam: shape mismatch in " + name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g.flat()[i];
      double& mi = m.flat()[i];
      double& vi = v.flat()[i];
      mi = cfg.beta1 * mi + (1.0 - cfg.beta1) * gi;
      vi = cfg.beta2 * vi + (1.0 - cfg.beta2) * gi * gi;
      const double update = lr * (mi / bc1) / (std::sqrt(vi / bc2) + cfg.eps);
      p.flat()[i] = static_cast<P>(static_cast<double>(p.flat()[i]) - update);
    }
  });
}

}  // namespace textunlock
