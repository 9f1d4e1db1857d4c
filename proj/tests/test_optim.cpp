#include <gtest/gtest.h>

#include "textunlock/optim.hpp"

using namespace textunlock;

TEST(Optim, CosineScheduleValues) {
  EXPECT_DOUBLE_EQ(cosine_lr(0, 100, 1e-3), 1e-3);
  EXPECT_NEAR(cosine_lr(25, 100, 1e-3), 0.0008535533905932737, 1e-18);
  EXPECT_NEAR(cosine_lr(50, 100, 1e-3), 0.0005, 1e-18);
  EXPECT_NEAR(cosine_lr(75, 100, 1e-3), 0.00014644660940672628, 1e-18);
  EXPECT_NEAR(cosine_lr(100, 100, 1e-3), 0.0, 1e-18);
  EXPECT_THROW(cosine_lr(101, 100, 1e-3), Error);
  EXPECT_THROW(cosine_lr(0, 0, 1e-3), Error);
}

TEST(Optim, CosineScheduleIsMonotone) {
  for (std::size_t t = 1; t <= 50; ++t) EXPECT_LE(cosine_lr(t, 50, 1.0), cosine_lr(t - 1, 50, 1.0));
}

namespace {

MapperParams<double> filled(const MapperParams<double>& like, double v) {
  auto out = zeros_like<double>(like);
  out.for_each([&](const std::string&, MatrixD& t) {
    for (auto& x : t.flat()) x = v;
  });
  return out;
}

}  // namespace

TEST(Optim, AdamMatchesHandComputedSteps) {
  auto p = filled(init_mapper<double>(1, 1, 1, 0), 1.0);
  auto state = AdamState::for_params(p);
  const AdamConfig cfg;

  adam_step(p, filled(p, 0.5), state, 0.1, cfg);
  // Step 1: m_hat = g, v_hat = g^2, so the update is lr * g / (|g| + eps).
  const double p1 = 1.0 - 0.1 * 0.5 / (0.5 + 1e-8);
  p.for_each([&](const std::string&, const MatrixD& t) {
    for (double x : t.flat()) EXPECT_DOUBLE_EQ(x, p1);
  });

  adam_step(p, filled(p, -1.0), state, 0.05, cfg);
  const double m = 0.9 * 0.05 + 0.1 * -1.0;
  const double v = 0.999 * (0.001 * 0.25) + 0.001 * 1.0;
  const double mhat = m / (1 - 0.9 * 0.9), vhat = v / (1 - 0.999 * 0.999);
  const double p2 = p1 - 0.05 * mhat / (std::sqrt(vhat) + 1e-8);
  p.for_each([&](const std::string&, const MatrixD& t) {
    for (double x : t.flat()) EXPECT_NEAR(x, p2, 1e-15);
  });
  EXPECT_EQ(state.step, 2u);
}

TEST(Optim, ZeroGradientLeavesParametersUnchanged) {
  auto p = init_mapper<double>(3, 2, 2, 1);
  const auto before = p;
  auto state = AdamState::for_params(p);
  adam_step(p, filled(p, 0.0), state, 0.1);
  EXPECT_EQ(p, before);
}

TEST(Optim, NonFiniteGradientIsRejectedBeforeAnyUpdate) {
  auto p = init_mapper<double>(3, 2, 2, 1);
  const auto before = p;
  auto state = AdamState::for_params(p);
  auto g = filled(p, 0.1);
  g.weight[1](0, 1) = std::numeric_limits<double>::quiet_NaN();
  try {
    adam_step(p, g, state, 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::non_finite_gradient);
    EXPECT_NE(std::string(e.what()).find("layer1.weight"), std::string::npos);
  }
  EXPECT_EQ(p, before);
  EXPECT_EQ(state.step, 0u);
}
