#include <gtest/gtest.h>

#include "textunlock/loss.hpp"
#include "textunlock/mapper.hpp"
#include "textunlock/selftest.hpp"

using namespace textunlock;

TEST(Mapper, GeluMatchesHighPrecisionValues) {
  // x * Phi(x), evaluated with 30-digit erf.
  EXPECT_NEAR(gelu(1.0), 0.84134474606854295, 1e-15);
  EXPECT_NEAR(gelu(-1.0), -0.15865525393145705, 1e-15);
  EXPECT_NEAR(gelu(0.5), 0.34573123063700655, 1e-15);
  EXPECT_NEAR(gelu(-3.0), -0.0040496940948902836, 1e-15);
  EXPECT_NEAR(gelu(2.5), 2.4844758366855597, 1e-15);
  EXPECT_NEAR(gelu_grad(1.0), 1.0833154705876863, 1e-14);
  EXPECT_NEAR(gelu_grad(-1.0), -0.083315470587686298, 1e-14);
  EXPECT_NEAR(gelu_grad(0.5), 0.86749512465616284, 1e-14);
}

TEST(Mapper, LayerShapes) {
  const auto p = init_mapper<float>(4, 3, 2, 0);
  ASSERT_EQ(p.weight.size(), 3u);
  EXPECT_EQ(p.weight[0].rows(), 4u);
  EXPECT_EQ(p.weight[0].cols(), 8u);
  EXPECT_EQ(p.weight[1].rows(), 8u);
  EXPECT_EQ(p.weight[1].cols(), 8u);
  EXPECT_EQ(p.weight[2].rows(), 8u);
  EXPECT_EQ(p.weight[2].cols(), 3u);
  ASSERT_EQ(p.ln_scale.size(), 2u);
  EXPECT_EQ(p.ln_scale[0].cols(), 8u);
  // 4*8+8 + 8*8+8 + 8*3+3 + 2*(8+8)
  EXPECT_EQ(p.num_parameters(), 40u + 72u + 27u + 32u);
}

TEST(Mapper, HiddenLayersKnob) {
  MapperHyper h;
  h.n = 5;
  h.m = 2;
  h.hidden_layers = 3;
  const auto p = init_mapper<float>(h, 1);
  EXPECT_EQ(p.weight.size(), 4u);
  EXPECT_EQ(p.ln_scale.size(), 3u);
  EXPECT_EQ(forward_eval(p, MatrixF(7, 5, 0.3f)).cols(), 2u);
}

TEST(Mapper, InitializationRanges) {
  const auto p = init_mapper<double>(16, 8, 2, 5);
  const double bound = 1.0 / std::sqrt(16.0);
  for (double v : p.weight[0].flat()) {
    EXPECT_LE(std::abs(v), bound);
  }
  for (const auto& b : p.bias)
    for (double v : b.flat()) EXPECT_EQ(v, 0.0);
  for (double v : p.ln_scale[0].flat()) EXPECT_EQ(v, 1.0);
  EXPECT_EQ(init_mapper<float>(16, 8, 2, 5), init_mapper<float>(16, 8, 2, 5));
  EXPECT_NE(init_mapper<float>(16, 8, 2, 5), init_mapper<float>(16, 8, 2, 6));
}

TEST(Mapper, EvalModeIsDeterministicAndIgnoresSeed) {
  const auto p = init_mapper<float>(6, 4, 2, 3);
  Rng rng(1);
  MatrixF x(10, 6);
  for (auto& v : x.flat()) v = static_cast<float>(rng.normal());
  EXPECT_EQ(forward(p, x, Mode::eval, 1).output, forward(p, x, Mode::eval, 2).output);
  EXPECT_FALSE(forward(p, x, Mode::eval).trace.has_value());
}

TEST(Mapper, DropoutOnlyInTrainModeAndOnlyFirstBlock) {
  MapperHyper h;
  h.n = 6;
  h.m = 4;
  h.dropout_p = 0.5;
  const auto p = init_mapper<double>(h, 3);
  MatrixD x(50, 6, 0.7);
  const auto a = forward(p, x, Mode::train, 11);
  const auto b = forward(p, x, Mode::train, 11);
  const auto c = forward(p, x, Mode::train, 12);
  EXPECT_EQ(a.output, b.output);
  EXPECT_NE(a.output, c.output);
  ASSERT_TRUE(a.trace.has_value());
  EXPECT_FALSE(a.trace->blocks[0].mask.empty());
  EXPECT_TRUE(a.trace->blocks[1].mask.empty());
  // Inverted dropout: kept units are scaled by 1 / (1 - p).
  std::size_t zeros = 0;
  for (double v : a.trace->blocks[0].mask.flat()) {
    EXPECT_TRUE(v == 0.0 || v == 2.0);
    zeros += v == 0.0;
  }
  const double frac = static_cast<double>(zeros) / static_cast<double>(a.trace->blocks[0].mask.size());
  EXPECT_NEAR(frac, 0.5, 0.05);

  auto no_drop = h;
  no_drop.dropout_p = 0.0;
  const auto q = init_mapper<double>(no_drop, 3);
  EXPECT_EQ(forward(q, x, Mode::train, 1).output, forward(q, x, Mode::eval).output);
}

TEST(Mapper, LayerNormOutputIsStandardized) {
  const auto p = init_mapper<double>(8, 4, 2, 9);
  Rng rng(2);
  MatrixD x(20, 8);
  for (auto& v : x.flat()) v = 3.0 * rng.normal() + 1.0;
  const auto r = forward(p, x, Mode::train, 0);
  const auto& xhat = r.trace->blocks[1].xhat;
  for (std::size_t i = 0; i < xhat.rows(); ++i) {
    double mu = 0, var = 0;
    for (double v : xhat.row(i)) mu += v;
    mu /= static_cast<double>(xhat.cols());
    for (double v : xhat.row(i)) var += (v - mu) * (v - mu);
    var /= static_cast<double>(xhat.cols());
    EXPECT_NEAR(mu, 0.0, 1e-12);
    EXPECT_NEAR(var, 1.0, 1e-3);  // eps = 1e-5 in the denominator
  }
}

TEST(Mapper, FeatureWidthMismatchThrows) {
  const auto p = init_mapper<float>(4, 3, 2, 0);
  try {
    (void)forward_eval(p, MatrixF(2, 5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::dim_mismatch);
  }
}

TEST(Mapper, BackwardMatchesFiniteDifferences) {
  const auto g = selftest::gradient_check(202, 1e-4);
  EXPECT_LE(g.max_rel_error, 1e-4) << g.worst_param;
  EXPECT_EQ(g.checked, 171u);
  for (std::uint64_t seed : {1u, 2u, 3u}) EXPECT_LE(selftest::gradient_check(seed).max_rel_error, 1e-4);
}

TEST(Mapper, BackwardRejectsForeignTrace) {
  const auto p = init_mapper<double>(4, 3, 2, 0);
  auto other = init_mapper<double>(4, 3, 3, 0);
  const auto r = forward(other, MatrixD(2, 4, 1.0), Mode::train, 0);
  EXPECT_THROW((void)backward(p, *r.trace, MatrixD(2, 3)), Error);
}

TEST(Mapper, L2NormalizeRows) {
  MatrixD m{{3, 4}, {0, 0}, {1e-13, 0}};
  const auto n = l2_normalize_rows(m);
  EXPECT_DOUBLE_EQ(n.rows(0, 0), 0.6);
  EXPECT_DOUBLE_EQ(n.rows(0, 1), 0.8);
  EXPECT_EQ(n.degenerate_count(), 2u);
  EXPECT_EQ(n.rows(1, 0), 0.0);
  EXPECT_EQ(n.rows(2, 0), 1e-13);
}

TEST(Mapper, L2NormalizeBackwardMatchesFiniteDifferences) {
  MatrixD x{{0.3, -1.2, 2.0}};
  MatrixD g{{0.7, 0.1, -0.4}};
  const auto fwd = l2_normalize_rows(x);
  const auto dx = l2_normalize_backward(fwd, g);
  const double h = 1e-6;
  for (std::size_t j = 0; j < 3; ++j) {
    auto xp = x, xm = x;
    xp(0, j) += h;
    xm(0, j) -= h;
    const auto yp = l2_normalize_rows(xp).rows, ym = l2_normalize_rows(xm).rows;
    double num = 0;
    for (std::size_t k = 0; k < 3; ++k) num += g(0, k) * (yp(0, k) - ym(0, k)) / (2 * h);
    EXPECT_NEAR(dx(0, j), num, 1e-8);
  }
}
