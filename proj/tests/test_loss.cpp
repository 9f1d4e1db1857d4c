#include <gtest/gtest.h>

#include "textunlock/loss.hpp"
#include "textunlock/random.hpp"
#include "textunlock/selftest.hpp"

using namespace textunlock;

TEST(Loss, SoftmaxHighPrecisionOracle) {
  const auto p = softmax({1.0, 2.0, 3.0});
  EXPECT_NEAR(p[0], 0.090030573170380458, 1e-15);
  EXPECT_NEAR(p[1], 0.24472847105479765, 1e-15);
  EXPECT_NEAR(p[2], 0.66524095577482189, 1e-15);
}

TEST(Loss, SoftmaxIsShiftInvariantAndStable) {
  const auto a = softmax({1.0, 2.0, 3.0});
  const auto b = softmax({1001.0, 1002.0, 1003.0});
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(a[i], b[i], 1e-15);
  const auto c = softmax({-1e4, 0.0});
  EXPECT_EQ(c[0], 0.0);
  EXPECT_EQ(c[1], 1.0);
}

TEST(Loss, SoftCrossEntropyOracle) {
  // -(0.2 log p1 + 0.3 log p2 + 0.5 log p3) with p = softmax([1, 2, 3]).
  MatrixD s{{1, 2, 3}};
  MatrixD o{{0.2, 0.3, 0.5}};
  EXPECT_NEAR(soft_cross_entropy(s, o), 1.1076059644443803, 1e-12);
}

TEST(Loss, KlOracleAndEdgeCases) {
  EXPECT_NEAR(kl_divergence({0.5, 0.5}, {0.9, 0.1}), 0.51082562376599068, 1e-14);
  EXPECT_EQ(kl_divergence({0.3, 0.7}, {0.3, 0.7}), 0.0);
  EXPECT_EQ(kl_divergence({0.0, 1.0}, {0.5, 0.5}), std::log(2.0));
  EXPECT_TRUE(std::isinf(kl_divergence({0.5, 0.5}, {1.0, 0.0})));
}

TEST(Loss, CrossEntropyEqualsKlPlusEntropy) {
  const auto r = selftest::check_ce_kl_identity(5, 1000);
  EXPECT_TRUE(r.pass) << r.detail;
}

TEST(Loss, GradientIsSoftmaxMinusTargetOverN) {
  MatrixD s{{1, 2, 3}, {0, 0, 0}};
  MatrixD o{{0.2, 0.3, 0.5}, {1, 0, 0}};
  const auto lg = soft_cross_entropy_with_grad(s, o);
  const auto p = softmax({1.0, 2.0, 3.0});
  EXPECT_NEAR(lg.grad(0, 0), (p[0] - 0.2) / 2, 1e-15);
  EXPECT_NEAR(lg.grad(1, 0), (1.0 / 3 - 1.0) / 2, 1e-15);
  EXPECT_NEAR(lg.grad(1, 2), (1.0 / 3) / 2, 1e-15);
}

TEST(Loss, MatchedLogitsAreAMinimum) {
  // CE is convex in the logits and minimized where softmax(s) == o.
  MatrixD o{{0.1, 0.6, 0.3}};
  MatrixD s{{std::log(0.1), std::log(0.6), std::log(0.3)}};
  const double best = soft_cross_entropy(s, o);
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    auto q = s;
    for (auto& v : q.flat()) v += 0.5 * rng.normal();
    EXPECT_GE(soft_cross_entropy(q, o), best - 1e-12);
  }
  EXPECT_NEAR(best, entropy(std::as_const(o).row(0)), 1e-12);
}

TEST(Loss, TargetsMustBeDistributions) {
  MatrixD s{{1, 2}};
  EXPECT_THROW((void)soft_cross_entropy(s, MatrixD{{0.5, 0.6}}), Error);
  EXPECT_THROW((void)soft_cross_entropy(s, MatrixD{{-0.5, 1.5}}), Error);
  EXPECT_THROW((void)soft_cross_entropy(s, MatrixD{{1.0, 0.0, 0.0}}), Error);
}
