#include <gtest/gtest.h>

#include "textunlock/matrix.hpp"

using namespace textunlock;

TEST(Matrix, MatmulMatchesHandComputation) {
  MatrixD a{{1, 2, 3}, {4, 5, 6}};
  MatrixD b{{7, 8}, {9, 10}, {11, 12}};
  EXPECT_EQ(matmul(a, b), (MatrixD{{58, 64}, {139, 154}}));
}

TEST(Matrix, TransposedProductsAgreeWithExplicitTranspose) {
  MatrixD a{{1, -2, 0.5}, {3, 4, -1}};
  MatrixD b{{2, 1, 0}, {-1, 0.25, 3}, {0, 1, 1}, {5, -5, 2}};
  EXPECT_EQ(matmul_bt(a, b), matmul(a, transpose(b)));
  MatrixD c{{1, 2}, {3, 4}};
  EXPECT_EQ(matmul_at(a, c), matmul(transpose(a), c));
}

TEST(Matrix, ShapeMismatchThrows) {
  MatrixF a(2, 3), b(2, 3);
  try {
    (void)matmul(a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::dim_mismatch);
  }
  EXPECT_THROW((MatrixF{{1, 2}, {3}}), Error);
  EXPECT_THROW(MatrixF(2, 2, std::vector<float>(3)), Error);
}

TEST(Matrix, ArgmaxTieGoesToLowestIndex) {
  std::vector<float> row = {0.5f, 2.0f, 2.0f, 1.0f};
  EXPECT_EQ(argmax(row), 1u);
  MatrixF m{{3, 3, 3}, {0, 1, 1}};
  EXPECT_EQ(argmax_rows(m), (std::vector<std::size_t>{0, 1}));
}

TEST(Matrix, GatherAndSliceRows) {
  MatrixF m{{0, 0}, {1, 1}, {2, 2}, {3, 3}};
  std::vector<std::size_t> idx = {3, 0, 3};
  EXPECT_EQ(gather_rows(m, idx), (MatrixF{{3, 3}, {0, 0}, {3, 3}}));
  EXPECT_EQ(slice_rows(m, 1, 3), (MatrixF{{1, 1}, {2, 2}}));
  EXPECT_EQ(slice_rows(m, 2, 2).rows(), 0u);
  EXPECT_THROW(slice_rows(m, 3, 5), Error);
  std::vector<std::size_t> bad = {4};
  EXPECT_THROW(gather_rows(m, bad), Error);
}

TEST(Matrix, FiniteCheckAndMaxAbsDiff) {
  MatrixF m{{1, 2}, {3, 4}};
  EXPECT_TRUE(m.all_finite());
  auto n = m;
  n(1, 0) = 3.5f;
  EXPECT_DOUBLE_EQ(max_abs_diff(m, n), 0.5);
  n(0, 0) = std::numeric_limits<float>::infinity();
  EXPECT_FALSE(n.all_finite());
}
