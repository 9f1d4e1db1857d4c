#include <gtest/gtest.h>

#include <utility>

#include "textunlock/cbm.hpp"
#include "textunlock/fixtures.hpp"

using namespace textunlock;

namespace {

MatrixF unit_gaussian(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  return fixtures::unit_rows(fixtures::gaussian(r, c, rng));
}

}  // namespace

TEST(Cbm, ConceptSetNormalizesAndRejectsDuplicates) {
  const auto cs = make_concept_set({"a", "b"}, MatrixF{{3, 4}, {0, -2}});
  EXPECT_FLOAT_EQ(cs.C(0, 1), 0.8f);
  EXPECT_FLOAT_EQ(cs.C(1, 1), -1.0f);
  EXPECT_THROW(make_concept_set({"Fish", "fish"}, MatrixF{{1, 0}, {0, 1}}), Error);
  EXPECT_THROW(make_concept_set({"a"}, MatrixF{{0, 0}}), Error);
  EXPECT_THROW(make_concept_set({"a"}, MatrixF{{1, 0}, {0, 1}}), Error);
}

TEST(Cbm, WeightsAreConceptClassCosines) {
  const auto cs = fixtures::random_concepts(7, 5, 1);
  const auto head = build_class_head(unit_gaussian(3, 5, 2), fixtures::class_names(3), "{}");
  const auto clf = build_concept_classifier(cs, head);
  ASSERT_EQ(clf.W_con.rows(), 7u);
  ASSERT_EQ(clf.W_con.cols(), 3u);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t k = 0; k < 3; ++k) {
      double d = 0;
      for (std::size_t j = 0; j < 5; ++j) d += static_cast<double>(cs.C(i, j)) * head.U(k, j);
      EXPECT_NEAR(clf.W_con(i, k), d, 1e-6);
    }
}

TEST(Cbm, BlockSizeDoesNotChangeLogits) {
  const auto cs = fixtures::random_concepts(50, 6, 3);
  const auto head = build_class_head(unit_gaussian(4, 6, 4), fixtures::class_names(4), "{}");
  const auto f = unit_gaussian(20, 6, 5);
  const auto clf = build_concept_classifier(cs, head);
  const auto whole = logits_from_activations(concept_activations(f, cs), clf);
  for (std::size_t b : {1u, 7u, 50u, 4096u})
    EXPECT_LE(max_abs_diff(cbm_logits(f, cs, clf, b), whole), 1e-5) << "block " << b;
  EXPECT_THROW(cbm_logits(f, cs, clf, 0), Error);
}

TEST(Cbm, GramIsSymmetricAndMatchesPath) {
  const auto cs = fixtures::random_concepts(30, 6, 6);
  const auto g = gram(cs);
  EXPECT_EQ(g, transpose(g));
  const auto head = build_class_head(unit_gaussian(4, 6, 7), fixtures::class_names(4), "{}");
  const auto f = unit_gaussian(10, 6, 8);
  EXPECT_LE(max_abs_diff(cbm_logits_gram_path(f, cs, head), cbm_logits(f, cs, head)), 1e-5);
}

TEST(Cbm, OrthonormalBasisReproducesTextHead) {
  // With C^T C = I the bottleneck is lossless.
  const auto cs = fixtures::orthonormal_concepts(6, 9);
  const auto head = build_class_head(unit_gaussian(4, 6, 10), fixtures::class_names(4), "{}");
  const auto f = unit_gaussian(10, 6, 11);
  EXPECT_LE(max_abs_diff(cbm_logits(f, cs, head), score(f, head)), 1e-5);
}

TEST(Cbm, DimensionMismatchIsReported) {
  const auto cs = fixtures::random_concepts(5, 6, 1);
  const auto head = build_class_head(unit_gaussian(3, 4, 2), fixtures::class_names(3), "{}");
  try {
    build_concept_classifier(cs, head);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::dim_mismatch);
  }
}

TEST(Cbm, AttributionSumsToLogitAndIsSorted) {
  const auto cs = fixtures::random_concepts(12, 5, 12);
  const auto head = build_class_head(unit_gaussian(3, 5, 13), fixtures::class_names(3), "{}");
  const auto clf = build_concept_classifier(cs, head);
  const auto f = unit_gaussian(1, 5, 14);
  const auto act = concept_activations(f, cs);
  const auto logits = cbm_logits(f, cs, clf);
  for (std::size_t k = 0; k < 3; ++k) {
    const auto all = explain_prediction(std::as_const(act).row(0), clf, k, 100);
    EXPECT_NEAR(all.logit, logits(0, k), 1e-5);
    double sum = 0;
    for (const auto& e : all.entries) {
      EXPECT_DOUBLE_EQ(e.importance, e.activation * e.weight);
      EXPECT_EQ(e.name, cs.names[e.concept_index]);
      sum += e.importance;
    }
    EXPECT_NEAR(sum, all.logit, 1e-9);
    for (std::size_t i = 1; i < all.entries.size(); ++i)
      EXPECT_GE(all.entries[i - 1].importance, all.entries[i].importance);
    EXPECT_EQ(explain_prediction(std::as_const(act).row(0), clf, k, 3).entries.size(), 3u);
  }
  EXPECT_THROW(explain_prediction(std::as_const(act).row(0), clf, 3, 5), Error);
}

TEST(Cbm, ZeroImportanceEntriesAreDropped) {
  ConceptClassifier clf{MatrixF{{1, 0}, {2, 0}, {0, 1}}, {"x", "y", "z"}, {"a", "b"}};
  const std::vector<float> act = {0.5f, 0.0f, 3.0f};
  const auto e = explain_prediction(act, clf, 0, 10);
  ASSERT_EQ(e.entries.size(), 1u);
  EXPECT_EQ(e.entries[0].name, "x");
  EXPECT_DOUBLE_EQ(e.logit, 0.5);
}

TEST(Cbm, TopKBreaksTiesByLowestIndex) {
  const std::vector<float> row = {0.1f, 0.5f, 0.5f, 0.9f, 0.5f};
  EXPECT_EQ(top_k_indices(row, 3), (std::vector<std::size_t>{3, 1, 2}));
  EXPECT_EQ(top_k_indices(row, 10).size(), 5u);
}

TEST(Cbm, GlobalConceptsFormADistribution) {
  MatrixF act{{0.9f, 0.1f, 0.5f}, {0.8f, 0.7f, 0.1f}};
  const auto freq = global_class_concepts(act, 2);
  EXPECT_DOUBLE_EQ(freq[0], 0.5);
  EXPECT_DOUBLE_EQ(freq[1], 0.25);
  EXPECT_DOUBLE_EQ(freq[2], 0.25);
  EXPECT_THROW(global_class_concepts(act, 0), Error);
}
