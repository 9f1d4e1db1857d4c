#include <gtest/gtest.h>

#include "textunlock/fixtures.hpp"
#include "textunlock/interventions.hpp"

using namespace textunlock;

namespace {

const MatrixF kAct{{1, 2, 3, 4}, {-1, -2, -3, -4}};

}  // namespace

TEST(Interventions, RemoveZeroesListedColumns) {
  const auto out = intervene_remove(kAct, {1, 3});
  EXPECT_EQ(out, (MatrixF{{1, 0, 3, 0}, {-1, 0, -3, 0}}));
  EXPECT_EQ(intervene_remove(kAct, {}), kAct);
  EXPECT_THROW(intervene_remove(kAct, {4}), Error);
}

TEST(Interventions, KeepScalesTheOthers) {
  const auto out = intervene_keep(kAct, {0}, 0.5);
  EXPECT_EQ(out, (MatrixF{{1, 1, 1.5f, 2}, {-1, -1, -1.5f, -2}}));
  EXPECT_EQ(intervene_keep(kAct, {0, 1, 2, 3}, 0.1), kAct);
  EXPECT_EQ(intervene_keep(kAct, {}, 1.0), kAct);
  EXPECT_THROW(intervene_keep(kAct, {0}, 1.5), Error);
}

TEST(Interventions, PerClassUsesEachRowsLabel) {
  InterventionSpec spec;
  spec.per_class = true;
  spec.per_class_sets = {{0}, {3}};
  const io::LabelVector labels = {1, 0};
  EXPECT_EQ(apply_intervention(kAct, spec, &labels), (MatrixF{{1, 2, 3, 0}, {0, -2, -3, -4}}));
  spec.mode = InterventionMode::keep;
  spec.keep_scale = 0.0;
  EXPECT_EQ(apply_intervention(kAct, spec, &labels), (MatrixF{{0, 0, 0, 4}, {-1, 0, 0, 0}}));
  EXPECT_THROW(apply_intervention(kAct, spec, nullptr), Error);
}

TEST(Interventions, ParseSpec) {
  const std::vector<std::string> concepts = {"fish", "fins", "dog", "long ears"};
  const std::vector<std::string> classes = {"tench", "english springer"};
  auto j = nlohmann::json::parse(R"({"mode":"keep","keep_scale":0.2,"scope":"per_class",
      "concepts":{"Tench":["fish","FINS"],"english springer":["dog"]}})");
  const auto s = parse_intervention_spec(j, concepts, classes);
  EXPECT_EQ(s.mode, InterventionMode::keep);
  EXPECT_DOUBLE_EQ(s.keep_scale, 0.2);
  ASSERT_TRUE(s.per_class);
  EXPECT_EQ(s.per_class_sets[0], (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(s.per_class_sets[1], (std::vector<std::size_t>{2}));

  const auto g = parse_intervention_spec(
      nlohmann::json::parse(R"({"concepts":{"a":["dog","fish"],"b":["dog"]}})"), concepts, classes);
  EXPECT_EQ(g.mode, InterventionMode::remove);
  EXPECT_FALSE(g.per_class);
  EXPECT_EQ(g.global, (std::vector<std::size_t>{0, 2}));
}

TEST(Interventions, UnknownNamesAreReportedTogether) {
  const std::vector<std::string> concepts = {"fish"};
  try {
    parse_intervention_spec(nlohmann::json::parse(R"({"concepts":{"x":["wings","fish","beak"]}})"), concepts, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::unknown_concept);
    EXPECT_NE(std::string(e.what()).find("'wings'"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("'beak'"), std::string::npos);
  }
  EXPECT_THROW(parse_intervention_spec(nlohmann::json::parse(R"({"scope":"per_class","concepts":{"x":["fish"]}})"),
                                       concepts, {"tench"}),
               Error);
  EXPECT_THROW(parse_intervention_spec(nlohmann::json::parse(R"({"mode":"drop","concepts":{}})"), concepts, {}),
               Error);
  EXPECT_THROW(parse_intervention_spec(nlohmann::json::parse(R"({"mode":"remove"})"), concepts, {}), Error);
}

TEST(Interventions, RemovingDesignatedConceptsHurtsAndKeepingHelps) {
  const auto fx = fixtures::make_dominant_concept_fixture();
  const auto clf = build_concept_classifier(fx.concepts, fx.head);
  const auto act = concept_activations(fx.mapped, fx.concepts);
  InterventionSpec spec;
  spec.per_class = true;
  spec.per_class_sets = fx.class_concepts;
  const auto removed = run_intervention_on_activations(act, clf, fx.labels, spec);
  EXPECT_LE(removed.delta, -20.0);
  spec.mode = InterventionMode::keep;
  const auto kept = run_intervention_on_activations(act, clf, fx.labels, spec);
  EXPECT_GE(kept.delta, 0.0);
  EXPECT_DOUBLE_EQ(kept.accuracy_before, removed.accuracy_before);
}

TEST(Interventions, AblationModes) {
  const MatrixF f{{1, 10}, {3, 20}, {5, 30}};
  AblationSpec spec;
  spec.stats = feature_statistics(f);
  EXPECT_DOUBLE_EQ(spec.stats->mean[0], 3.0);
  EXPECT_NEAR(spec.stats->std[1], std::sqrt(200.0 / 3.0), 1e-12);
  EXPECT_EQ(ablate_features(f, spec), (MatrixF{{3, 20}, {3, 20}, {3, 20}}));

  spec.mode = AblationMode::shuffled_feature;
  spec.seed = 5;
  const auto sh = ablate_features(f, spec);
  EXPECT_EQ(sh, ablate_features(f, spec));
  std::vector<float> col;
  for (std::size_t i = 0; i < 3; ++i) col.push_back(sh(i, 0));
  std::sort(col.begin(), col.end());
  EXPECT_EQ(col, (std::vector<float>{1, 3, 5}));

  spec.mode = AblationMode::random_feature;
  EXPECT_TRUE(ablate_features(f, spec).all_finite());
  spec.stats.reset();
  EXPECT_THROW(ablate_features(f, spec), Error);

  EXPECT_EQ(parse_ablation_mode("random_weights"), AblationMode::random_weights);
  EXPECT_THROW(parse_ablation_mode("nope"), Error);
}

TEST(Interventions, RandomizeMapperKeepsShapes) {
  const auto p = init_mapper<float>(6, 4, 2, 1);
  const auto q = randomize_mapper(p, 99);
  EXPECT_EQ(q.hyper.n, p.hyper.n);
  ASSERT_EQ(q.weight.size(), p.weight.size());
  EXPECT_EQ(q.weight[0].rows(), p.weight[0].rows());
  EXPECT_NE(q.weight[0], p.weight[0]);
}
