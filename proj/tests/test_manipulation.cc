// Copyright 2026 The NeuroDissect Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <chrono>
#include <map>

#include <gtest/gtest.h>

#include "neurodissect/error.h"
#include "neurodissect/manipulation.h"
#include "neurodissect/random.h"
#include "test_util.h"

namespace neurodissect {
namespace {

struct UnitFixture {
  std::map<ImageId, std::vector<ConceptSet>> lc;
  UnitConceptsFn fn() const {
    return [this](ImageId id) -> const std::vector<ConceptSet>& {
      return lc.at(id);
    };
  }
};

TEST(Contribution, TwoImageHandCase) {
  UnitFixture f;
  f.lc[1] = {{1, 2}};
  f.lc[2] = {{1}};
  std::vector<PredictionRecord> recs = {{1, 0, 0}, {2, 0, 0}};
  auto c = contribution_scores(0, recs, {1}, f.fn(), 1);
  EXPECT_EQ(c.scores[0], 1.0);
}

TEST(Contribution, SignsAndRanking) {
  UnitFixture f;
  // unit 0: subset of CC, unit 1: disjoint, unit 2: empty
  f.lc[1] = {{1, 2}, {7}, {}};
  f.lc[2] = {{1}, {8, 9}, {}};
  f.lc[3] = {{1, 2}, {7}, {}};  // misclassified, ignored
  std::vector<PredictionRecord> recs = {{1, 0, 0}, {2, 0, 0}, {3, 0, 1}};
  auto c = contribution_scores(0, recs, {1, 2}, f.fn(), 3);
  EXPECT_EQ(c.scores[0], 3.0);
  EXPECT_EQ(c.scores[1], -3.0);
  EXPECT_EQ(c.scores[2], 0.0);
  EXPECT_EQ(c.ranking, (std::vector<UnitIndex>{0, 2, 1}));
  EXPECT_EQ(top_units(c, 1, Direction::kPositive), (std::vector<UnitIndex>{0}));
  EXPECT_EQ(top_units(c, 2, Direction::kNegative),
            (std::vector<UnitIndex>{1, 2}));
  EXPECT_EQ(top_units(c, 10, Direction::kPositive).size(), 3u);
}

TEST(Contribution, NoTruePredictions) {
  UnitFixture f;
  f.lc[1] = {{1}};
  std::vector<PredictionRecord> recs = {{1, 0, 1}};
  try {
    contribution_scores(0, recs, {1}, f.fn(), 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNoTruePredictions);
  }
}

TEST(Contribution, AdditiveOverDisjointSubsets) {
  Rng rng(5);
  UnitFixture f;
  std::vector<PredictionRecord> all;
  for (ImageId i = 0; i < 20; ++i) {
    std::vector<ConceptSet> units(4);
    for (auto& u : units) {
      for (ConceptId c = 1; c <= 8; ++c) {
        if (rng.coin()) u.insert(c);
      }
    }
    f.lc[i] = units;
    all.push_back({i, 0, 0});
  }
  const ConceptSet cc = {1, 3, 5};
  auto whole = contribution_scores(0, all, cc, f.fn(), 4);
  std::span<const PredictionRecord> s(all);
  auto a = contribution_scores(0, s.first(7), cc, f.fn(), 4);
  auto b = contribution_scores(0, s.subspan(7), cc, f.fn(), 4);
  for (int t = 0; t < 4; ++t) EXPECT_EQ(whole.scores[t], a.scores[t] + b.scores[t]);
}

TEST(Direction, Names) {
  EXPECT_EQ(parse_direction("positive"), Direction::kPositive);
  EXPECT_EQ(parse_direction(direction_name(Direction::kNegative)),
            Direction::kNegative);
  EXPECT_FALSE(parse_direction("sideways").has_value());
}

LinearHead random_head(Rng& rng, std::uint32_t classes, std::uint32_t units) {
  LinearHead h;
  h.num_classes = classes;
  h.num_units = units;
  for (std::uint32_t i = 0; i < classes * units; ++i) {
    h.weights.push_back(static_cast<float>(rng.normal()));
  }
  for (std::uint32_t i = 0; i < classes; ++i) {
    h.bias.push_back(static_cast<float>(rng.normal()));
  }
  return h;
}

std::vector<std::vector<float>> random_features(Rng& rng, std::size_t n,
                                                std::uint32_t units) {
  std::vector<std::vector<float>> out(n, std::vector<float>(units));
  for (auto& row : out) {
    for (auto& v : row) v = static_cast<float>(rng.uniform());
  }
  return out;
}

TEST(Ablation, EmptyIsIdentity) {
  Rng rng(1);
  auto head = random_head(rng, 4, 10);
  auto feats = random_features(rng, 30, 10);
  auto logits = ablated_logits(head, feats, {});
  for (std::size_t i = 0; i < feats.size(); ++i) {
    EXPECT_EQ(logits[i], head.logits(feats[i]));
  }
  std::vector<SceneId> targets(30, 0);
  auto r = ablate(head, feats, targets, {});
  EXPECT_EQ(r.accuracy_before, r.accuracy_after);
  EXPECT_EQ(r.predictions_before, r.predictions_after);
}

TEST(Ablation, AllUnitsPredictBiasArgmax) {
  Rng rng(2);
  auto head = random_head(rng, 5, 8);
  auto feats = random_features(rng, 20, 8);
  std::set<UnitIndex> all;
  for (UnitIndex u = 0; u < 8; ++u) all.insert(u);
  std::vector<SceneId> targets(20, 1);
  auto r = ablate(head, feats, targets, all);
  std::vector<double> bias(head.bias.begin(), head.bias.end());
  const auto expected = static_cast<SceneId>(argmax(bias));
  for (SceneId p : r.predictions_after) EXPECT_EQ(p, expected);
}

TEST(Ablation, PlantedUnitDropsSceneToChance) {
  // Unit 0 alone separates scene 0; with it gone every image ties and
  // resolves to scene 0's competitor through the bias.
  LinearHead head;
  head.num_classes = 2;
  head.num_units = 2;
  head.weights = {4.0f, 0.0f, 0.0f, 1.0f};
  head.bias = {0.0f, 0.5f};
  std::vector<std::vector<float>> feats = {{1, 0}, {1, 0.2f}, {0, 1}, {0, 2}};
  std::vector<SceneId> targets = {0, 0, 1, 1};
  auto r = ablate(head, feats, targets, {0});
  EXPECT_EQ(r.accuracy_before, 1.0);
  EXPECT_EQ(r.accuracy_after, 0.5);
  EXPECT_EQ(r.predictions_after[0], 1u);
  EXPECT_EQ(r.predictions_after[1], 1u);
}

TEST(Ablation, MasksCompose) {
  Rng rng(3);
  auto head = random_head(rng, 3, 12);
  auto feats = random_features(rng, 10, 12);
  std::set<UnitIndex> s1 = {1, 4};
  std::set<UnitIndex> s2 = {1, 4, 7, 9};
  auto zeroed = feats;
  for (auto& row : zeroed) {
    for (UnitIndex u : s1) row[u] = 0.0f;
  }
  EXPECT_EQ(ablated_logits(head, feats, s2), ablated_logits(head, zeroed, s2));
}

TEST(Ablation, Errors) {
  Rng rng(4);
  auto head = random_head(rng, 2, 3);
  auto feats = random_features(rng, 2, 3);
  std::vector<SceneId> targets = {0, 1};
  try {
    ablate(head, feats, targets, {3});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnitOutOfRange);
  }
  try {
    ablate(head, {}, {}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptySet);
  }
}

TEST(Mrr, HandCases) {
  // Scene 0 wins every metric.
  std::vector<ExplanationScores> top = {{0, 0, 0.9, 0.9, 0.1},
                                        {0, 1, 0.5, 0.5, 0.5},
                                        {0, 2, 0.1, 0.1, 0.9}};
  auto m = mrr_feature(top);
  EXPECT_DOUBLE_EQ(m[0], 1.0);
  EXPECT_DOUBLE_EQ(m[1], 0.5);
  // Scene 0 ranked 1 by CM, 3 by SM, 2 by DM.
  std::vector<ExplanationScores> mixed = {{0, 0, 0.9, 0.1, 0.5},
                                          {0, 1, 0.5, 0.9, 0.1},
                                          {0, 2, 0.1, 0.5, 0.9}};
  EXPECT_NEAR(mrr_feature(mixed)[0], (1.0 + 1.0 / 3 + 0.5) / 3, 1e-15);
  EXPECT_NEAR(mrr_feature(mixed)[0], 0.6111, 1e-4);
  // Ties go to the lowest scene.
  std::vector<ExplanationScores> tied = {{0, 0, 0.5, 0.5, 0.5},
                                         {0, 1, 0.5, 0.5, 0.5}};
  auto t = mrr_feature(tied);
  EXPECT_EQ(t[0], 1.0);
  EXPECT_EQ(t[1], 0.5);
}

TEST(PeFeatures, LayoutAndLength) {
  std::vector<ConceptSet> core = {{1, 2}, {3}, {4, 5, 6}};
  std::vector<float> hidden = {0.5f, 1.5f};
  auto x = pe_features(9, {1, 3}, core, hidden);
  ASSERT_EQ(x.size(), 3u * 3 + 3 + 2);
  EXPECT_DOUBLE_EQ(x[0], 0.5);  // cm vs scene 0
  EXPECT_DOUBLE_EQ(x[3], 1.0);  // cm vs scene 1
  EXPECT_DOUBLE_EQ(x[12], 0.5);
  EXPECT_DOUBLE_EQ(x[13], 1.5);
  for (int s = 0; s < 3; ++s) {
    EXPECT_GT(x[9 + s], 0.0);
    EXPECT_LE(x[9 + s], 1.0);
  }
}

void separable(Rng& rng, std::size_t n, std::vector<std::vector<double>>& x,
               std::vector<SceneId>& y) {
  for (std::size_t i = 0; i < n; ++i) {
    const SceneId label = static_cast<SceneId>(i % 2);
    const double shift = label == 0 ? -2.0 : 2.0;
    x.push_back({shift + 0.5 * rng.normal(), rng.normal(), 1.0});
    y.push_back(label);
  }
}

TEST(Svm, SeparableReachesHighAccuracy) {
  Rng rng(11);
  std::vector<std::vector<double>> x;
  std::vector<SceneId> y;
  separable(rng, 200, x, y);
  auto r = train_pe_svm(x, y, 2, {});
  EXPECT_GE(accuracy(r.model, x, y), 0.95);
  ASSERT_EQ(r.objective.size(), 2u);
  for (const auto& seq : r.objective) {
    ASSERT_EQ(seq.size(), 201u);
    for (std::size_t e = 1; e < seq.size(); ++e) EXPECT_LE(seq[e], seq[e - 1]);
    EXPECT_LT(seq.back(), seq.front());
  }
  // The constant column is tolerated with a warning.
  ASSERT_FALSE(r.warnings.empty());
  EXPECT_NE(r.warnings[0].find("DegenerateFeatures"), std::string::npos);
}

TEST(Svm, ConflictingDuplicates) {
  std::vector<std::vector<double>> x = {{1.0, 2.0}, {1.0, 2.0}, {-1.0, 0.0}};
  std::vector<SceneId> y = {0, 1, 1};
  auto r = train_pe_svm(x, y, 2, {});
  EXPECT_LT(accuracy(r.model, x, y), 1.0);
}

TEST(Svm, Errors) {
  std::vector<std::vector<double>> x = {{1.0}, {2.0}};
  std::vector<SceneId> same = {1, 1};
  try {
    train_pe_svm(x, same, 2, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSingleClass);
  }
  std::vector<std::vector<double>> ragged = {{1.0}, {2.0, 3.0}};
  std::vector<SceneId> y = {0, 1};
  EXPECT_THROW(train_pe_svm(ragged, y, 2, {}), Error);
  EXPECT_THROW(train_pe_svm(x, std::vector<SceneId>{0}, 2, {}), Error);
}

TEST(Svm, DeterministicAndRoundTrips) {
  Rng rng(12);
  std::vector<std::vector<double>> x;
  std::vector<SceneId> y;
  separable(rng, 60, x, y);
  SvmConfig cfg;
  cfg.epochs = 50;
  auto a = train_pe_svm(x, y, 2, cfg);
  auto b = train_pe_svm(x, y, 2, cfg);
  EXPECT_EQ(a.model.weights, b.model.weights);
  EXPECT_EQ(a.model.bias, b.model.bias);
  testing::TempDir dir;
  write_svm_model(dir / "m.tsv", a.model);
  auto back = read_svm_model(dir / "m.tsv");
  EXPECT_EQ(back.weights, a.model.weights);
  EXPECT_EQ(back.bias, a.model.bias);
  EXPECT_EQ(back.mean, a.model.mean);
  EXPECT_EQ(back.stddev, a.model.stddev);
  for (const auto& row : x) EXPECT_EQ(back.predict(row), a.model.predict(row));
}

}  // namespace
}  // namespace neurodissect
