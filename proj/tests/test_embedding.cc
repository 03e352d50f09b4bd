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

#include <algorithm>
#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "neurodissect/dissection.h"
#include "neurodissect/embedding.h"
#include "neurodissect/error.h"
#include "neurodissect/manifest.h"
#include "neurodissect/random.h"
#include "neurodissect/synth.h"
#include "test_util.h"

namespace neurodissect {
namespace {

using testing::TempDir;

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return static_cast<ErrorCode>(-1);
}

TEST(TransE, SingleTripleLossFalls) {
  KnowledgeGraph kg({{"a", "r", "b"}});
  TransEConfig cfg;
  cfg.epochs = 200;
  cfg.dim = 8;
  auto r = train_transe(kg, cfg);
  ASSERT_EQ(r.epoch_mean_loss.size(), 200u);
  EXPECT_LT(r.epoch_mean_loss.back(), r.epoch_mean_loss.front());
}

TEST(TransE, ChainBeatsCorruptedMedian) {
  KnowledgeGraph kg({{"a", "r", "b"}, {"b", "r", "c"}, {"c", "r", "d"}});
  TransEConfig cfg;
  cfg.dim = 16;
  auto r = train_transe(kg, cfg);
  const auto& t = r.table;
  int good = 0;
  for (const auto& tr : kg.indexed()) {
    std::vector<double> corrupted;
    for (std::size_t e = 0; e < t.entity_count(); ++e) {
      if (e != tr.tail) corrupted.push_back(transe_distance(t, tr.head, tr.relation, e));
    }
    std::sort(corrupted.begin(), corrupted.end());
    const double median = corrupted[corrupted.size() / 2];
    good += transe_distance(t, tr.head, tr.relation, tr.tail) < median;
  }
  EXPECT_GE(good * 10, 3 * 8);
}

TEST(TransE, DeterministicAndNormalized) {
  KnowledgeGraph kg({{"a", "r", "b"}, {"b", "s", "c"}, {"a", "s", "c"}});
  TransEConfig cfg;
  cfg.epochs = 50;
  auto x = train_transe(kg, cfg);
  auto y = train_transe(kg, cfg);
  EXPECT_TRUE(x.table == y.table);
  EXPECT_EQ(x.epoch_mean_loss, y.epoch_mean_loss);
  for (std::size_t e = 0; e < x.table.entity_count(); ++e) {
    double n = 0;
    for (float v : x.table.entity(e)) n += static_cast<double>(v) * v;
    EXPECT_NEAR(std::sqrt(n), 1.0, 1e-5);
  }
  cfg.seed = 2;
  EXPECT_FALSE(train_transe(kg, cfg).table == x.table);
}

TEST(TransE, Errors) {
  EXPECT_EQ(code_of([] { train_transe(KnowledgeGraph{}, {}); }),
            ErrorCode::kEmptyGraph);
  TransEConfig bad;
  bad.margin = 0;
  KnowledgeGraph kg({{"a", "r", "b"}});
  EXPECT_EQ(code_of([&] { train_transe(kg, bad); }),
            ErrorCode::kInvalidArgument);
}

TEST(TransE, TableRoundTripsBitExact) {
  KnowledgeGraph kg({{"a", "r", "b"}, {"b", "s", "c"}});
  TransEConfig cfg;
  cfg.epochs = 5;
  cfg.dim = 4;
  auto t = train_transe(kg, cfg).table;
  TempDir dir;
  write_embedding(dir / "e.tsv", t);
  EXPECT_TRUE(read_embedding(dir / "e.tsv") == t);
}

std::vector<double> distance_matrix(const std::vector<std::vector<double>>& pts) {
  const std::size_t n = pts.size();
  std::vector<double> d(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < pts[i].size(); ++k) {
        s += (pts[i][k] - pts[j][k]) * (pts[i][k] - pts[j][k]);
      }
      d[i * n + j] = std::sqrt(s);
    }
  }
  return d;
}

TEST(Pam, SingleMedoidMatchesExhaustiveSearch) {
  Rng rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<std::vector<double>> pts(2 + rng.below(12), std::vector<double>(3));
    for (auto& p : pts) for (auto& x : p) x = rng.normal();
    const auto d = distance_matrix(pts);
    const std::size_t n = pts.size();
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t m = 0; m < n; ++m) {
      double cost = 0;
      for (std::size_t i = 0; i < n; ++i) cost += d[m * n + i];
      if (cost < best) best = cost, arg = m;
    }
    auto r = pam(d, n, 1);
    EXPECT_EQ(r.medoids, std::vector<std::size_t>{arg});
    EXPECT_NEAR(r.cost, best, 1e-9);
  }
}

TEST(Pam, ExactKAndNoImprovingSwap) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 3 + rng.below(12);
    std::vector<std::vector<double>> pts(n, std::vector<double>(2));
    for (auto& p : pts) for (auto& x : p) x = rng.normal();
    const auto d = distance_matrix(pts);
    const std::size_t k = 1 + rng.below(n);
    auto r = pam(d, n, k);
    ASSERT_EQ(r.medoids.size(), k);
    EXPECT_TRUE(std::is_sorted(r.medoids.begin(), r.medoids.end()));
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t i = 0; i < n; ++i) ++sizes[r.assignment[i]];
    for (auto s : sizes) EXPECT_GT(s, 0u);
    for (std::size_t j = 0; j < k; ++j) EXPECT_EQ(r.assignment[r.medoids[j]], j);
    auto cost_of = [&](const std::vector<std::size_t>& meds) {
      double c = 0;
      for (std::size_t i = 0; i < n; ++i) {
        double b = std::numeric_limits<double>::infinity();
        for (auto m : meds) b = std::min(b, d[m * n + i]);
        c += b;
      }
      return c;
    };
    EXPECT_NEAR(r.cost, cost_of(r.medoids), 1e-9);
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t o = 0; o < n; ++o) {
        if (std::count(r.medoids.begin(), r.medoids.end(), o)) continue;
        auto swapped = r.medoids;
        swapped[j] = o;
        EXPECT_GE(cost_of(swapped), r.cost - 1e-9);
      }
    }
  }
  std::vector<double> d(4, 0.0);
  EXPECT_EQ(code_of([&] { pam(d, 2, 3); }), ErrorCode::kKTooLarge);
  EXPECT_EQ(code_of([&] { pam(d, 2, 0); }), ErrorCode::kInvalidArgument);
}

// Concepts 1..2n with hand-placed embeddings, aligned to same-named nodes.
struct PlantedEmbedding {
  EmbeddingTable table;
  ConceptAlignment alignment;
  ConceptSet concepts;
};

PlantedEmbedding planted(const std::vector<std::vector<float>>& vectors) {
  PlantedEmbedding p;
  std::vector<std::string> names;
  std::vector<float> flat;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    names.push_back("c" + std::to_string(i + 1));
    flat.insert(flat.end(), vectors[i].begin(), vectors[i].end());
    p.alignment.by_concept[static_cast<ConceptId>(i + 1)] = {names.back(),
                                                             MatchKind::kExact, 1.0};
    p.concepts.insert(static_cast<ConceptId>(i + 1));
  }
  p.table = EmbeddingTable(static_cast<std::uint32_t>(vectors.front().size()),
                           names, flat, {"r"},
                           std::vector<float>(vectors.front().size(), 0.f));
  return p;
}

TEST(Clustering, PlantedGroupsRecovered) {
  Rng rng(10);
  std::vector<std::vector<float>> v;
  for (int i = 0; i < 12; ++i) {
    const float centre = i < 6 ? -5.f : 5.f;
    v.push_back({centre + static_cast<float>(0.3 * rng.normal()),
                 static_cast<float>(0.3 * rng.normal())});
  }
  auto p = planted(v);
  auto c = cluster_concepts(p.concepts, p.table, p.alignment, 2);
  ASSERT_EQ(c.clusters.size(), 2u);
  std::set<ConceptSet> got(c.clusters.begin(), c.clusters.end());
  std::set<ConceptSet> want = {{1, 2, 3, 4, 5, 6}, {7, 8, 9, 10, 11, 12}};
  EXPECT_EQ(got, want);
  for (std::size_t i = 0; i < c.clusters.size(); ++i) {
    EXPECT_TRUE(c.clusters[i].count(c.representatives[i]));
  }
}

TEST(Clustering, DegenerateKAndErrors) {
  auto p = planted({{0.f}, {1.f}, {3.f}});
  auto id = cluster_concepts(p.concepts, p.table, p.alignment, 3);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(id.clusters[i], ConceptSet{id.representatives[i]});
  }
  EXPECT_EQ(code_of([&] { cluster_concepts(p.concepts, p.table, p.alignment, 4); }),
            ErrorCode::kKTooLarge);
  auto extra = p.concepts;
  extra.insert(9);
  EXPECT_EQ(code_of([&] { cluster_concepts(extra, p.table, p.alignment, 2); }),
            ErrorCode::kUnalignedConcept);
  TempDir dir;
  auto two = cluster_concepts(p.concepts, p.table, p.alignment, 2);
  write_clustering(dir / "c.tsv", two);
  auto back = read_clustering(dir / "c.tsv");
  EXPECT_EQ(back.representative_map(), two.representative_map());
}

ConceptClustering manual(std::vector<ConceptSet> clusters,
                         std::vector<ConceptId> reps) {
  ConceptClustering c;
  c.k = static_cast<std::uint32_t>(clusters.size());
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    for (ConceptId id : clusters[i]) c.cluster_of[id] = i;
  }
  c.clusters = std::move(clusters);
  c.representatives = std::move(reps);
  return c;
}

TEST(ConceptFilter, FusesIdempotentAndShrinks) {
  // 1 = armchair, 2 = chair, 3 = table
  auto c = manual({{1, 2}, {3}}, {2, 3});
  auto f = concept_filter({1, 2, 3}, c);
  EXPECT_EQ(f.filtered, (ConceptSet{2, 3}));
  EXPECT_EQ(f.relabel.at(1), 2u);
  EXPECT_EQ(f.relabel.at(2), 2u);
  EXPECT_EQ(concept_filter(f.filtered, c).filtered, f.filtered);
  auto identity = manual({{1}, {2}, {3}}, {1, 2, 3});
  EXPECT_EQ(concept_filter({1, 2, 3}, identity).filtered, (ConceptSet{1, 2, 3}));
  EXPECT_EQ(code_of([&] { concept_filter({4}, c); }),
            ErrorCode::kUnclusteredConcept);
  auto mask = testing::make_mask(2, 1, 2, {1, 3, 0, 2});
  auto relabelled = relabel_mask(mask, f.relabel);
  EXPECT_EQ(relabelled.data, (std::vector<ConceptId>{2, 3, 0, 2}));
}

TEST(IouGain, Formula) {
  EXPECT_NEAR(iou_gain_percent(0.10, 0.126), 26.0, 1e-9);
  EXPECT_EQ(iou_gain_percent(0.2, 0.2), 0.0);
  EXPECT_EQ(code_of([] { iou_gain_percent(0.0, 0.5); }), ErrorCode::kZeroBaseline);
  EXPECT_DOUBLE_EQ(mean_best_iou(std::vector<double>{0.5, 0.25}), 0.375);
}

// One unit firing on a 2x4 block whose halves are labelled a and b.
TEST(IouGain, HalfMaskMergeIsPositive) {
  TempDir dir;
  testing::TestImage im;
  std::vector<float> act(16, 0.f);
  std::vector<ConceptId> mask(16, 3);
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 4; ++c) {
      act[r * 4 + c] = 1.f + 0.01f * static_cast<float>(r * 4 + c);
      mask[r * 4 + c] = c < 2 ? 1 : 2;
    }
  }
  im.activation = testing::make_volume(1, 4, 4, act);
  im.mask = testing::make_mask(1, 4, 4, mask);
  auto m = load_manifest(testing::build_dataset(dir.path(), {"a", "b", "c"}, {"s"}, {im}));
  UnitThresholds t{{0.5f}, 0.5};
  auto merged = manual({{1, 2}, {3}}, {1, 3});
  auto identity = manual({{1}, {2}, {3}}, {1, 2, 3});
  auto gain = iou_gain(m, t, merged);
  EXPECT_DOUBLE_EQ(gain.baseline, 0.5);
  EXPECT_DOUBLE_EQ(gain.clustered, 1.0);
  EXPECT_GT(gain.gain_percent, 0.0);
  EXPECT_EQ(iou_gain(m, t, identity).gain_percent, 0.0);
}

TEST(IouGain, IdentityClusteringOnSynthIsExactlyZero) {
  TempDir dir;
  auto s = write_synth_dataset(dir.path(), SynthConfig{});
  auto m = load_manifest(s.manifest);
  auto kg = read_knowledge_graph(s.knowledge_graph);
  auto alignment = align_concepts(m.concept_vocab, kg);
  ConceptSet concepts;
  for (const auto& [c, node] : alignment.by_concept) concepts.insert(c);
  TransEConfig cfg;
  cfg.epochs = 20;
  auto table = train_transe(kg, cfg).table;
  auto clustering = cluster_concepts(concepts, table, alignment,
                                     static_cast<std::uint32_t>(concepts.size()));
  EXPECT_EQ(iou_gain(m, compute_thresholds(m), clustering).gain_percent, 0.0);
}

}  // namespace
}  // namespace neurodissect
