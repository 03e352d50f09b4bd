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

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Tolerances and time budgets are fixed below.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "neurodissect/dissection.h"
#include "neurodissect/embedding.h"
#include "neurodissect/error.h"
#include "neurodissect/explanation.h"
#include "neurodissect/io.h"
#include "neurodissect/knowledge.h"
#include "neurodissect/manifest.h"
#include "neurodissect/manipulation.h"
#include "neurodissect/random.h"
#include "neurodissect/synth.h"
#include "pipeline_util.h"
#include "test_util.h"

namespace neurodissect {
namespace {

constexpr double kIdentityTolerance = 1e-12;  // CM + DM vs |LC|/|CC|
constexpr double kUpsampleTolerance = 1e-6;
constexpr double kGainTolerance = 1e-9;
constexpr double kMetricBudgetSeconds = 1.0;
constexpr double kTransEBudgetSeconds = 10.0;
constexpr double kSvmBudgetSeconds = 5.0;
constexpr double kTransEBeatMedianShare = 0.8;
constexpr double kSvmMinAccuracy = 0.95;

using testing::TempDir;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  // Records a failed check; the first message wins the detail column.
  void require(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail.str("");
      detail << what;
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

ConceptSet random_set(Rng& rng, ConceptId universe) {
  const double p = rng.uniform();
  ConceptSet s;
  for (ConceptId c = 1; c <= universe; ++c) {
    if (rng.bernoulli(p)) s.insert(c);
  }
  return s;
}

void metric_identities(Outcome& o) {
  Rng rng(101);
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 1000; ++i) {
    auto lc = random_set(rng, 20);
    auto cc = random_set(rng, 20);
    if (cc.empty()) cc.insert(1 + static_cast<ConceptId>(rng.below(20)));
    const double n = static_cast<double>(cc.size());
    const double cm = consistency_metric(lc, cc);
    const double sm = similarity_metric(lc, cc);
    const double dm = difference_metric(lc, cc);
    // The counts behind CM and DM add up exactly; the doubles to rounding.
    const auto inside = static_cast<std::size_t>(std::llround(cm * n));
    const auto outside = static_cast<std::size_t>(std::llround(dm * n));
    o.require(inside + outside == lc.size(), "count identity");
    o.require(std::abs(cm + dm - lc.size() / n) <= kIdentityTolerance,
              "CM+DM != |LC|/|CC|");
    o.require(sm <= cm, "SM > CM");
    auto grown = lc;
    for (ConceptId c : cc) {
      if (rng.coin()) grown.insert(c);
    }
    o.require(consistency_metric(grown, cc) >= cm, "CM not monotone");
    o.require(similarity_metric(grown, cc) >= sm, "SM not monotone");
    o.require(difference_metric(grown, cc) == dm, "DM moved");
  }
  const double t = seconds_since(start);
  o.require(t < kMetricBudgetSeconds, "over time budget");
  o.detail << " 1000 pairs in " << t << " s";
}

void iou_oracle(Outcome& o) {
  Rng rng(102);
  for (int trial = 0; trial < 500; ++trial) {
    PixelSet a(8, 8);
    PixelSet b(8, 8);
    const double pa = rng.uniform();
    const double pb = rng.uniform();
    for (auto& x : a.bits) x = rng.bernoulli(pa);
    for (auto& x : b.bits) x = rng.bernoulli(pb);
    int inter = 0;
    int uni = 0;
    for (int i = 0; i < 64; ++i) {
      inter += a.bits[i] && b.bits[i];
      uni += a.bits[i] || b.bits[i];
    }
    const double expect = uni == 0 ? 0.0 : static_cast<double>(inter) / uni;
    o.require(iou(a, b) == expect, "IoU differs from pixel loop");
  }
  o.detail << " 500 pairs";
}

void upsampling(Outcome& o) {
  std::vector<float> flat(15, 0.7f);
  double dev = 0.0;
  for (float v : upsample_bilinear(flat, 3, 5, 13, 17)) {
    dev = std::max(dev, std::abs(static_cast<double>(v) - 0.7f));
  }
  o.require(dev < kUpsampleTolerance, "constant map drifted");
  std::vector<float> two = {0.f, 1.f};
  const auto up = upsample_bilinear(two, 1, 2, 1, 4);
  const double want[] = {0.0, 1.0 / 3, 2.0 / 3, 1.0};
  double err = 0.0;
  for (int i = 0; i < 4; ++i) err = std::max(err, std::abs(up[i] - want[i]));
  o.require(err < kUpsampleTolerance, "1x2 -> 1x4 mismatch");
  o.detail << " const dev " << dev << ", 1x4 err " << err;
}

void strategy_nesting(Outcome& o) {
  Rng rng(103);
  for (int trial = 0; trial < 200; ++trial) {
    NeuronConceptScores s;
    s.per_unit.resize(1 + rng.below(8));
    for (auto& u : s.per_unit) {
      for (ConceptId c = 1; c <= 10; ++c) {
        if (rng.coin()) u[c] = rng.bernoulli(0.3) ? 0.0 : rng.uniform();
      }
      u[1 + static_cast<ConceptId>(rng.below(10))] = 0.01 + rng.uniform();
    }
    auto hi = select_learned_concepts(s, SelectionStrategy::kHighestIoU);
    auto mm = select_learned_concepts(s, SelectionStrategy::kMinMaxThreshold);
    auto wl = select_learned_concepts(s, SelectionStrategy::kWholeLayer);
    for (std::size_t t = 0; t < s.per_unit.size(); ++t) {
      o.require(is_subset(hi.per_unit[t], mm.per_unit[t]), "highest not in minmax");
      o.require(is_subset(mm.per_unit[t], wl.per_unit[t]), "minmax not in whole");
    }
  }
  o.detail << " 200 tables";
}

struct SynthFixture {
  TempDir dir;
  SynthSummary summary;
  DatasetManifest manifest;
  KnowledgeGraph kg;
  ConceptAlignment alignment;
  std::vector<SceneCoverage> coverage;
  std::vector<ConceptSet> related;

  SynthFixture() {
    summary = write_synth_dataset(dir.path(), SynthConfig{});
    manifest = load_manifest(summary.manifest);
    kg = read_knowledge_graph(summary.knowledge_graph);
    alignment = align_concepts(manifest.concept_vocab, kg);
    coverage = scene_coverage(manifest);
    for (const auto& s : manifest.scene_vocab.entries()) {
      related.push_back(related_concepts(s.name, kg, alignment));
    }
  }
};

void icc_fixture(const SynthFixture& f, Outcome& o) {
  auto r = icc(f.coverage, f.related, 2);
  o.require(r.sets.size() == 3, "expected 3 scenes");
  for (std::size_t i = 0; i < r.sets.size(); ++i) {
    const auto ids = r.sets[i].ids();
    o.require(ids.count(f.summary.plants[r.scenes[i]].identifier) > 0,
              "identifier missing");
    for (std::size_t j = i + 1; j < r.sets.size(); ++j) {
      o.require(ids != r.sets[j].ids(), "sets not distinct");
    }
  }
  std::vector<ConceptSet> above;
  for (std::size_t i = 0; i < r.scenes.size(); ++i) {
    above.push_back(scount_set(f.coverage[r.scenes[i]], r.pools[i],
                               r.parameters.p_sc + kDefaultGridStep));
  }
  bool distinct = true;
  for (std::size_t i = 0; i < above.size(); ++i) {
    for (std::size_t j = i + 1; j < above.size(); ++j) {
      distinct = distinct && above[i] != above[j];
    }
  }
  o.require(!distinct, "still distinct above P_sc");
  o.detail << " P_c " << r.parameters.p_c << ", P_sc " << r.parameters.p_sc;
}

void scc_fixture(const SynthFixture& f, Outcome& o) {
  const auto& m = f.manifest;
  for (SceneId s = 0; s < m.scene_vocab.size(); ++s) {
    ConceptSet present;
    for (std::size_t i = 0; i < m.images.size(); ++i) {
      if (m.images[i].scene_id == s) {
        present.insert(m.image_concepts[i].begin(), m.image_concepts[i].end());
      }
    }
    ConceptSet expect;
    for (ConceptId c : f.related[s]) {
      if (present.count(c)) expect.insert(c);
    }
    o.require(scc(s, f.related[s], f.coverage[s]).ids() == expect,
              "SCC differs from RC & C_y");
  }
  o.detail << " " << m.scene_vocab.size() << " scenes";
}

KnowledgeGraph desk_graph() {
  return KnowledgeGraph({
      {"bed", "AtLocation", "bedroom"},     {"pillow", "AtLocation", "bedroom"},
      {"wardrobe", "AtLocation", "bedroom"}, {"stove", "AtLocation", "kitchen"},
      {"sink", "AtLocation", "kitchen"},     {"fridge", "AtLocation", "kitchen"},
      {"bathtub", "AtLocation", "bathroom"}, {"toilet", "AtLocation", "bathroom"},
      {"towel", "AtLocation", "bathroom"},   {"desk", "AtLocation", "office"},
      {"monitor", "AtLocation", "office"},   {"printer", "AtLocation", "office"},
      {"bulb", "PartOf", "lamp"},            {"burner", "PartOf", "stove"},
      {"drawer", "PartOf", "desk"},          {"faucet", "PartOf", "sink"},
      {"lamp", "UsedFor", "light"},          {"stove", "UsedFor", "cooking"},
      {"bed", "UsedFor", "sleeping"},        {"desk", "UsedFor", "working"},
  });
}

void transe_desk(Outcome& o) {
  const auto kg = desk_graph();
  o.require(kg.triples().size() == 20, "graph is not 20 triples");
  TransEConfig cfg;
  const auto start = std::chrono::steady_clock::now();
  const auto a = train_transe(kg, cfg);
  const double t = seconds_since(start);
  const auto b = train_transe(kg, cfg);
  o.require(a.epoch_mean_loss.back() < a.epoch_mean_loss.front(),
            "loss did not fall");
  std::size_t good = 0;
  for (const auto& tr : kg.indexed()) {
    std::vector<double> corrupted;
    for (std::size_t e = 0; e < a.table.entity_count(); ++e) {
      if (e != tr.tail) {
        corrupted.push_back(transe_distance(a.table, tr.head, tr.relation, e));
      }
    }
    std::sort(corrupted.begin(), corrupted.end());
    const double median = corrupted[corrupted.size() / 2];
    good += transe_distance(a.table, tr.head, tr.relation, tr.tail) < median;
  }
  const double share = static_cast<double>(good) / kg.indexed().size();
  o.require(share >= kTransEBeatMedianShare, "too few triples beat median");
  o.require(a.table == b.table && a.epoch_mean_loss == b.epoch_mean_loss,
            "not bit-identical");
  o.require(t < kTransEBudgetSeconds, "over time budget");
  o.detail << " loss " << a.epoch_mean_loss.front() << " -> "
           << a.epoch_mean_loss.back() << ", beat median " << share << ", "
           << t << " s";
}

std::vector<double> distances(const std::vector<std::vector<double>>& pts) {
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

void clustering(const SynthFixture& f, Outcome& o) {
  Rng rng(104);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng.below(12);
    std::vector<std::vector<double>> pts(n, std::vector<double>(3));
    for (auto& p : pts) {
      for (auto& x : p) x = rng.normal();
    }
    const auto d = distances(pts);
    const std::size_t k = 1 + rng.below(n);
    auto r = pam(d, n, k);
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t i = 0; i < n; ++i) ++sizes[r.assignment[i]];
    o.require(r.medoids.size() == k &&
                  std::count(sizes.begin(), sizes.end(), 0u) == 0,
              "not exactly k non-empty clusters");
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t m = 0; m < n; ++m) {
      double cost = 0;
      for (std::size_t i = 0; i < n; ++i) cost += d[m * n + i];
      if (cost < best) best = cost, arg = m;
    }
    o.require(pam(d, n, 1).medoids == std::vector<std::size_t>{arg},
              "k=1 medoid differs from exhaustive search");
  }

  // Two planted groups far apart.
  std::vector<std::string> names;
  std::vector<float> flat;
  ConceptAlignment alignment;
  ConceptSet concepts;
  for (int i = 0; i < 12; ++i) {
    names.push_back("c" + std::to_string(i + 1));
    flat.push_back((i < 6 ? -5.f : 5.f) + static_cast<float>(0.3 * rng.normal()));
    flat.push_back(static_cast<float>(0.3 * rng.normal()));
    const auto id = static_cast<ConceptId>(i + 1);
    alignment.by_concept[id] = {names.back(), MatchKind::kExact, 1.0};
    concepts.insert(id);
  }
  EmbeddingTable table(2, names, flat, {"r"}, {0.f, 0.f});
  auto planted = cluster_concepts(concepts, table, alignment, 2);
  std::set<ConceptSet> got(planted.clusters.begin(), planted.clusters.end());
  o.require(got == std::set<ConceptSet>{{1, 2, 3, 4, 5, 6},
                                        {7, 8, 9, 10, 11, 12}},
            "planted groups not recovered");

  // Identity clustering of every aligned synth concept.
  ConceptSet aligned;
  for (const auto& [c, node] : f.alignment.by_concept) aligned.insert(c);
  TransEConfig cfg;
  cfg.epochs = 20;
  auto synth_table = train_transe(f.kg, cfg).table;
  auto identity = cluster_concepts(aligned, synth_table, f.alignment,
                                   static_cast<std::uint32_t>(aligned.size()));
  const auto thresholds = compute_thresholds(f.manifest);
  const double identity_gain =
      iou_gain(f.manifest, thresholds, identity).gain_percent;
  o.require(identity_gain == 0.0, "identity clustering changed IoU");

  // One unit over a 2x4 block whose halves carry two concepts.
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
  auto m = load_manifest(
      testing::build_dataset(dir.path(), {"a", "b", "c"}, {"s"}, {im}));
  const auto merged =
      iou_gain(m, UnitThresholds{{0.5f}, 0.5}, manual({{1, 2}, {3}}, {1, 3}));
  o.require(merged.gain_percent > 0.0, "half-mask merge gain not positive");

  const double formula = iou_gain_percent(0.10, 0.126);
  o.require(std::abs(formula - 26.0) <= kGainTolerance, "gain formula");
  o.detail << " identity gain " << identity_gain << ", merge gain "
           << merged.gain_percent << ", formula " << formula;
}

void ablation(const SynthFixture& f, const std::filesystem::path& run,
              Outcome& o) {
  const auto features = all_features(f.manifest);
  const auto& head = f.manifest.head;
  const auto none = ablated_logits(head, features, {});
  for (std::size_t i = 0; i < features.size(); ++i) {
    o.require(none[i] == head.logits(features[i]), "empty set changed logits");
  }
  std::set<UnitIndex> all;
  for (UnitIndex u = 0; u < head.num_units; ++u) all.insert(u);
  std::vector<SceneId> targets;
  for (const auto& img : f.manifest.images) targets.push_back(img.scene_id);
  const auto zeroed = ablate(head, features, targets, all);
  std::vector<double> bias(head.bias.begin(), head.bias.end());
  const auto fallback = static_cast<SceneId>(argmax(bias));
  for (SceneId p : zeroed.predictions_after) {
    o.require(p == fallback, "all-disabled prediction is not argmax(bias)");
  }

  // Per-scene rows written by the ablate stage for k = 1.
  int positive = 0, negative = 0;
  for (const auto& line : read_lines(run / "ablate/ablation_by_scene.tsv")) {
    auto fields = split_fields(line);
    if (fields[0] == "scene_id" || fields[1] != "1") continue;
    const double before = parse_double(fields[4]);
    const double after = parse_double(fields[5]);
    if (fields[2] == "positive") {
      ++positive;
      o.require(after < before, "top positive unit did not hurt its scene");
    } else if (fields[2] == "negative") {
      ++negative;
      o.require(after >= before, "most negative unit hurt its scene");
    }
  }
  const auto scenes = static_cast<int>(f.manifest.scene_vocab.size());
  o.require(positive == scenes && negative == scenes, "missing scene rows");
  o.detail << " " << positive << " scenes per direction";
}

void contribution_hand_case(Outcome& o) {
  std::map<ImageId, std::vector<ConceptSet>> lc = {{1, {{1, 2}}}, {2, {{1}}}};
  UnitConceptsFn fn = [&](ImageId id) -> const std::vector<ConceptSet>& {
    return lc.at(id);
  };
  std::vector<PredictionRecord> images = {{1, 0, 0}, {2, 0, 0}};
  const double score = contribution_scores(0, images, {1}, fn, 1).scores[0];
  o.require(score == 1.0, "score is not 1");
  o.detail << " score " << score;
}

void pe_svm(Outcome& o) {
  Rng rng(105);
  std::vector<std::vector<double>> x;
  std::vector<SceneId> y;
  for (int i = 0; i < 300; ++i) {
    const auto label = static_cast<SceneId>(i % 3);
    std::vector<double> row(20);
    for (auto& v : row) v = rng.normal();
    row[label] += 4.0;
    x.push_back(row);
    y.push_back(label);
  }
  const auto start = std::chrono::steady_clock::now();
  const auto r = train_pe_svm(x, y, 3, SvmConfig{});
  const double t = seconds_since(start);
  const double acc = accuracy(r.model, x, y);
  o.require(acc >= kSvmMinAccuracy, "training accuracy too low");
  for (const auto& seq : r.objective) {
    for (std::size_t e = 1; e < seq.size(); ++e) {
      o.require(seq[e] <= seq[e - 1], "objective increased");
    }
  }
  o.require(t < kSvmBudgetSeconds, "over time budget");
  o.detail << " accuracy " << acc << " in " << t << " s";
}

void determinism(const std::filesystem::path& first, int first_code,
                 Outcome& o) {
  TempDir again;
  o.require(first_code == 0, "first pipeline run failed");
  o.require(testing::run_pipeline(again.path(), "4") == 0,
            "second pipeline run failed");
  const auto a = testing::read_tree(first);
  const auto b = testing::read_tree(again.path());
  o.require(a == b, "report trees differ");
  o.detail << " " << a.size() << " files";
}

}  // namespace
}  // namespace neurodissect

int main() {
  using namespace neurodissect;
  int failures = 0;
  auto report = [&](const std::string& name, const std::function<void(Outcome&)>& fn) {
    Outcome o;
    try {
      fn(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail.str("");
      o.detail << " threw: " << e.what();
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ":"
              << (o.pass ? "" : " ") << o.detail.str() << "\n";
  };

  SynthFixture fixture;
  testing::TempDir run;
  const int run_code = testing::run_pipeline(run.path());

  report("metric identities", metric_identities);
  report("IoU oracle", iou_oracle);
  report("bilinear upsampling", upsampling);
  report("strategy nesting", strategy_nesting);
  report("ICC on planted fixture", [&](Outcome& o) { icc_fixture(fixture, o); });
  report("SCC oracle", [&](Outcome& o) { scc_fixture(fixture, o); });
  report("TransE desk graph", transe_desk);
  report("clustering", [&](Outcome& o) { clustering(fixture, o); });
  report("ablation", [&](Outcome& o) {
    o.require(run_code == 0, "pipeline failed");
    ablation(fixture, run.path(), o);
  });
  report("contribution hand case", contribution_hand_case);
  report("PE-SVM", pe_svm);
  report("end-to-end determinism",
         [&](Outcome& o) { determinism(run.path(), run_code, o); });

  std::cout << (failures == 0 ? "ALL PASS" : "FAILURES: " + std::to_string(failures))
            << "\n";
  return failures == 0 ? 0 : 1;
}
