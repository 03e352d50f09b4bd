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

#include <cmath>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "neurodissect/dissection.h"
#include "neurodissect/embedding.h"
#include "neurodissect/knowledge.h"
#include "neurodissect/random.h"

namespace neurodissect {
namespace {

// One image with U units on a 7x7 grid against a 112x112 mask.
void BM_ScoreImage(benchmark::State& state) {
  const auto units = static_cast<std::uint32_t>(state.range(0));
  Rng rng(1);
  ActivationVolume v;
  v.units = units;
  v.height = 7;
  v.width = 7;
  v.data.resize(static_cast<std::size_t>(units) * 49);
  for (auto& x : v.data) x = static_cast<float>(rng.uniform());
  SegmentationMask m;
  m.planes = 1;
  m.height = 112;
  m.width = 112;
  m.data.resize(112 * 112);
  ConceptSet concepts;
  for (auto& c : m.data) {
    c = 1 + static_cast<ConceptId>(rng.below(20));
    concepts.insert(c);
  }
  UnitThresholds t;
  t.thresholds.assign(units, 0.9f);
  for (auto _ : state) {
    benchmark::DoNotOptimize(score_image(1, v, m, t, concepts));
  }
  state.SetItemsProcessed(state.iterations() * units);
}
BENCHMARK(BM_ScoreImage)->Arg(16)->Arg(128)->Arg(512);

void BM_Iou(benchmark::State& state) {
  Rng rng(2);
  PixelSet a(224, 224);
  PixelSet b(224, 224);
  for (auto& x : a.bits) x = rng.coin();
  for (auto& x : b.bits) x = rng.coin();
  for (auto _ : state) benchmark::DoNotOptimize(iou(a, b));
}
BENCHMARK(BM_Iou);

KnowledgeGraph random_graph(std::size_t entities, std::size_t triples) {
  Rng rng(3);
  std::vector<Triple> out;
  for (std::size_t i = 0; i < triples; ++i) {
    out.push_back({"e" + std::to_string(rng.below(entities)),
                   "r" + std::to_string(rng.below(4)),
                   "e" + std::to_string(rng.below(entities))});
  }
  return KnowledgeGraph(std::move(out));
}

// A single training epoch over a 1000-triple graph.
void BM_TransEEpoch(benchmark::State& state) {
  const auto kg = random_graph(300, 1000);
  TransEConfig cfg;
  cfg.epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(train_transe(kg, cfg));
}
BENCHMARK(BM_TransEEpoch)->Unit(benchmark::kMillisecond);

void BM_Pam(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(4);
  std::vector<double> pts(n * 2);
  for (auto& x : pts) x = rng.normal();
  std::vector<double> d(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      d[i * n + j] = std::hypot(pts[2 * i] - pts[2 * j], pts[2 * i + 1] - pts[2 * j + 1]);
    }
  }
  for (auto _ : state) benchmark::DoNotOptimize(pam(d, n, 8));
}
BENCHMARK(BM_Pam)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace neurodissect

BENCHMARK_MAIN();
