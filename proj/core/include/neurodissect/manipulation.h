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

#ifndef NEURODISSECT_MANIPULATION_H_
#define NEURODISSECT_MANIPULATION_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "neurodissect/concept_set.h"
#include "neurodissect/explanation.h"
#include "neurodissect/types.h"

namespace neurodissect {

struct NeuronContribution {
  SceneId scene_id = 0;
  std::vector<double> scores;      // per unit
  std::vector<UnitIndex> ranking;  // descending score, lowest unit on ties
};

// Per-unit learned concepts of one image.
using UnitConceptsFn = std::function<const std::vector<ConceptSet>&(ImageId)>;

// Con_Score(t) = sum over correctly predicted images of `scene` of
// |LC_t & CC| - |LC_t \ CC|, where LC_t is unit t's own learned-concept set.
// Throws kNoTruePredictions.
NeuronContribution contribution_scores(SceneId scene,
                                       std::span<const PredictionRecord> images,
                                       const ConceptSet& core,
                                       const UnitConceptsFn& unit_concepts,
                                       std::uint32_t units);

enum class Direction { kPositive, kNegative };

std::string_view direction_name(Direction direction);
std::optional<Direction> parse_direction(std::string_view name);

// The k most positive units (head of the ranking) or the k most negative
// (tail of the ranking, most negative first).
std::vector<UnitIndex> top_units(const NeuronContribution& contribution,
                                 std::size_t k, Direction direction);

struct AblationResult {
  std::set<UnitIndex> disabled;
  double accuracy_before = 0.0;
  double accuracy_after = 0.0;
  std::vector<SceneId> predictions_before;
  std::vector<SceneId> predictions_after;
  std::vector<std::vector<double>> logits_after;
};

// Head logits after zeroing the disabled units of every feature row.
std::vector<std::vector<double>> ablated_logits(
    const LinearHead& head, std::span<const std::vector<float>> features,
    const std::set<UnitIndex>& disabled);

// Accuracy of the head's argmax against `targets` before and after
// disabling units. Throws kUnitOutOfRange, kEmptySet.
AblationResult ablate(const LinearHead& head,
                      std::span<const std::vector<float>> features,
                      std::span<const SceneId> targets,
                      const std::set<UnitIndex>& disabled);

// Reciprocal-rank fusion of the three metrics over scenes: scenes are ranked
// by CM (descending), SM (descending) and DM (ascending), ties to the lowest
// scene id, and mrr[s] is the mean of 1/rank over the three rankings.
// `per_scene[s]` holds the metrics of one image against scene s.
std::vector<double> mrr_feature(std::span<const ExplanationScores> per_scene);

// Explanation features of one image: (cm, sm, dm) against every scene, the
// MRR vector, then the pooled hidden features. Length 3|Y| + |Y| + U.
std::vector<double> pe_features(ImageId image, const ConceptSet& learned,
                                std::span<const ConceptSet> core_by_scene,
                                std::span<const float> hidden);

struct SvmConfig {
  double c_reg = 1.0;
  std::uint32_t epochs = 200;
  double learning_rate = 0.1;  // decays as lr / epoch
  std::uint64_t seed = 1;
};

// One-vs-rest linear SVM over standardized features.
struct LinearSvmModel {
  std::uint32_t num_classes = 0;
  std::uint32_t num_features = 0;
  std::vector<double> weights;  // [classes][features]
  std::vector<double> bias;     // [classes]
  std::vector<double> mean;     // [features]
  std::vector<double> stddev;   // [features]

  std::vector<double> standardize(std::span<const double> x) const;
  std::vector<double> margins(std::span<const double> x) const;
  SceneId predict(std::span<const double> x) const;
};

struct SvmTrainingResult {
  LinearSvmModel model;
  // objective[c][e]: the accepted one-vs-rest objective of class c after
  // epoch e (index 0 is the all-zero starting point).
  std::vector<std::vector<double>> objective;
  std::vector<std::string> warnings;
};

// L2-regularized hinge loss, lambda/2 |w|^2 + mean hinge with
// lambda = 1 / (C n), minimized per class by seeded-order stochastic
// subgradient epochs. An epoch that would raise the objective is rolled
// back, so every recorded objective sequence is non-increasing.
// Throws kSingleClass, kInvalidArgument.
SvmTrainingResult train_pe_svm(std::span<const std::vector<double>> features,
                               std::span<const SceneId> labels,
                               std::uint32_t num_classes,
                               const SvmConfig& config);

double svm_objective(std::span<const std::vector<double>> standardized,
                     std::span<const SceneId> labels, SceneId positive,
                     std::span<const double> w, double b, double lambda);

double accuracy(const LinearSvmModel& model,
                std::span<const std::vector<double>> features,
                std::span<const SceneId> labels);

// "|Y| F" header, |Y| weight rows, bias row, mean row, stddev row.
void write_svm_model(const std::filesystem::path& path,
                     const LinearSvmModel& model);
LinearSvmModel read_svm_model(const std::filesystem::path& path);

}  // namespace neurodissect

#endif  // NEURODISSECT_MANIPULATION_H_
