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

#ifndef NEURODISSECT_EXPLANATION_H_
#define NEURODISSECT_EXPLANATION_H_

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "neurodissect/concept_set.h"

namespace neurodissect {

// |LC & CC| / |CC|
double consistency_metric(const ConceptSet& learned, const ConceptSet& core);
// |LC & CC| / |LC | CC|
double similarity_metric(const ConceptSet& learned, const ConceptSet& core);
// |LC \ CC| / |CC|
double difference_metric(const ConceptSet& learned, const ConceptSet& core);

struct ExplanationScores {
  ImageId image_id = 0;
  SceneId scene_id = 0;  // the scene the metrics are computed against
  double cm = 0.0;
  double sm = 0.0;
  double dm = 0.0;
};

// All three metrics at once. Throws kEmptyCoreConcepts when `core` is empty.
ExplanationScores explain(ImageId image, SceneId scene,
                          const ConceptSet& learned, const ConceptSet& core);

// One explained image: its target scene and the model's prediction.
struct PredictionRecord {
  ImageId image_id = 0;
  SceneId target = 0;
  SceneId predicted = 0;
};

using LearnedConceptsFn = std::function<const ConceptSet&(ImageId)>;
using CoreConceptsFn = std::function<const ConceptSet&(SceneId)>;

struct FalsePredictionReport {
  std::size_t count = 0;  // |D_f|
  double cm_fp = 0.0;     // percentages
  double dm_fp = 0.0;
  double sm_fp = 0.0;
};

// Share (in percent) of misclassified images whose metric against the
// predicted scene strictly exceeds the metric against the target scene,
// separately for CM, DM and SM. Throws kEmptyFalseSet, kInvalidArgument (a
// record with predicted == target), kEmptyCoreConcepts.
FalsePredictionReport false_prediction_report(
    std::span<const PredictionRecord> false_predictions,
    const LearnedConceptsFn& learned, const CoreConceptsFn& core);

struct TruePredictionReport {
  std::size_t true_count = 0;   // |D_t|
  std::size_t false_count = 0;  // |D_f|
  double cm_tp = 0.0;
  double cm_t_fp = 0.0;
  double sm_tp = 0.0;
  double sm_t_fp = 0.0;
};

// Mean CM and SM against each image's target scene, over correctly predicted
// and misclassified images. Sums run in input order. Throws kEmptySet.
TruePredictionReport true_prediction_report(
    std::span<const PredictionRecord> true_predictions,
    std::span<const PredictionRecord> false_predictions,
    const LearnedConceptsFn& learned, const CoreConceptsFn& core);

struct PPEReport {
  std::string lc_strategy;
  std::string cc_kind;
  FalsePredictionReport false_report;
  TruePredictionReport true_report;
  bool has_false = false;
  bool has_true = false;
};

// Machine-readable rows plus a table laid out like the classic
// "LC x CC x metric" comparison.
std::string format_ppe_tsv(std::span<const PPEReport> reports);
std::string format_ppe_table(std::span<const PPEReport> reports);

}  // namespace neurodissect

#endif  // NEURODISSECT_EXPLANATION_H_
