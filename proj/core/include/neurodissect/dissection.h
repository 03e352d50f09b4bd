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

#ifndef NEURODISSECT_DISSECTION_H_
#define NEURODISSECT_DISSECTION_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "neurodissect/types.h"

namespace neurodissect {

inline constexpr double kDefaultQuantile = 0.005;

struct UnitThresholds {
  std::vector<float> thresholds;  // T_t per unit
  double quantile_level = kDefaultQuantile;
};

// A binary pixel set over an H x W grid.
struct PixelSet {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<std::uint8_t> bits;  // row-major, 0 or 1

  PixelSet() = default;
  PixelSet(std::uint32_t h, std::uint32_t w)
      : height(h), width(w), bits(static_cast<std::size_t>(h) * w, 0) {}

  std::size_t count() const;
  bool empty() const { return count() == 0; }
};

// Empirical (1 - quantile) quantile of a sample, linear interpolation
// between order statistics at position p * (n - 1). Reorders `values`.
float upper_quantile(std::span<float> values, double quantile);

// Per-unit activation thresholds pooled over every image of the dataset.
// Throws kEmptyDataset, kInvalidArgument (quantile outside (0, 0.5]).
UnitThresholds compute_thresholds(const DatasetManifest& dataset,
                                  double quantile = kDefaultQuantile);

// Same, over volumes already in memory.
UnitThresholds compute_thresholds(std::span<const ActivationVolume> volumes,
                                  double quantile = kDefaultQuantile);

// Corner-aligned bilinear upsampling of a row-major H x W map. Target
// dimensions must not be smaller than the source (kDimensionMismatch).
std::vector<float> upsample_bilinear(std::span<const float> map,
                                     std::uint32_t height, std::uint32_t width,
                                     std::uint32_t target_height,
                                     std::uint32_t target_width);

// |a & b| / |a | b|, and 0 when both sets are empty.
double iou(const PixelSet& a, const PixelSet& b);

// Pixels where the upsampled map exceeds the threshold.
PixelSet threshold_map(std::span<const float> upsampled, std::uint32_t height,
                       std::uint32_t width, float threshold);

// Pixels labelled `concept` on any plane.
PixelSet concept_pixels(const SegmentationMask& mask, ConceptId concept_id);

// IoU of every unit against every concept in `concepts`, for one image.
struct NeuronConceptScores {
  ImageId image_id = 0;
  // per_unit[t][c] = IoU of unit t with concept c.
  std::vector<std::map<ConceptId, double>> per_unit;
};

// Scores one image from in-memory data: each unit's upsampled activation,
// thresholded at T_t, against the pixels of each concept in
// `scene_concepts`.
NeuronConceptScores score_image(ImageId image_id,
                                const ActivationVolume& volume,
                                const SegmentationMask& mask,
                                const UnitThresholds& thresholds,
                                const ConceptSet& scene_concepts);

// Loads the record's files and scores it. Throws kMissingActivation,
// kMissingMask, kInvalidArgument (empty scene_concepts).
NeuronConceptScores score_image(const ImageRecord& record,
                                const UnitThresholds& thresholds,
                                const ConceptSet& scene_concepts);

enum class SelectionStrategy { kWholeLayer, kHighestIoU, kMinMaxThreshold };

std::string_view strategy_name(SelectionStrategy strategy);
std::optional<SelectionStrategy> parse_strategy(std::string_view name);

struct LearnedConcepts {
  ImageId image_id = 0;
  SelectionStrategy strategy = SelectionStrategy::kMinMaxThreshold;
  std::vector<ConceptSet> per_unit;
  ConceptSet all;  // union over units
};

// The selection rule applied to one image's scores:
//   WholeLayer       every concept with IoU > 0
//   HighestIoU       the argmax concept per unit (lowest id on ties), if > 0
//   MinMaxThreshold  theta = min over units (with positive max) of the unit's
//                    max IoU; each unit keeps concepts with IoU >= theta
// Throws kNoScores when there are no units.
LearnedConcepts select_learned_concepts(const NeuronConceptScores& scores,
                                        SelectionStrategy strategy);

// Which scene's concept set C_y restricts scoring of an image.
enum class SceneSource { kPredicted, kTarget, kAll };

std::string_view scene_source_name(SceneSource source);
std::optional<SceneSource> parse_scene_source(std::string_view name);

// C_y for every scene: the union of mask concepts over the scene's images.
std::vector<ConceptSet> scene_concept_sets(const DatasetManifest& dataset);

// Scores every image of the dataset in manifest order. `predictions` is
// consulted for SceneSource::kPredicted (one entry per image).
std::vector<NeuronConceptScores> dissect_dataset(
    const DatasetManifest& dataset, const UnitThresholds& thresholds,
    SceneSource source, std::span<const SceneId> predictions);

// Dataset-level NetDissect: per unit and concept, the ratio of intersections
// summed over images to unions summed over images. `relabel` maps concept
// ids before masks are read (identity when empty). Returns each unit's best
// IoU over all concepts.
std::vector<double> dataset_best_iou(
    const DatasetManifest& dataset, const UnitThresholds& thresholds,
    const std::map<ConceptId, ConceptId>& relabel = {});

// Report files.
//   scores:  #units U, then image_id<TAB>unit<TAB>concept_id<TAB>iou for
//            every IoU > 0 (zero scores are implied).
//   LC:      image_id<TAB>strategy<TAB>unit<TAB>concept_id.
//   thresholds: unit<TAB>threshold.
void write_scores(const std::filesystem::path& path,
                  std::span<const NeuronConceptScores> scores);
std::vector<NeuronConceptScores> read_scores(const std::filesystem::path& path);
void write_learned_concepts(const std::filesystem::path& path,
                            std::span<const LearnedConcepts> concepts);
std::vector<LearnedConcepts> read_learned_concepts(
    const std::filesystem::path& path);
void write_thresholds(const std::filesystem::path& path,
                      const UnitThresholds& thresholds);
UnitThresholds read_thresholds(const std::filesystem::path& path);

}  // namespace neurodissect

#endif  // NEURODISSECT_DISSECTION_H_
