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

#ifndef NEURODISSECT_TYPES_H_
#define NEURODISSECT_TYPES_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "neurodissect/concept_set.h"

namespace neurodissect {

enum class ConceptCategory { kObject, kPart, kColor, kMaterial, kScene, kOther };

std::string_view category_name(ConceptCategory category);
std::optional<ConceptCategory> parse_category(std::string_view name);

// Lowercases, trims, and replaces spaces with underscores. Concept names,
// scene names and knowledge-graph nodes all share this normal form.
std::string normalize_name(std::string_view name);

struct ConceptEntry {
  ConceptId id = kNoConcept;
  std::string name;
  ConceptCategory category = ConceptCategory::kOther;
};

// Concepts with dense ids 1..N; id 0 is reserved for "no concept".
class ConceptVocab {
 public:
  ConceptVocab() = default;

  // Validates density, uniqueness and normalization. Throws Error.
  explicit ConceptVocab(std::vector<ConceptEntry> entries);

  const std::vector<ConceptEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool contains(ConceptId id) const {
    return id != kNoConcept && id <= entries_.size();
  }
  const ConceptEntry& at(ConceptId id) const;
  const std::string& name(ConceptId id) const { return at(id).name; }
  std::optional<ConceptId> find(std::string_view name) const;
  ConceptSet all_ids() const;

 private:
  std::vector<ConceptEntry> entries_;
  std::unordered_map<std::string, ConceptId> by_name_;
};

struct SceneEntry {
  SceneId id = 0;
  std::string name;
};

// Scenes with dense ids 0..N-1.
class SceneVocab {
 public:
  SceneVocab() = default;
  explicit SceneVocab(std::vector<SceneEntry> entries);

  const std::vector<SceneEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool contains(SceneId id) const { return id < entries_.size(); }
  const std::string& name(SceneId id) const;
  std::optional<SceneId> find(std::string_view name) const;

 private:
  std::vector<SceneEntry> entries_;
  std::unordered_map<std::string, SceneId> by_name_;
};

// Per-unit 2-D activation maps of one image, stored [unit][row][col].
struct ActivationVolume {
  std::uint32_t units = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<float> data;

  std::size_t map_size() const {
    return static_cast<std::size_t>(height) * width;
  }
  std::span<const float> unit_map(UnitIndex unit) const {
    return {data.data() + unit * map_size(), map_size()};
  }
  float at(UnitIndex unit, std::uint32_t row, std::uint32_t col) const {
    return data[unit * map_size() + static_cast<std::size_t>(row) * width +
                col];
  }

  // Shape and finiteness checks. Throws Error(kDimensionMismatch/kParseError).
  void validate() const;
};

// Multi-plane per-pixel concept ids, stored [plane][row][col]. A pixel is an
// instance of concept c iff any plane holds c.
struct SegmentationMask {
  std::uint32_t planes = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<ConceptId> data;

  std::size_t plane_size() const {
    return static_cast<std::size_t>(height) * width;
  }
  std::span<const ConceptId> plane(std::uint32_t p) const {
    return {data.data() + p * plane_size(), plane_size()};
  }

  // Distinct non-zero concept ids present in any plane.
  ConceptSet concepts() const;
  void validate() const;
};

// Scene classifier over pooled unit features: logits = W * features + b.
struct LinearHead {
  std::uint32_t num_classes = 0;
  std::uint32_t num_units = 0;
  std::vector<float> weights;  // [num_classes][num_units], row-major
  std::vector<float> bias;     // [num_classes]

  std::span<const float> row(SceneId scene) const {
    return {weights.data() + static_cast<std::size_t>(scene) * num_units,
            num_units};
  }
  std::vector<double> logits(std::span<const float> features) const;
  void validate() const;
};

// Index of the largest value; ties resolve to the lowest index.
std::size_t argmax(std::span<const double> values);

enum class Split { kTrain, kTest };

std::string_view split_name(Split split);
std::optional<Split> parse_split(std::string_view name);

struct ImageRecord {
  ImageId image_id = 0;
  SceneId scene_id = 0;
  std::optional<SceneId> predicted_scene_id;
  std::filesystem::path activation_path;
  std::filesystem::path mask_path;
  Split split = Split::kTrain;
  std::optional<std::vector<float>> pooled_features;
};

struct DatasetManifest {
  std::filesystem::path concept_vocab_path;
  std::filesystem::path scene_vocab_path;
  std::filesystem::path head_path;

  ConceptVocab concept_vocab;
  SceneVocab scene_vocab;
  LinearHead head;
  std::vector<ImageRecord> images;

  // Parallel to `images`: the concepts annotated anywhere in each mask.
  std::vector<ConceptSet> image_concepts;
  // Activation shape shared by every image (0 when the manifest is empty).
  std::uint32_t units = 0;

  std::vector<std::string> warnings;

  std::size_t index_of(ImageId id) const;
};

}  // namespace neurodissect

#endif  // NEURODISSECT_TYPES_H_
