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

#include "neurodissect/types.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>
#include <utility>

#include <fmt/core.h>

#include "neurodissect/error.h"

namespace neurodissect {
namespace {

constexpr char kModule[] = "core_model";

}  // namespace

std::string_view category_name(ConceptCategory category) {
  switch (category) {
    case ConceptCategory::kObject: return "object";
    case ConceptCategory::kPart: return "part";
    case ConceptCategory::kColor: return "color";
    case ConceptCategory::kMaterial: return "material";
    case ConceptCategory::kScene: return "scene";
    case ConceptCategory::kOther: return "other";
  }
  return "other";
}

std::optional<ConceptCategory> parse_category(std::string_view name) {
  for (auto c : {ConceptCategory::kObject, ConceptCategory::kPart,
                 ConceptCategory::kColor, ConceptCategory::kMaterial,
                 ConceptCategory::kScene, ConceptCategory::kOther}) {
    if (category_name(c) == name) return c;
  }
  return std::nullopt;
}

std::string normalize_name(std::string_view name) {
  auto first = name.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  auto last = name.find_last_not_of(" \t");
  name = name.substr(first, last - first + 1);
  std::string out;
  out.reserve(name.size());
  for (char ch : name) {
    if (ch == ' ') {
      out.push_back('_');
    } else {
      out.push_back(static_cast<char>(
          std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  return out;
}

ConceptVocab::ConceptVocab(std::vector<ConceptEntry> entries)
    : entries_(std::move(entries)) {
  std::sort(entries_.begin(), entries_.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (e.id != i + 1) {
      throw Error(ErrorCode::kVocabMismatch, kModule,
                  fmt::format("concept ids must be dense from 1; expected {} "
                              "but found {}",
                              i + 1, e.id));
    }
    if (e.name.empty() || normalize_name(e.name) != e.name) {
      throw Error(ErrorCode::kParseError, kModule,
                  fmt::format("concept {} has a non-normalized name '{}'",
                              e.id, e.name));
    }
    if (!by_name_.emplace(e.name, e.id).second) {
      throw Error(ErrorCode::kVocabMismatch, kModule,
                  fmt::format("duplicate concept name '{}'", e.name));
    }
  }
}

const ConceptEntry& ConceptVocab::at(ConceptId id) const {
  if (!contains(id)) {
    throw Error(ErrorCode::kVocabMismatch, kModule,
                fmt::format("concept id {} is not in the vocabulary", id));
  }
  return entries_[id - 1];
}

std::optional<ConceptId> ConceptVocab::find(std::string_view name) const {
  auto it = by_name_.find(normalize_name(name));
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

ConceptSet ConceptVocab::all_ids() const {
  ConceptSet out;
  for (const auto& e : entries_) out.insert(out.end(), e.id);
  return out;
}

SceneVocab::SceneVocab(std::vector<SceneEntry> entries)
    : entries_(std::move(entries)) {
  std::sort(entries_.begin(), entries_.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (e.id != i) {
      throw Error(ErrorCode::kVocabMismatch, kModule,
                  fmt::format("scene ids must be dense from 0; expected {} "
                              "but found {}",
                              i, e.id));
    }
    if (e.name.empty() || normalize_name(e.name) != e.name) {
      throw Error(ErrorCode::kParseError, kModule,
                  fmt::format("scene {} has a non-normalized name '{}'", e.id,
                              e.name));
    }
    if (!by_name_.emplace(e.name, e.id).second) {
      throw Error(ErrorCode::kVocabMismatch, kModule,
                  fmt::format("duplicate scene name '{}'", e.name));
    }
  }
}

const std::string& SceneVocab::name(SceneId id) const {
  if (!contains(id)) {
    throw Error(ErrorCode::kVocabMismatch, kModule,
                fmt::format("scene id {} is not in the vocabulary", id));
  }
  return entries_[id].name;
}

std::optional<SceneId> SceneVocab::find(std::string_view name) const {
  auto it = by_name_.find(normalize_name(name));
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

void ActivationVolume::validate() const {
  if (units == 0 || height == 0 || width == 0) {
    throw Error(ErrorCode::kDimensionMismatch, kModule,
                fmt::format("activation volume has an empty dimension "
                            "({}x{}x{})",
                            units, height, width));
  }
  if (data.size() != static_cast<std::size_t>(units) * map_size()) {
    throw Error(ErrorCode::kDimensionMismatch, kModule,
                fmt::format("activation payload has {} values, expected {}",
                            data.size(),
                            static_cast<std::size_t>(units) * map_size()));
  }
  for (float v : data) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kParseError, kModule,
                  "activation volume contains a non-finite value");
    }
  }
}

ConceptSet SegmentationMask::concepts() const {
  std::vector<ConceptId> ids(data.begin(), data.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  ConceptSet out;
  for (ConceptId id : ids) {
    if (id != kNoConcept) out.insert(out.end(), id);
  }
  return out;
}

void SegmentationMask::validate() const {
  if (planes == 0 || height == 0 || width == 0) {
    throw Error(ErrorCode::kDimensionMismatch, kModule,
                fmt::format("segmentation mask has an empty dimension "
                            "({}x{}x{})",
                            planes, height, width));
  }
  if (data.size() != static_cast<std::size_t>(planes) * plane_size()) {
    throw Error(ErrorCode::kDimensionMismatch, kModule,
                fmt::format("mask payload has {} values, expected {}",
                            data.size(),
                            static_cast<std::size_t>(planes) * plane_size()));
  }
}

std::vector<double> LinearHead::logits(std::span<const float> features) const {
  if (features.size() != num_units) {
    throw Error(ErrorCode::kDimensionMismatch, kModule,
                fmt::format("head expects {} features, got {}", num_units,
                            features.size()));
  }
  std::vector<double> out(num_classes);
  for (std::uint32_t y = 0; y < num_classes; ++y) {
    auto w = row(y);
    double acc = 0.0;
    for (std::uint32_t u = 0; u < num_units; ++u) {
      acc += static_cast<double>(w[u]) * static_cast<double>(features[u]);
    }
    out[y] = acc + static_cast<double>(bias[y]);
  }
  return out;
}

void LinearHead::validate() const {
  if (num_classes == 0 || num_units == 0) {
    throw Error(ErrorCode::kDimensionMismatch, kModule,
                "linear head has an empty dimension");
  }
  if (weights.size() != static_cast<std::size_t>(num_classes) * num_units ||
      bias.size() != num_classes) {
    throw Error(ErrorCode::kDimensionMismatch, kModule,
                "linear head payload does not match its header");
  }
  for (float v : weights) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kParseError, kModule,
                  "linear head contains a non-finite weight");
    }
  }
  for (float v : bias) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kParseError, kModule,
                  "linear head contains a non-finite bias");
    }
  }
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

std::string_view split_name(Split split) {
  return split == Split::kTrain ? "train" : "test";
}

std::optional<Split> parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "test") return Split::kTest;
  return std::nullopt;
}

std::size_t DatasetManifest::index_of(ImageId id) const {
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].image_id == id) return i;
  }
  throw Error(ErrorCode::kInvalidArgument, kModule,
              fmt::format("image {} is not in the manifest", id));
}

}  // namespace neurodissect
