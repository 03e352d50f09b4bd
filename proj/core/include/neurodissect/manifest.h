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

#ifndef NEURODISSECT_MANIFEST_H_
#define NEURODISSECT_MANIFEST_H_

#include <filesystem>
#include <vector>

#include "neurodissect/types.h"

namespace neurodissect {

// Loads and fully validates a dataset manifest:
//
//   #concept_vocab concepts.tsv
//   #scene_vocab scenes.tsv
//   #head head.tsv
//   image_id<TAB>scene_id<TAB>predicted|-<TAB>activation<TAB>mask<TAB>split[<TAB>f0,f1,...]
//
// Relative paths resolve against the manifest's directory. Every activation
// and mask is opened, so dangling concept ids and shape mismatches surface
// here as typed errors (kMissingFile, kVocabMismatch, kDimensionMismatch).
// The optional seventh column carries pooled features exported alongside the
// activations; when absent the features are the global average pool.
DatasetManifest load_manifest(const std::filesystem::path& path);

// Writes the header and records. Paths are written relative to the
// manifest's directory when possible.
void write_manifest(const std::filesystem::path& path,
                    const DatasetManifest& manifest);

// Global average pool: out[t] is the mean of unit t's H x W map.
std::vector<float> pool_features(const ActivationVolume& volume);

// Pooled features of a record: the exported column if present, else the
// pool of its activation volume.
std::vector<float> record_features(const ImageRecord& record);

// Pooled feature rows for every image, in manifest order.
std::vector<std::vector<float>> all_features(const DatasetManifest& manifest);

// The label a prediction-time caller sees: the exported prediction when the
// manifest has one, else the linear head's argmax.
SceneId effective_prediction(const DatasetManifest& manifest,
                             std::size_t image_index,
                             std::span<const float> features);

}  // namespace neurodissect

#endif  // NEURODISSECT_MANIFEST_H_
