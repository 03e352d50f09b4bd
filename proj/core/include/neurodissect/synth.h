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

#ifndef NEURODISSECT_SYNTH_H_
#define NEURODISSECT_SYNTH_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "neurodissect/concept_set.h"

namespace neurodissect {

struct SynthConfig {
  std::uint64_t seed = 1;
  std::uint32_t scenes = 3;
  std::uint32_t images_per_scene = 10;
  std::uint32_t units = 16;
  std::uint32_t height = 12;  // activation grid
  std::uint32_t width = 12;
  std::uint32_t mask_scale = 2;  // masks are height*scale x width*scale
  // Share of each scene's images (taken from the end) whose exported
  // prediction is forged to the next scene.
  double forge_fraction = 0.2;
  // Share of each scene's images tagged as the test split.
  double test_fraction = 0.2;
};

// What the generator planted for one scene.
struct PlantedScene {
  SceneId scene = 0;
  ConceptId identifier = kNoConcept;  // in every image of this scene only
  UnitIndex discriminative = 0;       // fires on the identifier region
  std::optional<UnitIndex> decoy;     // fires on the floor, feeds scene + 1
};

struct SynthSummary {
  std::filesystem::path manifest;
  std::filesystem::path knowledge_graph;
  std::vector<PlantedScene> plants;
  ConceptId wall = kNoConcept;
  ConceptId floor = kNoConcept;
  std::size_t images = 0;
};

// Writes a planted dataset under `dir`: manifest.tsv, concepts.tsv,
// scenes.tsv, head.tsv, kg.tsv, plant.tsv, act/*.nact and mask/*.nmsk.
// Every scene owns an identifier concept and a unit whose activation traces
// that concept's region, the head classifies the pooled features
// perfectly, and the graph links each scene to its identifier.
// Throws kInvalidArgument, kDiskWrite.
SynthSummary write_synth_dataset(const std::filesystem::path& dir,
                                 const SynthConfig& config);

}  // namespace neurodissect

#endif  // NEURODISSECT_SYNTH_H_
