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

#ifndef NEURODISSECT_CONCEPT_SET_H_
#define NEURODISSECT_CONCEPT_SET_H_

#include <cstdint>
#include <set>

namespace neurodissect {

using ConceptId = std::uint32_t;
using SceneId = std::uint32_t;
using ImageId = std::uint64_t;
using UnitIndex = std::uint32_t;

// Concept id 0 marks "no concept" in segmentation masks.
inline constexpr ConceptId kNoConcept = 0;

// Ordered so iteration (and therefore every report) is deterministic.
using ConceptSet = std::set<ConceptId>;

ConceptSet set_intersection(const ConceptSet& a, const ConceptSet& b);
ConceptSet set_union(const ConceptSet& a, const ConceptSet& b);
ConceptSet set_difference(const ConceptSet& a, const ConceptSet& b);
std::size_t intersection_size(const ConceptSet& a, const ConceptSet& b);
bool is_subset(const ConceptSet& sub, const ConceptSet& super);

}  // namespace neurodissect

#endif  // NEURODISSECT_CONCEPT_SET_H_
