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

#include "neurodissect/concept_set.h"

#include <algorithm>
#include <iterator>

namespace neurodissect {

ConceptSet set_intersection(const ConceptSet& a, const ConceptSet& b) {
  ConceptSet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                        std::inserter(out, out.end()));
  return out;
}

ConceptSet set_union(const ConceptSet& a, const ConceptSet& b) {
  ConceptSet out = a;
  out.insert(b.begin(), b.end());
  return out;
}

ConceptSet set_difference(const ConceptSet& a, const ConceptSet& b) {
  ConceptSet out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(),
                      std::inserter(out, out.end()));
  return out;
}

std::size_t intersection_size(const ConceptSet& a, const ConceptSet& b) {
  std::size_t n = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++n;
      ++ia;
      ++ib;
    }
  }
  return n;
}

bool is_subset(const ConceptSet& sub, const ConceptSet& super) {
  return std::includes(super.begin(), super.end(), sub.begin(), sub.end());
}

}  // namespace neurodissect
