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

#ifndef NEURODISSECT_KNOWLEDGE_H_
#define NEURODISSECT_KNOWLEDGE_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "neurodissect/types.h"

namespace neurodissect {

struct Triple {
  std::string head;
  std::string relation;
  std::string tail;

  friend bool operator==(const Triple&, const Triple&) = default;
  friend auto operator<=>(const Triple&, const Triple&) = default;
};

// Typed triple store with an undirected adjacency index. Node names are
// normalized like concept names; duplicate triples are dropped, keeping the
// first occurrence.
class KnowledgeGraph {
 public:
  struct Edge {
    std::size_t node;
    std::size_t relation;
  };

  KnowledgeGraph() = default;
  explicit KnowledgeGraph(std::vector<Triple> triples);

  const std::vector<Triple>& triples() const { return triples_; }
  const std::vector<std::string>& nodes() const { return nodes_; }
  const std::vector<std::string>& relations() const { return relations_; }
  bool empty() const { return triples_.empty(); }

  std::optional<std::size_t> node_index(std::string_view name) const;
  std::optional<std::size_t> relation_index(std::string_view name) const;
  const std::vector<Edge>& neighbors(std::size_t node) const {
    return adjacency_[node];
  }

  // Triples as (head, relation, tail) indices.
  struct IndexedTriple {
    std::size_t head;
    std::size_t relation;
    std::size_t tail;
  };
  const std::vector<IndexedTriple>& indexed() const { return indexed_; }

 private:
  std::size_t intern_node(const std::string& name);
  std::size_t intern_relation(const std::string& name);

  std::vector<Triple> triples_;
  std::vector<IndexedTriple> indexed_;
  std::vector<std::string> nodes_;
  std::vector<std::string> relations_;
  std::unordered_map<std::string, std::size_t> node_ids_;
  std::unordered_map<std::string, std::size_t> relation_ids_;
  std::vector<std::vector<Edge>> adjacency_;
};

KnowledgeGraph read_knowledge_graph(const std::filesystem::path& path);
void write_knowledge_graph(const std::filesystem::path& path,
                           const KnowledgeGraph& kg);

inline constexpr double kDefaultFuzzyFloor = 0.85;

// 1 - levenshtein(a, b) / max(|a|, |b|) on normalized names; 1 for two
// empty strings.
double name_similarity(std::string_view a, std::string_view b);

enum class MatchKind { kExact, kFuzzy };

struct AlignedNode {
  std::string node;
  MatchKind kind = MatchKind::kExact;
  double similarity = 1.0;
};

// Exact node match after normalization, else the most similar node at or
// above the floor (ties: lexicographically smallest node).
std::optional<AlignedNode> align_name(std::string_view name,
                                      const KnowledgeGraph& kg,
                                      double fuzzy_floor = kDefaultFuzzyFloor);

struct ConceptAlignment {
  std::map<ConceptId, AlignedNode> by_concept;

  bool contains(ConceptId id) const { return by_concept.count(id) > 0; }
  const AlignedNode& at(ConceptId id) const;
};

// Aligns every vocabulary concept; concepts with no node at or above the
// floor are left out.
ConceptAlignment align_concepts(const ConceptVocab& vocab,
                                const KnowledgeGraph& kg,
                                double fuzzy_floor = kDefaultFuzzyFloor);

void write_alignment(const std::filesystem::path& path,
                     const ConceptAlignment& alignment,
                     const ConceptVocab& vocab);

struct RelatedConceptOptions {
  std::uint32_t hops = 2;
  // Relation allow-list; empty means every relation.
  std::set<std::string> relations;
  double fuzzy_floor = kDefaultFuzzyFloor;
};

// RC(y, G): vocabulary concepts whose aligned node lies within `hops`
// undirected steps of the scene's node. The scene node itself is excluded.
// Throws kSceneNotInKG, kInvalidArgument (hops not 1 or 2).
ConceptSet related_concepts(std::string_view scene_name,
                            const KnowledgeGraph& kg,
                            const ConceptAlignment& alignment,
                            const RelatedConceptOptions& options = {});

// How often each concept appears among a scene's images.
struct SceneCoverage {
  std::size_t image_count = 0;
  std::map<ConceptId, std::size_t> images_with;  // the keys form C_y

  ConceptSet concepts() const;
  double fraction(ConceptId concept_id) const;
  // image share >= p percent, compared without division.
  bool covers(ConceptId concept_id, double percentage) const;
};

// Coverage per scene id, built from the manifest's per-image concept sets.
std::vector<SceneCoverage> scene_coverage(const DatasetManifest& dataset);
std::vector<SceneCoverage> scene_coverage(
    std::size_t scene_count, std::span<const SceneId> image_scenes,
    std::span<const ConceptSet> image_concepts);

// Count(y, p). Throws kNoImagesForScene, kInvalidArgument (p outside
// [0, 100]).
ConceptSet count_set(const SceneCoverage& coverage, double percentage);

inline constexpr double kDefaultGridStep = 0.5;

using ScenePercentageSets = std::function<ConceptSet(SceneId, double)>;

// Largest p on the grid 100, 100 - step, ..., >= 0 at which the sets of
// all listed scenes are pairwise distinct (two empty sets collide). Returns
// nullopt when no grid point separates them.
std::optional<double> find_distinguishing_percentage(
    std::span<const SceneId> scenes, const ScenePercentageSets& sets,
    double grid_step = kDefaultGridStep);

// Grid points scanned by the search, highest first.
std::vector<double> percentage_grid(double grid_step);

// True when the scenes' sets at p are pairwise distinct.
bool pairwise_distinct(std::span<const SceneId> scenes,
                       const ScenePercentageSets& sets, double percentage);

enum class CoreConceptKind { kSCC, kICC };
enum class Provenance { kKgRelated, kDatasetTopk, kBoth };

std::string_view core_kind_name(CoreConceptKind kind);
std::optional<CoreConceptKind> parse_core_kind(std::string_view name);
std::string_view provenance_name(Provenance provenance);
std::optional<Provenance> parse_provenance(std::string_view name);

struct IccParameters {
  double p_c = 0.0;
  double p_sc = 0.0;
  std::uint32_t k = 0;
};

struct CoreConceptSet {
  SceneId scene_id = 0;
  CoreConceptKind kind = CoreConceptKind::kSCC;
  std::map<ConceptId, Provenance> concepts;
  std::optional<IccParameters> parameters;  // ICC only

  ConceptSet ids() const;
};

// SCC(y) = RC(y) & C_y. Throws kNoImagesForScene.
CoreConceptSet scc(SceneId scene, const ConceptSet& related,
                   const SceneCoverage& coverage);

// The k concepts of Count(y, p_c) with the highest coverage (lowest id on
// ties).
ConceptSet top_k_of_count(const SceneCoverage& coverage, double p_c,
                          std::uint32_t k);

struct IccResult {
  IccParameters parameters;
  std::vector<SceneId> scenes;  // scenes with at least one image
  std::vector<CoreConceptSet> sets;  // parallel to `scenes`
  // Candidate pool (RC & C_y) | TopkOfCount(y), parallel to `scenes`.
  std::vector<ConceptSet> pools;

  const CoreConceptSet& for_scene(SceneId scene) const;
};

// ICC for every scene with images. `related` is indexed by scene id.
// Throws kIndistinguishableScenes when P_c or P_sc does not exist.
IccResult icc(std::span<const SceneCoverage> coverage,
              std::span<const ConceptSet> related, std::uint32_t k,
              double grid_step = kDefaultGridStep);

// SCount(y, p) over a candidate pool.
ConceptSet scount_set(const SceneCoverage& coverage, const ConceptSet& pool,
                      double percentage);

// Core-concept report: "#set<TAB>scene_id<TAB>kind<TAB>params" per set, then
// scene_id<TAB>kind<TAB>concept_id<TAB>provenance<TAB>params per concept.
void write_core_concepts(const std::filesystem::path& path,
                         std::span<const CoreConceptSet> sets);
std::vector<CoreConceptSet> read_core_concepts(
    const std::filesystem::path& path);

}  // namespace neurodissect

#endif  // NEURODISSECT_KNOWLEDGE_H_
