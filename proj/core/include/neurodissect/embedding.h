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

#ifndef NEURODISSECT_EMBEDDING_H_
#define NEURODISSECT_EMBEDDING_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "neurodissect/dissection.h"
#include "neurodissect/knowledge.h"
#include "neurodissect/types.h"

namespace neurodissect {

struct TransEConfig {
  std::uint32_t dim = 50;
  std::uint32_t epochs = 500;
  double learning_rate = 0.01;
  double margin = 1.0;
  std::uint32_t negatives = 5;  // corrupted triples per positive
  std::uint64_t seed = 1;
};

// Entity and relation vectors, row-major with `dim` columns. Entity i is
// the knowledge graph's node i, relation r its relation r.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::uint32_t dim, std::vector<std::string> entity_names,
                 std::vector<float> entity_vectors,
                 std::vector<std::string> relation_names,
                 std::vector<float> relation_vectors);

  std::uint32_t dim() const { return dim_; }
  std::size_t entity_count() const { return entity_names_.size(); }
  std::size_t relation_count() const { return relation_names_.size(); }
  const std::vector<std::string>& entity_names() const { return entity_names_; }
  const std::vector<std::string>& relation_names() const {
    return relation_names_;
  }
  std::optional<std::size_t> entity_index(std::string_view name) const;

  std::span<const float> entity(std::size_t i) const {
    return {entity_vectors_.data() + i * dim_, dim_};
  }
  std::span<const float> relation(std::size_t r) const {
    return {relation_vectors_.data() + r * dim_, dim_};
  }
  std::span<float> entity(std::size_t i) {
    return {entity_vectors_.data() + i * dim_, dim_};
  }
  std::span<float> relation(std::size_t r) {
    return {relation_vectors_.data() + r * dim_, dim_};
  }

  friend bool operator==(const EmbeddingTable&, const EmbeddingTable&) = default;

 private:
  std::uint32_t dim_ = 0;
  std::vector<std::string> entity_names_;
  std::vector<float> entity_vectors_;
  std::vector<std::string> relation_names_;
  std::vector<float> relation_vectors_;
  std::unordered_map<std::string, std::size_t> entity_ids_;
};

struct TransEResult {
  EmbeddingTable table;
  TransEConfig config;
  std::vector<double> epoch_mean_loss;
};

// TransE with the margin ranking loss
//   max(0, margin + d(h + r, t) - d(h' + r, t'))
// under the L2 distance, one corrupted triple per negative sample (head or
// tail replaced by a uniformly drawn different entity, each side with
// probability 1/2), plain SGD, and entity vectors renormalized to unit length
// after every epoch. Deterministic for a given seed.
// Throws kEmptyGraph, kInvalidArgument.
TransEResult train_transe(const KnowledgeGraph& kg, const TransEConfig& config);

// ||h + r - t||_2.
double transe_distance(const EmbeddingTable& table, std::size_t head,
                       std::size_t relation, std::size_t tail);

double euclidean(std::span<const float> a, std::span<const float> b);

// "#entities n d" followed by node<TAB>v1..vd rows, then "#relations m d" and
// relation rows.
void write_embedding(const std::filesystem::path& path,
                     const EmbeddingTable& table);
EmbeddingTable read_embedding(const std::filesystem::path& path);

// PAM k-medoids over a dense symmetric distance matrix (n x n, row-major).
// BUILD picks the initial medoids greedily, SWAP applies the best improving
// exchange until none remains. Fully deterministic.
struct MedoidResult {
  std::vector<std::size_t> medoids;     // point indices, ascending
  std::vector<std::size_t> assignment;  // point -> position in `medoids`
  double cost = 0.0;                    // sum of point-to-medoid distances
};
MedoidResult pam(std::span<const double> distances, std::size_t n,
                 std::size_t k);

struct ConceptClustering {
  std::uint32_t k = 0;
  std::vector<ConceptSet> clusters;            // ordered by representative id
  std::vector<ConceptId> representatives;      // medoid of each cluster
  std::map<ConceptId, std::size_t> cluster_of;
  double cost = 0.0;

  // concept -> representative, for every clustered concept.
  std::map<ConceptId, ConceptId> representative_map() const;
};

// Clusters concepts by the Euclidean distance between their aligned entity
// vectors. Throws kUnalignedConcept, kKTooLarge, kInvalidArgument (k = 0).
ConceptClustering cluster_concepts(const ConceptSet& concepts,
                                   const EmbeddingTable& table,
                                   const ConceptAlignment& alignment,
                                   std::uint32_t k);

struct ConceptFilterResult {
  ConceptSet filtered;                     // CF(C)
  std::map<ConceptId, ConceptId> relabel;  // concept -> representative
};

// Replaces each concept by its cluster representative.
// Throws kUnclusteredConcept.
ConceptFilterResult concept_filter(const ConceptSet& scene_concepts,
                                   const ConceptClustering& clustering);

// Copy of `mask` with every id passed through `relabel`.
SegmentationMask relabel_mask(const SegmentationMask& mask,
                              const std::map<ConceptId, ConceptId>& relabel);

struct IouGain {
  double baseline = 0.0;   // A: mean best IoU per unit, original concepts
  double clustered = 0.0;  // B: same after concept filtering
  double gain_percent = 0.0;
};

// 100 * (clustered - baseline) / baseline. Throws kZeroBaseline.
double iou_gain_percent(double baseline, double clustered);

// Mean over units of each unit's best dataset-level IoU.
double mean_best_iou(std::span<const double> best_per_unit);

IouGain iou_gain(const DatasetManifest& dataset,
                 const UnitThresholds& thresholds,
                 const ConceptClustering& clustering);

// concept_id<TAB>cluster<TAB>representative_id
void write_clustering(const std::filesystem::path& path,
                      const ConceptClustering& clustering);
ConceptClustering read_clustering(const std::filesystem::path& path);

}  // namespace neurodissect

#endif  // NEURODISSECT_EMBEDDING_H_
