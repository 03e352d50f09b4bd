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

#include "neurodissect/embedding.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include <fmt/core.h>

#include "neurodissect/error.h"
#include "neurodissect/io.h"
#include "neurodissect/parallel.h"
#include "neurodissect/random.h"

namespace neurodissect {
namespace {

constexpr char kModule[] = "embedding";

void normalize(std::span<float> v) {
  double sq = 0.0;
  for (float x : v) sq += static_cast<double>(x) * x;
  if (sq <= 0.0) return;
  const double inv = 1.0 / std::sqrt(sq);
  for (float& x : v) x = static_cast<float>(x * inv);
}

// Writes h + r - t into `diff` and returns its L2 norm.
double residual(const EmbeddingTable& table, std::size_t h, std::size_t r,
                std::size_t t, std::vector<double>& diff) {
  auto hv = table.entity(h);
  auto rv = table.relation(r);
  auto tv = table.entity(t);
  double sq = 0.0;
  for (std::size_t i = 0; i < diff.size(); ++i) {
    diff[i] = static_cast<double>(hv[i]) + rv[i] - tv[i];
    sq += diff[i] * diff[i];
  }
  return std::sqrt(sq);
}

// Moves h and r by -step * diff/|diff| and t by the opposite.
void descend(EmbeddingTable& table, std::size_t h, std::size_t r,
             std::size_t t, const std::vector<double>& diff, double norm,
             double step) {
  if (norm <= 0.0) return;
  auto hv = table.entity(h);
  auto rv = table.relation(r);
  auto tv = table.entity(t);
  for (std::size_t i = 0; i < diff.size(); ++i) {
    const double g = step * diff[i] / norm;
    hv[i] = static_cast<float>(hv[i] - g);
    rv[i] = static_cast<float>(rv[i] - g);
    tv[i] = static_cast<float>(tv[i] + g);
  }
}

std::string join_vector(std::span<const float> v) {
  std::string out;
  for (float x : v) {
    out += '\t';
    out += format_float(x);
  }
  return out;
}

}  // namespace

EmbeddingTable::EmbeddingTable(std::uint32_t dim,
                               std::vector<std::string> entity_names,
                               std::vector<float> entity_vectors,
                               std::vector<std::string> relation_names,
                               std::vector<float> relation_vectors)
    : dim_(dim),
      entity_names_(std::move(entity_names)),
      entity_vectors_(std::move(entity_vectors)),
      relation_names_(std::move(relation_names)),
      relation_vectors_(std::move(relation_vectors)) {
  if (dim_ == 0 ||
      entity_vectors_.size() != entity_names_.size() * dim_ ||
      relation_vectors_.size() != relation_names_.size() * dim_) {
    throw Error(ErrorCode::kDimensionMismatch, kModule,
                "embedding vectors do not match the table shape");
  }
  for (float x : entity_vectors_) {
    if (!std::isfinite(x)) {
      throw Error(ErrorCode::kParseError, kModule,
                  "embedding contains a non-finite value");
    }
  }
  for (std::size_t i = 0; i < entity_names_.size(); ++i) {
    if (!entity_ids_.emplace(entity_names_[i], i).second) {
      throw Error(ErrorCode::kParseError, kModule,
                  fmt::format("duplicate entity '{}'", entity_names_[i]));
    }
  }
}

std::optional<std::size_t> EmbeddingTable::entity_index(
    std::string_view name) const {
  auto it = entity_ids_.find(std::string(name));
  if (it == entity_ids_.end()) return std::nullopt;
  return it->second;
}

TransEResult train_transe(const KnowledgeGraph& kg, const TransEConfig& config) {
  if (kg.empty()) {
    throw Error(ErrorCode::kEmptyGraph, kModule,
                "cannot embed an empty knowledge graph");
  }
  if (config.dim == 0 || !(config.margin > 0.0) ||
      !(config.learning_rate > 0.0) || config.negatives == 0) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                "TransE needs dim > 0, margin > 0, learning rate > 0 and at "
                "least one negative sample");
  }
  const std::size_t n_entities = kg.nodes().size();
  const std::size_t n_relations = kg.relations().size();
  const std::uint32_t d = config.dim;
  Rng rng(config.seed);

  const double bound = 6.0 / std::sqrt(static_cast<double>(d));
  std::vector<float> entities(n_entities * d);
  std::vector<float> relations(n_relations * d);
  for (float& x : entities) x = static_cast<float>(rng.uniform(-bound, bound));
  for (float& x : relations) x = static_cast<float>(rng.uniform(-bound, bound));

  TransEResult result;
  result.config = config;
  result.table = EmbeddingTable(d, kg.nodes(), std::move(entities),
                                kg.relations(), std::move(relations));
  auto& table = result.table;
  for (std::size_t r = 0; r < n_relations; ++r) normalize(table.relation(r));
  for (std::size_t e = 0; e < n_entities; ++e) normalize(table.entity(e));

  const auto& triples = kg.indexed();
  std::vector<std::size_t> order(triples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> pos_diff(d);
  std::vector<double> neg_diff(d);
  const double pairs = static_cast<double>(triples.size()) * config.negatives;

  for (std::uint32_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t idx : order) {
      const auto& tr = triples[idx];
      for (std::uint32_t s = 0; s < config.negatives; ++s) {
        std::size_t h2 = tr.head;
        std::size_t t2 = tr.tail;
        const bool corrupt_head = rng.coin();
        if (n_entities > 1) {
          std::size_t& slot = corrupt_head ? h2 : t2;
          const std::size_t original = slot;
          // Uniform over the other n - 1 entities.
          slot = rng.below(n_entities - 1);
          if (slot >= original) ++slot;
        }
        const double dp = residual(table, tr.head, tr.relation, tr.tail,
                                   pos_diff);
        const double dn = residual(table, h2, tr.relation, t2, neg_diff);
        const double loss = config.margin + dp - dn;
        if (loss <= 0.0) continue;
        total += loss;
        descend(table, tr.head, tr.relation, tr.tail, pos_diff, dp,
                config.learning_rate);
        descend(table, h2, tr.relation, t2, neg_diff, dn,
                -config.learning_rate);
      }
    }
    for (std::size_t e = 0; e < n_entities; ++e) normalize(table.entity(e));
    result.epoch_mean_loss.push_back(total / pairs);
  }
  return result;
}

double transe_distance(const EmbeddingTable& table, std::size_t head,
                       std::size_t relation, std::size_t tail) {
  std::vector<double> diff(table.dim());
  return residual(table, head, relation, tail, diff);
}

double euclidean(std::span<const float> a, std::span<const float> b) {
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = static_cast<double>(a[i]) - b[i];
    sq += diff * diff;
  }
  return std::sqrt(sq);
}

void write_embedding(const std::filesystem::path& path,
                     const EmbeddingTable& table) {
  std::string out =
      fmt::format("#entities {} {}\n", table.entity_count(), table.dim());
  for (std::size_t i = 0; i < table.entity_count(); ++i) {
    out += table.entity_names()[i] + join_vector(table.entity(i)) + '\n';
  }
  out += fmt::format("#relations {} {}\n", table.relation_count(), table.dim());
  for (std::size_t r = 0; r < table.relation_count(); ++r) {
    out += table.relation_names()[r] + join_vector(table.relation(r)) + '\n';
  }
  write_text_file(path, out);
}

EmbeddingTable read_embedding(const std::filesystem::path& path) {
  std::vector<std::string> names[2];
  std::vector<float> vectors[2];
  int section = -1;
  std::uint32_t dim = 0;
  for (const auto& line : read_lines(path)) {
    if (line.empty()) continue;
    if (line.front() == '#') {
      auto f = split_fields(line, ' ');
      if (f.size() == 3 && (f[0] == "#entities" || f[0] == "#relations")) {
        section = f[0] == "#entities" ? 0 : 1;
        dim = parse_u32(f[2]);
      }
      continue;
    }
    if (section < 0) {
      throw Error(ErrorCode::kParseError, kModule,
                  fmt::format("'{}': vector row before a section header",
                              path.string()));
    }
    auto f = split_fields(line);
    if (f.size() != dim + 1) {
      throw Error(ErrorCode::kDimensionMismatch, kModule,
                  fmt::format("'{}': row '{}' has {} values, expected {}",
                              path.string(), f[0], f.size() - 1, dim));
    }
    names[section].emplace_back(f[0]);
    for (std::size_t i = 1; i < f.size(); ++i) {
      vectors[section].push_back(parse_float(f[i]));
    }
  }
  return EmbeddingTable(dim, std::move(names[0]), std::move(vectors[0]),
                        std::move(names[1]), std::move(vectors[1]));
}

MedoidResult pam(std::span<const double> distances, std::size_t n,
                 std::size_t k) {
  if (k == 0) {
    throw Error(ErrorCode::kInvalidArgument, kModule, "k must be at least 1");
  }
  if (k > n) {
    throw Error(ErrorCode::kKTooLarge, kModule,
                fmt::format("k = {} exceeds the {} points", k, n));
  }
  if (distances.size() != n * n) {
    throw Error(ErrorCode::kDimensionMismatch, kModule,
                "distance matrix is not n x n");
  }
  auto dist = [&](std::size_t i, std::size_t j) { return distances[i * n + j]; };
  constexpr double kInf = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> medoids;
  std::vector<bool> is_medoid(n, false);
  std::vector<double> nearest(n, kInf);

  // BUILD
  while (medoids.size() < k) {
    std::size_t best = n;
    double best_gain = -kInf;
    for (std::size_t c = 0; c < n; ++c) {
      if (is_medoid[c]) continue;
      double gain = 0.0;
      if (medoids.empty()) {
        for (std::size_t j = 0; j < n; ++j) gain -= dist(c, j);
      } else {
        for (std::size_t j = 0; j < n; ++j) {
          gain += std::max(0.0, nearest[j] - dist(c, j));
        }
      }
      if (gain > best_gain) {
        best_gain = gain;
        best = c;
      }
    }
    medoids.push_back(best);
    is_medoid[best] = true;
    for (std::size_t j = 0; j < n; ++j) {
      nearest[j] = std::min(nearest[j], dist(best, j));
    }
  }

  // Nearest and second-nearest medoid distance of every point.
  std::vector<std::size_t> first(n);
  std::vector<double> d1(n);
  std::vector<double> d2(n);
  auto refresh = [&] {
    for (std::size_t j = 0; j < n; ++j) {
      d1[j] = kInf;
      d2[j] = kInf;
      for (std::size_t m = 0; m < medoids.size(); ++m) {
        const double dj = medoids[m] == j ? 0.0 : dist(medoids[m], j);
        if (dj < d1[j]) {
          d2[j] = d1[j];
          d1[j] = dj;
          first[j] = m;
        } else if (dj < d2[j]) {
          d2[j] = dj;
        }
      }
    }
  };
  refresh();

  // SWAP
  struct Swap {
    double delta = 0.0;
    std::size_t slot = 0;
    std::size_t candidate = 0;
  };
  const std::size_t max_rounds = 100 * k + 100;
  for (std::size_t round = 0; round < max_rounds; ++round) {
    std::vector<Swap> per_slot(medoids.size());
    parallel_for(medoids.size(), [&](std::size_t m) {
      Swap best{0.0, m, n};
      for (std::size_t o = 0; o < n; ++o) {
        if (is_medoid[o]) continue;
        double delta = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          const double dj = dist(o, j);
          const double now = first[j] == m ? std::min(d2[j], dj)
                                           : std::min(d1[j], dj);
          delta += now - d1[j];
        }
        if (delta < best.delta) best = {delta, m, o};
      }
      per_slot[m] = best;
    });
    Swap chosen{0.0, 0, n};
    for (const auto& s : per_slot) {
      if (s.candidate != n && s.delta < chosen.delta) chosen = s;
    }
    // Stop on no improvement, ignoring rounding-level deltas.
    double scale = 0.0;
    for (double x : d1) scale += x;
    if (chosen.candidate == n || chosen.delta > -1e-12 * (1.0 + scale)) break;
    is_medoid[medoids[chosen.slot]] = false;
    is_medoid[chosen.candidate] = true;
    medoids[chosen.slot] = chosen.candidate;
    refresh();
  }

  std::sort(medoids.begin(), medoids.end());
  refresh();
  MedoidResult out;
  out.medoids = medoids;
  out.assignment.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    // A medoid always owns itself, even if another medoid sits at distance 0.
    std::size_t slot = first[j];
    for (std::size_t m = 0; m < medoids.size(); ++m) {
      if (medoids[m] == j) slot = m;
    }
    out.assignment[j] = slot;
    out.cost += medoids[slot] == j ? 0.0 : dist(medoids[slot], j);
  }
  return out;
}

std::map<ConceptId, ConceptId> ConceptClustering::representative_map() const {
  std::map<ConceptId, ConceptId> out;
  for (const auto& [c, cluster] : cluster_of) out[c] = representatives[cluster];
  return out;
}

ConceptClustering cluster_concepts(const ConceptSet& concepts,
                                   const EmbeddingTable& table,
                                   const ConceptAlignment& alignment,
                                   std::uint32_t k) {
  if (k == 0) {
    throw Error(ErrorCode::kInvalidArgument, kModule, "k must be at least 1");
  }
  if (k > concepts.size()) {
    throw Error(ErrorCode::kKTooLarge, kModule,
                fmt::format("k = {} exceeds the {} concepts", k,
                            concepts.size()));
  }
  const std::vector<ConceptId> ids(concepts.begin(), concepts.end());
  std::vector<std::size_t> rows;
  rows.reserve(ids.size());
  for (ConceptId c : ids) {
    auto it = alignment.by_concept.find(c);
    if (it == alignment.by_concept.end()) {
      throw Error(ErrorCode::kUnalignedConcept, kModule,
                  fmt::format("concept {} has no knowledge-graph node", c));
    }
    auto row = table.entity_index(it->second.node);
    if (!row) {
      throw Error(ErrorCode::kUnalignedConcept, kModule,
                  fmt::format("concept {} aligns to '{}' which has no "
                              "embedding",
                              c, it->second.node));
    }
    rows.push_back(*row);
  }

  const std::size_t n = ids.size();
  std::vector<double> distances(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = euclidean(table.entity(rows[i]), table.entity(rows[j]));
      distances[i * n + j] = d;
      distances[j * n + i] = d;
    }
  }
  const auto result = pam(distances, n, k);

  ConceptClustering out;
  out.k = k;
  out.cost = result.cost;
  out.clusters.resize(k);
  for (std::size_t m = 0; m < k; ++m) {
    out.representatives.push_back(ids[result.medoids[m]]);
  }
  for (std::size_t j = 0; j < n; ++j) {
    out.clusters[result.assignment[j]].insert(ids[j]);
    out.cluster_of[ids[j]] = result.assignment[j];
  }
  return out;
}

ConceptFilterResult concept_filter(const ConceptSet& scene_concepts,
                                   const ConceptClustering& clustering) {
  ConceptFilterResult out;
  for (ConceptId c : scene_concepts) {
    auto it = clustering.cluster_of.find(c);
    if (it == clustering.cluster_of.end()) {
      throw Error(ErrorCode::kUnclusteredConcept, kModule,
                  fmt::format("concept {} is not in any cluster", c));
    }
    const ConceptId rep = clustering.representatives[it->second];
    out.relabel[c] = rep;
    out.filtered.insert(rep);
  }
  return out;
}

SegmentationMask relabel_mask(const SegmentationMask& mask,
                              const std::map<ConceptId, ConceptId>& relabel) {
  SegmentationMask out = mask;
  for (auto& c : out.data) {
    if (auto it = relabel.find(c); it != relabel.end()) c = it->second;
  }
  return out;
}

double iou_gain_percent(double baseline, double clustered) {
  if (baseline == 0.0) {
    throw Error(ErrorCode::kZeroBaseline, kModule,
                "baseline interpretability score is zero");
  }
  return 100.0 * (clustered - baseline) / baseline;
}

double mean_best_iou(std::span<const double> best_per_unit) {
  if (best_per_unit.empty()) return 0.0;
  double sum = 0.0;
  for (double v : best_per_unit) sum += v;
  return sum / static_cast<double>(best_per_unit.size());
}

IouGain iou_gain(const DatasetManifest& dataset,
                 const UnitThresholds& thresholds,
                 const ConceptClustering& clustering) {
  IouGain out;
  out.baseline = mean_best_iou(dataset_best_iou(dataset, thresholds));
  out.clustered = mean_best_iou(
      dataset_best_iou(dataset, thresholds, clustering.representative_map()));
  out.gain_percent = iou_gain_percent(out.baseline, out.clustered);
  return out;
}

void write_clustering(const std::filesystem::path& path,
                      const ConceptClustering& clustering) {
  std::string out;
  for (const auto& [c, cluster] : clustering.cluster_of) {
    out += fmt::format("{}\t{}\t{}\n", c, cluster,
                       clustering.representatives[cluster]);
  }
  write_text_file(path, out);
}

ConceptClustering read_clustering(const std::filesystem::path& path) {
  ConceptClustering out;
  std::map<std::size_t, ConceptId> reps;
  for (const auto& line : read_lines(path)) {
    if (line.empty() || line.front() == '#') continue;
    auto f = split_fields(line);
    if (f.size() != 3) {
      throw Error(ErrorCode::kParseError, kModule,
                  fmt::format("'{}': malformed clustering row '{}'",
                              path.string(), line));
    }
    const ConceptId c = parse_u32(f[0]);
    const std::size_t cluster = parse_u32(f[1]);
    const ConceptId rep = parse_u32(f[2]);
    auto [it, inserted] = reps.emplace(cluster, rep);
    if (!inserted && it->second != rep) {
      throw Error(ErrorCode::kParseError, kModule,
                  fmt::format("'{}': cluster {} has two representatives",
                              path.string(), cluster));
    }
    out.cluster_of[c] = cluster;
  }
  out.k = static_cast<std::uint32_t>(reps.size());
  out.clusters.resize(reps.size());
  for (const auto& [cluster, rep] : reps) {
    if (cluster >= reps.size()) {
      throw Error(ErrorCode::kParseError, kModule,
                  fmt::format("'{}': cluster ids must be dense",
                              path.string()));
    }
    out.representatives.push_back(rep);
  }
  for (const auto& [c, cluster] : out.cluster_of) out.clusters[cluster].insert(c);
  return out;
}

}  // namespace neurodissect
