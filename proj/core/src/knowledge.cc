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

#include "neurodissect/knowledge.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <utility>

#include <fmt/core.h>

#include "neurodissect/error.h"
#include "neurodissect/io.h"

namespace neurodissect {
namespace {

constexpr char kModule[] = "knowledge";

std::string format_params(const std::optional<IccParameters>& params) {
  if (!params) return "-";
  return fmt::format("P_c={};P_sc={};k={}", format_double(params->p_c),
                     format_double(params->p_sc), params->k);
}

std::optional<IccParameters> parse_params(std::string_view text) {
  if (text == "-") return std::nullopt;
  IccParameters p;
  for (auto field : split_fields(text, ';')) {
    auto eq = field.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::kParseError, kModule,
                  fmt::format("malformed parameter '{}'", field));
    }
    auto key = field.substr(0, eq);
    auto value = field.substr(eq + 1);
    if (key == "P_c") {
      p.p_c = parse_double(value);
    } else if (key == "P_sc") {
      p.p_sc = parse_double(value);
    } else if (key == "k") {
      p.k = parse_u32(value);
    } else {
      throw Error(ErrorCode::kParseError, kModule,
                  fmt::format("unknown parameter '{}'", key));
    }
  }
  return p;
}

}  // namespace

KnowledgeGraph::KnowledgeGraph(std::vector<Triple> triples) {
  std::set<Triple> seen;
  for (auto& t : triples) {
    t.head = normalize_name(t.head);
    t.relation = normalize_name(t.relation);
    t.tail = normalize_name(t.tail);
    if (t.head.empty() || t.relation.empty() || t.tail.empty()) {
      throw Error(ErrorCode::kParseError, kModule,
                  "triple with an empty head, relation or tail");
    }
    if (!seen.insert(t).second) continue;
    IndexedTriple it{intern_node(t.head), intern_relation(t.relation),
                     intern_node(t.tail)};
    adjacency_[it.head].push_back({it.tail, it.relation});
    if (it.tail != it.head) adjacency_[it.tail].push_back({it.head, it.relation});
    indexed_.push_back(it);
    triples_.push_back(std::move(t));
  }
}

std::size_t KnowledgeGraph::intern_node(const std::string& name) {
  auto [it, inserted] = node_ids_.try_emplace(name, nodes_.size());
  if (inserted) {
    nodes_.push_back(name);
    adjacency_.emplace_back();
  }
  return it->second;
}

std::size_t KnowledgeGraph::intern_relation(const std::string& name) {
  auto [it, inserted] = relation_ids_.try_emplace(name, relations_.size());
  if (inserted) relations_.push_back(name);
  return it->second;
}

std::optional<std::size_t> KnowledgeGraph::node_index(
    std::string_view name) const {
  auto it = node_ids_.find(normalize_name(name));
  if (it == node_ids_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> KnowledgeGraph::relation_index(
    std::string_view name) const {
  auto it = relation_ids_.find(normalize_name(name));
  if (it == relation_ids_.end()) return std::nullopt;
  return it->second;
}

KnowledgeGraph read_knowledge_graph(const std::filesystem::path& path) {
  std::vector<Triple> triples;
  for (const auto& line : read_lines(path)) {
    if (line.empty() || line.front() == '#') continue;
    auto f = split_fields(line);
    if (f.size() != 3) {
      throw Error(ErrorCode::kParseError, kModule,
                  fmt::format("'{}': expected head<TAB>relation<TAB>tail, got "
                              "'{}'",
                              path.string(), line));
    }
    triples.push_back({std::string(f[0]), std::string(f[1]), std::string(f[2])});
  }
  return KnowledgeGraph(std::move(triples));
}

void write_knowledge_graph(const std::filesystem::path& path,
                           const KnowledgeGraph& kg) {
  std::string out;
  for (const auto& t : kg.triples()) {
    out += fmt::format("{}\t{}\t{}\n", t.head, t.relation, t.tail);
  }
  write_text_file(path, out);
}

double name_similarity(std::string_view a_raw, std::string_view b_raw) {
  const auto a = normalize_name(a_raw);
  const auto b = normalize_name(b_raw);
  const std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 1.0;
  std::vector<std::size_t> prev(b.size() + 1);
  std::vector<std::size_t> cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t subst = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, subst});
    }
    std::swap(prev, cur);
  }
  return 1.0 - static_cast<double>(prev[b.size()]) /
                   static_cast<double>(longest);
}

std::optional<AlignedNode> align_name(std::string_view name,
                                      const KnowledgeGraph& kg,
                                      double fuzzy_floor) {
  const auto normalized = normalize_name(name);
  if (kg.node_index(normalized)) {
    return AlignedNode{normalized, MatchKind::kExact, 1.0};
  }
  std::optional<AlignedNode> best;
  for (const auto& node : kg.nodes()) {
    const double s = name_similarity(normalized, node);
    if (s < fuzzy_floor) continue;
    if (!best || s > best->similarity ||
        (s == best->similarity && node < best->node)) {
      best = AlignedNode{node, MatchKind::kFuzzy, s};
    }
  }
  return best;
}

const AlignedNode& ConceptAlignment::at(ConceptId id) const {
  auto it = by_concept.find(id);
  if (it == by_concept.end()) {
    throw Error(ErrorCode::kUnalignedConcept, kModule,
                fmt::format("concept {} has no knowledge-graph node", id));
  }
  return it->second;
}

ConceptAlignment align_concepts(const ConceptVocab& vocab,
                                const KnowledgeGraph& kg, double fuzzy_floor) {
  ConceptAlignment out;
  for (const auto& e : vocab.entries()) {
    if (auto node = align_name(e.name, kg, fuzzy_floor)) {
      out.by_concept.emplace(e.id, std::move(*node));
    }
  }
  return out;
}

void write_alignment(const std::filesystem::path& path,
                     const ConceptAlignment& alignment,
                     const ConceptVocab& vocab) {
  std::string out;
  for (const auto& [id, node] : alignment.by_concept) {
    out += fmt::format("{}\t{}\t{}\t{}\t{}\n", id, vocab.name(id), node.node,
                       node.kind == MatchKind::kExact ? "exact" : "fuzzy",
                       format_double(node.similarity));
  }
  write_text_file(path, out);
}

ConceptSet related_concepts(std::string_view scene_name,
                            const KnowledgeGraph& kg,
                            const ConceptAlignment& alignment,
                            const RelatedConceptOptions& options) {
  if (options.hops != 1 && options.hops != 2) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                fmt::format("hops must be 1 or 2, got {}", options.hops));
  }
  auto scene_node = align_name(scene_name, kg, options.fuzzy_floor);
  if (!scene_node) {
    throw Error(ErrorCode::kSceneNotInKG, kModule,
                fmt::format("scene '{}' has no knowledge-graph node",
                            scene_name));
  }
  std::vector<bool> allowed(kg.relations().size(), options.relations.empty());
  for (const auto& r : options.relations) {
    if (auto idx = kg.relation_index(r)) allowed[*idx] = true;
  }

  const std::size_t start = *kg.node_index(scene_node->node);
  std::vector<std::uint32_t> depth(kg.nodes().size(), UINT32_MAX);
  depth[start] = 0;
  std::deque<std::size_t> queue{start};
  while (!queue.empty()) {
    const auto n = queue.front();
    queue.pop_front();
    if (depth[n] == options.hops) continue;
    for (const auto& e : kg.neighbors(n)) {
      if (!allowed[e.relation] || depth[e.node] != UINT32_MAX) continue;
      depth[e.node] = depth[n] + 1;
      queue.push_back(e.node);
    }
  }

  ConceptSet out;
  for (const auto& [id, node] : alignment.by_concept) {
    auto idx = kg.node_index(node.node);
    if (!idx || *idx == start) continue;
    if (depth[*idx] != UINT32_MAX) out.insert(out.end(), id);
  }
  return out;
}

ConceptSet SceneCoverage::concepts() const {
  ConceptSet out;
  for (const auto& [c, n] : images_with) out.insert(out.end(), c);
  return out;
}

double SceneCoverage::fraction(ConceptId concept_id) const {
  if (image_count == 0) return 0.0;
  auto it = images_with.find(concept_id);
  if (it == images_with.end()) return 0.0;
  return static_cast<double>(it->second) / static_cast<double>(image_count);
}

bool SceneCoverage::covers(ConceptId concept_id, double percentage) const {
  auto it = images_with.find(concept_id);
  const double n = it == images_with.end() ? 0.0 : it->second;
  return n * 100.0 >= percentage * static_cast<double>(image_count);
}

std::vector<SceneCoverage> scene_coverage(
    std::size_t scene_count, std::span<const SceneId> image_scenes,
    std::span<const ConceptSet> image_concepts) {
  if (image_scenes.size() != image_concepts.size()) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                "one concept set per image is required");
  }
  std::vector<SceneCoverage> out(scene_count);
  for (std::size_t i = 0; i < image_scenes.size(); ++i) {
    if (image_scenes[i] >= scene_count) {
      throw Error(ErrorCode::kVocabMismatch, kModule,
                  fmt::format("scene id {} out of range", image_scenes[i]));
    }
    auto& cov = out[image_scenes[i]];
    ++cov.image_count;
    for (ConceptId c : image_concepts[i]) ++cov.images_with[c];
  }
  return out;
}

std::vector<SceneCoverage> scene_coverage(const DatasetManifest& dataset) {
  std::vector<SceneId> scenes;
  scenes.reserve(dataset.images.size());
  for (const auto& r : dataset.images) scenes.push_back(r.scene_id);
  return scene_coverage(dataset.scene_vocab.size(), scenes,
                        dataset.image_concepts);
}

ConceptSet count_set(const SceneCoverage& coverage, double percentage) {
  if (!(percentage >= 0.0 && percentage <= 100.0)) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                fmt::format("percentage {} outside [0, 100]", percentage));
  }
  if (coverage.image_count == 0) {
    throw Error(ErrorCode::kNoImagesForScene, kModule,
                "scene has no images");
  }
  ConceptSet out;
  for (const auto& [c, n] : coverage.images_with) {
    if (coverage.covers(c, percentage)) out.insert(out.end(), c);
  }
  return out;
}

ConceptSet scount_set(const SceneCoverage& coverage, const ConceptSet& pool,
                      double percentage) {
  if (coverage.image_count == 0) {
    throw Error(ErrorCode::kNoImagesForScene, kModule,
                "scene has no images");
  }
  ConceptSet out;
  for (ConceptId c : pool) {
    if (coverage.images_with.count(c) && coverage.covers(c, percentage)) {
      out.insert(out.end(), c);
    }
  }
  return out;
}

std::vector<double> percentage_grid(double grid_step) {
  if (!(grid_step > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                fmt::format("grid step must be positive, got {}", grid_step));
  }
  std::vector<double> out;
  for (std::size_t i = 0;; ++i) {
    const double p = 100.0 - static_cast<double>(i) * grid_step;
    if (p < -1e-9) break;
    out.push_back(std::max(p, 0.0));
  }
  return out;
}

bool pairwise_distinct(std::span<const SceneId> scenes,
                       const ScenePercentageSets& sets, double percentage) {
  std::vector<ConceptSet> at;
  at.reserve(scenes.size());
  for (SceneId s : scenes) at.push_back(sets(s, percentage));
  std::sort(at.begin(), at.end());
  return std::adjacent_find(at.begin(), at.end()) == at.end();
}

std::optional<double> find_distinguishing_percentage(
    std::span<const SceneId> scenes, const ScenePercentageSets& sets,
    double grid_step) {
  if (scenes.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                "at least two scenes are needed to distinguish them");
  }
  for (double p : percentage_grid(grid_step)) {
    if (pairwise_distinct(scenes, sets, p)) return p;
  }
  return std::nullopt;
}

std::string_view core_kind_name(CoreConceptKind kind) {
  return kind == CoreConceptKind::kSCC ? "SCC" : "ICC";
}

std::optional<CoreConceptKind> parse_core_kind(std::string_view name) {
  if (name == "SCC" || name == "scc") return CoreConceptKind::kSCC;
  if (name == "ICC" || name == "icc") return CoreConceptKind::kICC;
  return std::nullopt;
}

std::string_view provenance_name(Provenance provenance) {
  switch (provenance) {
    case Provenance::kKgRelated: return "kg_related";
    case Provenance::kDatasetTopk: return "dataset_topk";
    case Provenance::kBoth: return "both";
  }
  return "kg_related";
}

std::optional<Provenance> parse_provenance(std::string_view name) {
  for (auto p : {Provenance::kKgRelated, Provenance::kDatasetTopk,
                 Provenance::kBoth}) {
    if (provenance_name(p) == name) return p;
  }
  return std::nullopt;
}

ConceptSet CoreConceptSet::ids() const {
  ConceptSet out;
  for (const auto& [c, p] : concepts) out.insert(out.end(), c);
  return out;
}

CoreConceptSet scc(SceneId scene, const ConceptSet& related,
                   const SceneCoverage& coverage) {
  if (coverage.image_count == 0) {
    throw Error(ErrorCode::kNoImagesForScene, kModule,
                fmt::format("scene {} has no images", scene));
  }
  CoreConceptSet out;
  out.scene_id = scene;
  out.kind = CoreConceptKind::kSCC;
  for (ConceptId c : set_intersection(related, coverage.concepts())) {
    out.concepts.emplace_hint(out.concepts.end(), c, Provenance::kKgRelated);
  }
  return out;
}

ConceptSet top_k_of_count(const SceneCoverage& coverage, double p_c,
                          std::uint32_t k) {
  const auto counted = count_set(coverage, p_c);
  std::vector<std::pair<std::size_t, ConceptId>> ranked;
  for (ConceptId c : counted) ranked.emplace_back(coverage.images_with.at(c), c);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  ConceptSet out;
  for (std::size_t i = 0; i < ranked.size() && i < k; ++i) {
    out.insert(ranked[i].second);
  }
  return out;
}

const CoreConceptSet& IccResult::for_scene(SceneId scene) const {
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    if (scenes[i] == scene) return sets[i];
  }
  throw Error(ErrorCode::kNoImagesForScene, kModule,
              fmt::format("no ICC for scene {} (it has no images)", scene));
}

IccResult icc(std::span<const SceneCoverage> coverage,
              std::span<const ConceptSet> related, std::uint32_t k,
              double grid_step) {
  if (related.size() != coverage.size()) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                "one related-concept set per scene is required");
  }
  IccResult out;
  out.parameters.k = k;
  for (SceneId s = 0; s < coverage.size(); ++s) {
    if (coverage[s].image_count > 0) out.scenes.push_back(s);
  }

  auto p_c = find_distinguishing_percentage(
      out.scenes,
      [&](SceneId s, double p) { return count_set(coverage[s], p); },
      grid_step);
  if (!p_c) {
    throw Error(ErrorCode::kIndistinguishableScenes, kModule,
                "no percentage separates the per-scene Count sets");
  }
  out.parameters.p_c = *p_c;

  std::map<SceneId, ConceptSet> pools;
  std::map<SceneId, ConceptSet> kg_part;
  std::map<SceneId, ConceptSet> topk_part;
  for (SceneId s : out.scenes) {
    kg_part[s] = set_intersection(related[s], coverage[s].concepts());
    topk_part[s] = top_k_of_count(coverage[s], *p_c, k);
    pools[s] = set_union(kg_part[s], topk_part[s]);
  }

  auto p_sc = find_distinguishing_percentage(
      out.scenes,
      [&](SceneId s, double p) { return scount_set(coverage[s], pools[s], p); },
      grid_step);
  if (!p_sc) {
    throw Error(ErrorCode::kIndistinguishableScenes, kModule,
                "no percentage separates the per-scene SCount sets");
  }
  out.parameters.p_sc = *p_sc;

  for (SceneId s : out.scenes) {
    CoreConceptSet set;
    set.scene_id = s;
    set.kind = CoreConceptKind::kICC;
    set.parameters = out.parameters;
    for (ConceptId c : scount_set(coverage[s], pools[s], *p_sc)) {
      const bool in_kg = kg_part[s].count(c) > 0;
      const bool in_topk = topk_part[s].count(c) > 0;
      set.concepts.emplace(c, in_kg && in_topk ? Provenance::kBoth
                              : in_kg          ? Provenance::kKgRelated
                                               : Provenance::kDatasetTopk);
    }
    out.sets.push_back(std::move(set));
    out.pools.push_back(pools[s]);
  }
  return out;
}

void write_core_concepts(const std::filesystem::path& path,
                         std::span<const CoreConceptSet> sets) {
  std::string out;
  for (const auto& set : sets) {
    const auto params = format_params(set.parameters);
    out += fmt::format("#set\t{}\t{}\t{}\n", set.scene_id,
                       core_kind_name(set.kind), params);
    for (const auto& [c, p] : set.concepts) {
      out += fmt::format("{}\t{}\t{}\t{}\t{}\n", set.scene_id,
                         core_kind_name(set.kind), c, provenance_name(p),
                         params);
    }
  }
  write_text_file(path, out);
}

std::vector<CoreConceptSet> read_core_concepts(
    const std::filesystem::path& path) {
  std::vector<CoreConceptSet> out;
  auto find_or_add = [&](SceneId scene, CoreConceptKind kind,
                         std::string_view params) -> CoreConceptSet& {
    for (auto& s : out) {
      if (s.scene_id == scene && s.kind == kind) return s;
    }
    auto& s = out.emplace_back();
    s.scene_id = scene;
    s.kind = kind;
    s.parameters = parse_params(params);
    return s;
  };
  auto kind_of = [&](std::string_view text) {
    auto kind = parse_core_kind(text);
    if (!kind) {
      throw Error(ErrorCode::kParseError, kModule,
                  fmt::format("'{}': unknown core-concept kind '{}'",
                              path.string(), text));
    }
    return *kind;
  };
  for (const auto& line : read_lines(path)) {
    if (line.empty()) continue;
    auto f = split_fields(line);
    if (f[0] == "#set") {
      if (f.size() != 4) {
        throw Error(ErrorCode::kParseError, kModule,
                    fmt::format("'{}': malformed set line '{}'", path.string(),
                                line));
      }
      find_or_add(parse_u32(f[1]), kind_of(f[2]), f[3]);
      continue;
    }
    if (line.front() == '#') continue;
    if (f.size() != 5) {
      throw Error(ErrorCode::kParseError, kModule,
                  fmt::format("'{}': expected 5 fields in '{}'", path.string(),
                              line));
    }
    auto provenance = parse_provenance(f[3]);
    if (!provenance) {
      throw Error(ErrorCode::kParseError, kModule,
                  fmt::format("'{}': unknown provenance '{}'", path.string(),
                              f[3]));
    }
    auto& set = find_or_add(parse_u32(f[0]), kind_of(f[1]), f[4]);
    set.concepts[parse_u32(f[2])] = *provenance;
  }
  return out;
}

}  // namespace neurodissect
