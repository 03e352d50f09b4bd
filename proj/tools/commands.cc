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

#include "commands.h"

#include <algorithm>
#include <map>
#include <ostream>
#include <utility>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <fmt/ostream.h>

#include "neurodissect/error.h"
#include "neurodissect/explanation.h"
#include "neurodissect/io.h"
#include "neurodissect/manifest.h"
#include "neurodissect/parallel.h"

namespace neurodissect::cli {
namespace {

constexpr char kModule[] = "cli";

// Paths in config echoes are written relative to the output directory so
// two runs into sibling trees echo identically.
std::string echo_path(const fs::path& p, const fs::path& base) {
  const auto a = fs::absolute(p).lexically_normal();
  const auto r = a.lexically_relative(fs::absolute(base).lexically_normal());
  return r.empty() ? a.generic_string() : r.generic_string();
}

class ConfigEcho {
 public:
  ConfigEcho(std::string command, fs::path out)
      : command_(std::move(command)), out_(std::move(out)) {}

  void add(const std::string& key, const std::string& value) {
    entries_.emplace_back(key, value);
  }
  void add(const std::string& key, double value) {
    add(key, format_double(value));
  }
  void add_path(const std::string& key, const fs::path& p) {
    add(key, echo_path(p, out_));
  }
  void write() const {
    std::string text = fmt::format("#command\t{}\n", command_);
    for (const auto& [k, v] : entries_) text += fmt::format("{}\t{}\n", k, v);
    write_text_file(out_ / "config.txt", text);
  }

 private:
  std::string command_;
  fs::path out_;
  std::vector<std::pair<std::string, std::string>> entries_;
};

template <typename T>
std::string join(const std::vector<T>& items, auto&& name) {
  std::string out;
  for (const auto& item : items) {
    if (!out.empty()) out += ',';
    out += name(item);
  }
  return out;
}

std::string concept_names(const ConceptSet& set, const ConceptVocab& vocab) {
  if (set.empty()) return "(none)";
  std::string out;
  for (ConceptId c : set) {
    if (!out.empty()) out += ", ";
    out += vocab.contains(c) ? vocab.name(c) : fmt::format("#{}", c);
  }
  return out;
}

std::vector<PredictionRecord> prediction_records(
    const DatasetManifest& m, const std::vector<std::vector<float>>& features) {
  std::vector<PredictionRecord> out;
  out.reserve(m.images.size());
  for (std::size_t i = 0; i < m.images.size(); ++i) {
    out.push_back({m.images[i].image_id, m.images[i].scene_id,
                   effective_prediction(m, i, features[i])});
  }
  return out;
}

std::map<ImageId, NeuronConceptScores> scores_by_image(
    const fs::path& path, const DatasetManifest& m) {
  std::map<ImageId, NeuronConceptScores> out;
  for (auto& s : read_scores(path)) {
    if (s.per_unit.size() != m.units) {
      throw Error(ErrorCode::kDimensionMismatch, kModule,
                  fmt::format("scores cover {} units, the manifest has {}",
                              s.per_unit.size(), m.units));
    }
    const ImageId id = s.image_id;
    out.emplace(id, std::move(s));
  }
  for (const auto& r : m.images) {
    if (!out.count(r.image_id)) {
      throw Error(ErrorCode::kVocabMismatch, kModule,
                  fmt::format("'{}' has no scores for image {}", path.string(),
                              r.image_id));
    }
  }
  return out;
}

std::map<ImageId, LearnedConcepts> learned_by_image(
    const std::map<ImageId, NeuronConceptScores>& scores,
    SelectionStrategy strategy) {
  std::map<ImageId, LearnedConcepts> out;
  for (const auto& [id, s] : scores) {
    out.emplace(id, select_learned_concepts(s, strategy));
  }
  return out;
}

// Core concepts of one kind indexed by scene id; scenes without a set stay
// empty and unmarked.
struct CoreTable {
  std::vector<ConceptSet> by_scene;
  std::vector<bool> present;
};

std::map<CoreConceptKind, CoreTable> load_core(const fs::path& path,
                                               std::size_t scene_count) {
  std::map<CoreConceptKind, CoreTable> out;
  for (const auto& set : read_core_concepts(path)) {
    if (set.scene_id >= scene_count) {
      throw Error(ErrorCode::kVocabMismatch, kModule,
                  fmt::format("'{}' names scene {} outside the vocabulary",
                              path.string(), set.scene_id));
    }
    auto& table = out[set.kind];
    table.by_scene.resize(scene_count);
    table.present.resize(scene_count, false);
    table.by_scene[set.scene_id] = set.ids();
    table.present[set.scene_id] = true;
  }
  return out;
}

const CoreTable& core_of_kind(const std::map<CoreConceptKind, CoreTable>& all,
                              CoreConceptKind kind, const fs::path& path) {
  auto it = all.find(kind);
  if (it == all.end()) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                fmt::format("'{}' holds no {} sets", path.string(),
                            core_kind_name(kind)));
  }
  return it->second;
}

std::string percent(double v) { return fmt::format("{:.2f}", v); }

}  // namespace

void cmd_synth(const SynthOptions& o, std::ostream& log) {
  const auto summary = write_synth_dataset(o.out, o.config);
  ConfigEcho echo("synth", o.out);
  const auto& c = o.config;
  echo.add("seed", std::to_string(c.seed));
  echo.add("scenes", std::to_string(c.scenes));
  echo.add("images_per_scene", std::to_string(c.images_per_scene));
  echo.add("units", std::to_string(c.units));
  echo.add("grid", fmt::format("{}x{}", c.height, c.width));
  echo.add("mask_scale", std::to_string(c.mask_scale));
  echo.add("forge_fraction", c.forge_fraction);
  echo.add("test_fraction", c.test_fraction);
  echo.write();
  fmt::print(log, "synth: {} images, {} scenes, {} units -> {}\n",
             summary.images, c.scenes, c.units, summary.manifest.string());
}

void cmd_dissect(const DissectOptions& o, std::ostream& log) {
  const auto m = load_manifest(o.manifest);
  for (const auto& w : m.warnings) fmt::print(log, "warning: {}\n", w);
  const auto thresholds = compute_thresholds(m, o.quantile);
  const auto features = all_features(m);
  std::vector<SceneId> predictions;
  for (std::size_t i = 0; i < m.images.size(); ++i) {
    predictions.push_back(effective_prediction(m, i, features[i]));
  }
  const auto scores = dissect_dataset(m, thresholds, o.source, predictions);

  const std::vector<SelectionStrategy> strategies = {
      SelectionStrategy::kWholeLayer, SelectionStrategy::kHighestIoU,
      SelectionStrategy::kMinMaxThreshold};
  std::vector<LearnedConcepts> learned;
  std::string summary = fmt::format(
      "images\t{}\nunits\t{}\nquantile\t{}\nscene_source\t{}\n\n", m.images.size(),
      m.units, format_double(o.quantile), scene_source_name(o.source));
  summary += "strategy\tmean_lc_size\tmean_concepts_per_unit\n";
  for (auto strategy : strategies) {
    double lc_total = 0.0;
    double unit_total = 0.0;
    for (const auto& s : scores) {
      auto lc = select_learned_concepts(s, strategy);
      lc_total += static_cast<double>(lc.all.size());
      for (const auto& u : lc.per_unit) unit_total += static_cast<double>(u.size());
      learned.push_back(std::move(lc));
    }
    const double n = std::max<double>(1.0, static_cast<double>(scores.size()));
    summary += fmt::format("{}\t{:.4f}\t{:.4f}\n", strategy_name(strategy),
                           lc_total / n,
                           unit_total / (n * std::max(1u, m.units)));
  }

  // Dataset-level label per unit: the concept with the highest mean IoU.
  summary += "\nunit\tthreshold\ttop_concept\tmean_iou\n";
  for (UnitIndex t = 0; t < m.units; ++t) {
    std::map<ConceptId, double> total;
    for (const auto& s : scores) {
      for (const auto& [c, v] : s.per_unit[t]) total[c] += v;
    }
    ConceptId best = kNoConcept;
    double best_v = 0.0;
    for (const auto& [c, v] : total) {
      if (v > best_v) best = c, best_v = v;
    }
    const double n = std::max<double>(1.0, static_cast<double>(scores.size()));
    summary += fmt::format(
        "{}\t{}\t{}\t{:.4f}\n", t, format_float(thresholds.thresholds[t]),
        best == kNoConcept ? "-" : m.concept_vocab.name(best), best_v / n);
  }

  write_thresholds(o.out / "thresholds.tsv", thresholds);
  write_scores(o.out / "scores.tsv", scores);
  write_learned_concepts(o.out / "lc.tsv", learned);
  write_text_file(o.out / "summary.txt", summary);
  ConfigEcho echo("dissect", o.out);
  echo.add_path("manifest", o.manifest);
  echo.add("quantile", o.quantile);
  echo.add("scene_source", std::string(scene_source_name(o.source)));
  echo.write();
  fmt::print(log, "dissect: scored {} images x {} units -> {}\n",
             scores.size(), m.units, o.out.string());
}

void cmd_core_concepts(const CoreConceptOptions& o, std::ostream& log) {
  const auto m = load_manifest(o.manifest);
  const auto kg = read_knowledge_graph(o.kg);
  const auto alignment = align_concepts(m.concept_vocab, kg, o.fuzzy_floor);
  const auto coverage = scene_coverage(m);
  RelatedConceptOptions rc_options;
  rc_options.hops = o.hops;
  rc_options.relations = {o.relations.begin(), o.relations.end()};
  rc_options.fuzzy_floor = o.fuzzy_floor;
  std::vector<ConceptSet> related;
  for (const auto& scene : m.scene_vocab.entries()) {
    related.push_back(related_concepts(scene.name, kg, alignment, rc_options));
  }

  std::vector<CoreConceptSet> sets;
  std::string summary = fmt::format(
      "aligned_concepts\t{} of {}\nhops\t{}\n", alignment.by_concept.size(),
      m.concept_vocab.size(), o.hops);
  auto describe = [&](const CoreConceptSet& set) {
    summary += fmt::format("{}\t{}\t{}\n", core_kind_name(set.kind),
                           m.scene_vocab.name(set.scene_id),
                           concept_names(set.ids(), m.concept_vocab));
  };
  for (auto kind : o.kinds) {
    if (kind == CoreConceptKind::kSCC) {
      summary += "\n";
      for (SceneId s = 0; s < coverage.size(); ++s) {
        if (coverage[s].image_count == 0) {
          fmt::print(log, "warning: scene '{}' has no images; no SCC\n",
                     m.scene_vocab.name(s));
          continue;
        }
        sets.push_back(scc(s, related[s], coverage[s]));
        describe(sets.back());
      }
    } else {
      const auto result = icc(coverage, related, o.k, o.grid_step);
      summary += fmt::format("\nP_c\t{}\nP_sc\t{}\nk\t{}\n",
                             format_double(result.parameters.p_c),
                             format_double(result.parameters.p_sc),
                             result.parameters.k);
      for (const auto& set : result.sets) {
        sets.push_back(set);
        describe(set);
      }
    }
  }

  write_alignment(o.out / "alignment.tsv", alignment, m.concept_vocab);
  write_core_concepts(o.out / "core_concepts.tsv", sets);
  write_text_file(o.out / "summary.txt", summary);
  ConfigEcho echo("core-concepts", o.out);
  echo.add_path("manifest", o.manifest);
  echo.add_path("kg", o.kg);
  echo.add("kinds", join(o.kinds, [](auto k) { return std::string(core_kind_name(k)); }));
  echo.add("hops", std::to_string(o.hops));
  echo.add("k", std::to_string(o.k));
  echo.add("grid_step", o.grid_step);
  echo.add("fuzzy_floor", o.fuzzy_floor);
  echo.add("relations", o.relations.empty() ? "*" : join(o.relations, [](const auto& r) { return r; }));
  echo.write();
  fmt::print(log, "core-concepts: {} sets -> {}\n", sets.size(), o.out.string());
}

void cmd_explain(const ExplainOptions& o, std::ostream& log) {
  const auto m = load_manifest(o.manifest);
  const auto features = all_features(m);
  const auto records = prediction_records(m, features);
  const auto scores = scores_by_image(o.scores, m);
  const auto core = load_core(o.core_concepts, m.scene_vocab.size());

  std::vector<PredictionRecord> dt;
  std::vector<PredictionRecord> df;
  for (const auto& r : records) (r.predicted == r.target ? dt : df).push_back(r);

  std::vector<PPEReport> reports;
  std::string pe = "image_id\tstrategy\tkind\tscene_id\tcm\tsm\tdm\n";
  for (const auto& [kind, table] : core) {
    const CoreConceptsFn cc = [&table](SceneId s) -> const ConceptSet& {
      return table.by_scene[s];
    };
    for (auto strategy : o.strategies) {
      const auto lcs = learned_by_image(scores, strategy);
      const LearnedConceptsFn lc = [&lcs](ImageId id) -> const ConceptSet& {
        return lcs.at(id).all;
      };
      PPEReport report;
      report.lc_strategy = strategy_name(strategy);
      report.cc_kind = core_kind_name(kind);
      if (!df.empty()) {
        report.false_report = false_prediction_report(df, lc, cc);
        report.has_false = true;
      }
      if (!dt.empty() && !df.empty()) {
        report.true_report = true_prediction_report(dt, df, lc, cc);
        report.has_true = true;
      }
      reports.push_back(report);
      for (const auto& r : records) {
        for (SceneId s = 0; s < table.by_scene.size(); ++s) {
          if (!table.present[s] || table.by_scene[s].empty()) continue;
          const auto e = explain(r.image_id, s, lc(r.image_id), table.by_scene[s]);
          pe += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\n", r.image_id,
                            report.lc_strategy, report.cc_kind, s,
                            format_double(e.cm), format_double(e.sm),
                            format_double(e.dm));
        }
      }
    }
  }

  const auto table = format_ppe_table(reports);
  write_text_file(o.out / "ppe.tsv", format_ppe_tsv(reports));
  write_text_file(o.out / "pe.tsv", pe);
  write_text_file(
      o.out / "summary.txt",
      fmt::format("images\t{}\ntrue_predictions\t{}\nfalse_predictions\t{}\n\n{}",
                  records.size(), dt.size(), df.size(), table));
  ConfigEcho echo("explain", o.out);
  echo.add_path("manifest", o.manifest);
  echo.add_path("scores", o.scores);
  echo.add_path("core_concepts", o.core_concepts);
  echo.add("strategies", join(o.strategies, [](auto s) { return std::string(strategy_name(s)); }));
  echo.write();
  fmt::print(log, "{}", table);
}

void cmd_filter(const FilterOptions& o, std::ostream& log) {
  if (o.ks.empty()) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                "at least one cluster count is required");
  }
  const auto m = load_manifest(o.manifest);
  const auto kg = read_knowledge_graph(o.kg);
  const auto alignment = align_concepts(m.concept_vocab, kg, o.fuzzy_floor);

  EmbeddingTable table;
  if (o.embedding) {
    table = read_embedding(*o.embedding);
  } else {
    auto trained = train_transe(kg, o.transe);
    std::string loss = "epoch\tmean_loss\n";
    for (std::size_t e = 0; e < trained.epoch_mean_loss.size(); ++e) {
      loss += fmt::format("{}\t{}\n", e + 1,
                          format_double(trained.epoch_mean_loss[e]));
    }
    write_embedding(o.out / "embedding.tsv", trained.table);
    write_text_file(o.out / "transe_loss.tsv", loss);
    table = std::move(trained.table);
  }

  // Every concept annotated in the dataset that has a graph counterpart.
  ConceptSet concepts;
  for (const auto& set : m.image_concepts) {
    for (ConceptId c : set) {
      if (alignment.contains(c)) concepts.insert(c);
    }
  }
  const auto thresholds = compute_thresholds(m, o.quantile);
  const double baseline = mean_best_iou(dataset_best_iou(m, thresholds));

  std::string gains = "k\tA\tB\tgain\n";
  std::string summary = fmt::format(
      "clustered_concepts\t{}\nbaseline_mean_best_iou\t{}\n",
      concepts.size(), format_double(baseline));
  for (auto k : o.ks) {
    const auto clustering = cluster_concepts(concepts, table, alignment, k);
    const double clustered = mean_best_iou(
        dataset_best_iou(m, thresholds, clustering.representative_map()));
    const double gain = iou_gain_percent(baseline, clustered);
    gains += fmt::format("{}\t{}\t{}\t{}\n", k, format_double(baseline),
                         format_double(clustered), format_double(gain));
    write_clustering(o.out / fmt::format("clustering_k{}.tsv", k), clustering);
    summary += fmt::format("\nk={}\tgain={}%\tcost={}\n", k, percent(gain),
                           format_double(clustering.cost));
    for (std::size_t i = 0; i < clustering.clusters.size(); ++i) {
      summary += fmt::format(
          "  {} <- {}\n", m.concept_vocab.name(clustering.representatives[i]),
          concept_names(clustering.clusters[i], m.concept_vocab));
    }
  }

  write_text_file(o.out / "iou_gain.tsv", gains);
  write_text_file(o.out / "summary.txt", summary);
  ConfigEcho echo("filter", o.out);
  echo.add_path("manifest", o.manifest);
  echo.add_path("kg", o.kg);
  echo.add("embedding", o.embedding ? echo_path(*o.embedding, o.out) : "trained");
  echo.add("k", join(o.ks, [](auto k) { return std::to_string(k); }));
  if (!o.embedding) {
    echo.add("transe_dim", std::to_string(o.transe.dim));
    echo.add("transe_epochs", std::to_string(o.transe.epochs));
    echo.add("transe_lr", o.transe.learning_rate);
    echo.add("transe_margin", o.transe.margin);
    echo.add("transe_negatives", std::to_string(o.transe.negatives));
    echo.add("seed", std::to_string(o.transe.seed));
  }
  echo.add("quantile", o.quantile);
  echo.add("fuzzy_floor", o.fuzzy_floor);
  echo.write();
  fmt::print(log, "{}", gains);
}

void cmd_ablate(const AblateOptions& o, std::ostream& log) {
  const auto m = load_manifest(o.manifest);
  const auto features = all_features(m);
  const auto records = prediction_records(m, features);
  const auto scores = scores_by_image(o.scores, m);
  const auto core_all = load_core(o.core_concepts, m.scene_vocab.size());
  const auto& core = core_of_kind(core_all, o.kind, o.core_concepts);
  auto lcs = learned_by_image(scores, o.strategy);
  for (auto& [id, lc] : lcs) lc.per_unit.resize(m.units);
  const UnitConceptsFn unit_lc = [&lcs](ImageId id) -> const std::vector<ConceptSet>& {
    return lcs.at(id).per_unit;
  };

  const SceneId scene_count = static_cast<SceneId>(m.scene_vocab.size());
  std::vector<std::vector<std::size_t>> by_scene(scene_count);
  std::vector<SceneId> targets;
  for (std::size_t i = 0; i < m.images.size(); ++i) {
    by_scene[m.images[i].scene_id].push_back(i);
    targets.push_back(m.images[i].scene_id);
  }

  std::string warnings;
  std::map<SceneId, NeuronContribution> contributions;
  std::string contrib_tsv = "scene_id\tunit\tscore\trank\n";
  for (SceneId s = 0; s < scene_count; ++s) {
    if (by_scene[s].empty()) continue;
    if (!core.present[s]) {
      warnings += fmt::format("scene {} has no {} set; left unablated\n", s,
                              core_kind_name(o.kind));
      continue;
    }
    try {
      auto c = contribution_scores(s, records, core.by_scene[s], unit_lc, m.units);
      for (std::size_t r = 0; r < c.ranking.size(); ++r) {
        const UnitIndex u = c.ranking[r];
        contrib_tsv += fmt::format("{}\t{}\t{}\t{}\n", s, u,
                                   format_double(c.scores[u]), r + 1);
      }
      contributions.emplace(s, std::move(c));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNoTruePredictions) throw;
      warnings += fmt::format("scene {}: {}\n", s, e.what());
    }
  }

  const auto baseline = ablate(m.head, features, targets, {});
  std::string overall = "k\tdirection\taccuracy\n";
  overall += fmt::format("0\tnone\t{}\n", format_double(baseline.accuracy_after));
  std::string per_scene =
      "scene_id\tk\tdirection\tdisabled\taccuracy_before\taccuracy_after\n";
  std::string summary = fmt::format("strategy\t{}\nkind\t{}\nbaseline\t{}\n",
                                    strategy_name(o.strategy),
                                    core_kind_name(o.kind),
                                    percent(100.0 * baseline.accuracy_after));
  for (auto direction : o.directions) {
    for (auto k : o.ks) {
      std::size_t correct = 0;
      for (SceneId s = 0; s < scene_count; ++s) {
        if (by_scene[s].empty()) continue;
        std::set<UnitIndex> disabled;
        if (auto it = contributions.find(s); it != contributions.end()) {
          const auto units = top_units(it->second, k, direction);
          disabled.insert(units.begin(), units.end());
        }
        std::vector<std::vector<float>> xs;
        std::vector<SceneId> ys;
        for (std::size_t i : by_scene[s]) {
          xs.push_back(features[i]);
          ys.push_back(targets[i]);
        }
        const auto r = ablate(m.head, xs, ys, disabled);
        correct += static_cast<std::size_t>(
            std::lround(r.accuracy_after * static_cast<double>(xs.size())));
        per_scene += fmt::format(
            "{}\t{}\t{}\t{}\t{}\t{}\n", s, k, direction_name(direction),
            disabled.empty() ? std::string("-")
                             : join(std::vector<UnitIndex>(disabled.begin(), disabled.end()),
                                    [](auto u) { return std::to_string(u); }),
            format_double(r.accuracy_before), format_double(r.accuracy_after));
      }
      const double acc = static_cast<double>(correct) /
                         static_cast<double>(std::max<std::size_t>(1, targets.size()));
      overall += fmt::format("{}\t{}\t{}\n", k, direction_name(direction),
                             format_double(acc));
      summary += fmt::format("{}\tk={}\t{}\n", direction_name(direction), k,
                             percent(100.0 * acc));
    }
  }
  if (!warnings.empty()) summary += "\nwarnings:\n" + warnings;

  write_text_file(o.out / "contributions.tsv", contrib_tsv);
  write_text_file(o.out / "ablation.tsv", overall);
  write_text_file(o.out / "ablation_by_scene.tsv", per_scene);
  write_text_file(o.out / "summary.txt", summary);
  ConfigEcho echo("ablate", o.out);
  echo.add_path("manifest", o.manifest);
  echo.add_path("scores", o.scores);
  echo.add_path("core_concepts", o.core_concepts);
  echo.add("kind", std::string(core_kind_name(o.kind)));
  echo.add("strategy", std::string(strategy_name(o.strategy)));
  echo.add("directions", join(o.directions, [](auto d) { return std::string(direction_name(d)); }));
  echo.add("k", join(o.ks, [](auto k) { return std::to_string(k); }));
  echo.write();
  fmt::print(log, "{}", overall);
  if (!warnings.empty()) fmt::print(log, "{}", warnings);
}

void cmd_retrain_pe(const RetrainOptions& o, std::ostream& log) {
  const auto m = load_manifest(o.manifest);
  const auto features = all_features(m);
  const auto scores = scores_by_image(o.scores, m);
  const auto core_all = load_core(o.core_concepts, m.scene_vocab.size());
  const auto& core = core_of_kind(core_all, o.kind, o.core_concepts);
  const auto lcs = learned_by_image(scores, o.strategy);

  struct Split_ {
    std::vector<std::vector<double>> x;
    std::vector<SceneId> y;
    std::size_t head_correct = 0;
  };
  Split_ train;
  Split_ test;
  for (std::size_t i = 0; i < m.images.size(); ++i) {
    const auto& r = m.images[i];
    auto& dst = r.split == Split::kTrain ? train : test;
    dst.x.push_back(
        pe_features(r.image_id, lcs.at(r.image_id).all, core.by_scene, features[i]));
    dst.y.push_back(r.scene_id);
    dst.head_correct += argmax(m.head.logits(features[i])) == r.scene_id;
  }
  if (train.x.empty()) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                "the manifest has no training images");
  }
  const auto result = train_pe_svm(train.x, train.y,
                                   static_cast<std::uint32_t>(m.scene_vocab.size()),
                                   o.svm);

  std::string objective = "class\tepoch\tobjective\n";
  for (std::size_t c = 0; c < result.objective.size(); ++c) {
    for (std::size_t e = 0; e < result.objective[c].size(); ++e) {
      objective += fmt::format("{}\t{}\t{}\n", c, e,
                               format_double(result.objective[c][e]));
    }
  }
  std::string report = "split\timages\tsvm_accuracy\thead_accuracy\n";
  auto row = [&](const char* name, const Split_& s) {
    if (s.x.empty()) return;
    report += fmt::format(
        "{}\t{}\t{}\t{}\n", name, s.x.size(),
        format_double(accuracy(result.model, s.x, s.y)),
        format_double(static_cast<double>(s.head_correct) /
                      static_cast<double>(s.x.size())));
  };
  row("train", train);
  row("test", test);
  std::string summary = fmt::format("features\t{}\nkind\t{}\nstrategy\t{}\n\n{}",
                                    result.model.num_features,
                                    core_kind_name(o.kind),
                                    strategy_name(o.strategy), report);
  for (const auto& w : result.warnings) summary += "warning: " + w + "\n";

  write_svm_model(o.out / "model.tsv", result.model);
  write_text_file(o.out / "objective.tsv", objective);
  write_text_file(o.out / "retrain.tsv", report);
  write_text_file(o.out / "summary.txt", summary);
  ConfigEcho echo("retrain-pe", o.out);
  echo.add_path("manifest", o.manifest);
  echo.add_path("scores", o.scores);
  echo.add_path("core_concepts", o.core_concepts);
  echo.add("kind", std::string(core_kind_name(o.kind)));
  echo.add("strategy", std::string(strategy_name(o.strategy)));
  echo.add("c_reg", o.svm.c_reg);
  echo.add("epochs", std::to_string(o.svm.epochs));
  echo.add("lr", o.svm.learning_rate);
  echo.add("seed", std::to_string(o.svm.seed));
  echo.write();
  fmt::print(log, "{}", report);
}

namespace {

template <typename E, typename Parse>
E parse_enum(const std::string& text, Parse parse, const char* what) {
  auto v = parse(text);
  if (!v) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                fmt::format("unknown {} '{}'", what, text));
  }
  return *v;
}

std::vector<SelectionStrategy> parse_strategies(const std::vector<std::string>& names) {
  std::vector<SelectionStrategy> out;
  for (const auto& n : names) {
    out.push_back(parse_enum<SelectionStrategy>(n, parse_strategy, "strategy"));
  }
  return out;
}

const std::vector<std::string> kStrategyNames = {"whole_layer", "highest_iou",
                                                 "minmax"};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Knowledge-aware neuron interpretation toolkit", "neurodissect"};
  app.set_config("--config", "", "Read options from an INI/TOML file");
  app.require_subcommand(1);
  std::size_t threads = 0;
  app.add_option("--threads", threads,
                 "Worker threads (default: NEURODISSECT_THREADS or all cores)");

  // synth
  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write a planted synthetic dataset");
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_option("--seed", synth.config.seed)->capture_default_str();
  synth_cmd->add_option("--scenes", synth.config.scenes)->capture_default_str();
  synth_cmd->add_option("--images", synth.config.images_per_scene, "Images per scene")
      ->capture_default_str();
  synth_cmd->add_option("--units", synth.config.units)->capture_default_str();
  synth_cmd->add_option("--height", synth.config.height)->capture_default_str();
  synth_cmd->add_option("--width", synth.config.width)->capture_default_str();
  synth_cmd->add_option("--mask-scale", synth.config.mask_scale)->capture_default_str();
  synth_cmd->add_option("--forge-fraction", synth.config.forge_fraction)
      ->capture_default_str();
  synth_cmd->add_option("--test-fraction", synth.config.test_fraction)
      ->capture_default_str();

  // dissect
  DissectOptions dissect;
  std::string source = "predicted";
  auto* dissect_cmd = app.add_subcommand("dissect", "Score units against concepts");
  dissect_cmd->add_option("--manifest", dissect.manifest)->required();
  dissect_cmd->add_option("--out", dissect.out)->required();
  dissect_cmd->add_option("--quantile", dissect.quantile)->capture_default_str();
  dissect_cmd->add_option("--scene-source", source)
      ->check(CLI::IsMember({"predicted", "target", "all"}))
      ->capture_default_str();

  // core-concepts
  CoreConceptOptions cc;
  std::string cc_kind = "both";
  auto* cc_cmd = app.add_subcommand("core-concepts", "Derive SCC and ICC sets");
  cc_cmd->add_option("--manifest", cc.manifest)->required();
  cc_cmd->add_option("--kg", cc.kg)->required();
  cc_cmd->add_option("--out", cc.out)->required();
  cc_cmd->add_option("--kind", cc_kind)
      ->check(CLI::IsMember({"scc", "icc", "both"}))
      ->capture_default_str();
  cc_cmd->add_option("--hops", cc.hops)->check(CLI::Range(1, 2))->capture_default_str();
  cc_cmd->add_option("--k", cc.k, "Top-k dataset concepts")->capture_default_str();
  cc_cmd->add_option("--grid-step", cc.grid_step)->capture_default_str();
  cc_cmd->add_option("--fuzzy-floor", cc.fuzzy_floor)->capture_default_str();
  cc_cmd->add_option("--relations", cc.relations, "Relation allow-list")
      ->delimiter(',');

  // explain
  ExplainOptions ex;
  std::vector<std::string> ex_strategies = kStrategyNames;
  auto* ex_cmd = app.add_subcommand("explain", "PE and PPE explanation reports");
  ex_cmd->add_option("--manifest", ex.manifest)->required();
  ex_cmd->add_option("--scores", ex.scores)->required();
  ex_cmd->add_option("--core-concepts", ex.core_concepts)->required();
  ex_cmd->add_option("--out", ex.out)->required();
  ex_cmd->add_option("--strategies", ex_strategies)
      ->delimiter(',')
      ->check(CLI::IsMember(kStrategyNames));

  // filter
  FilterOptions filter;
  std::string embedding_path;
  auto* filter_cmd = app.add_subcommand("filter", "Concept filtering and IoU gain");
  filter_cmd->add_option("--manifest", filter.manifest)->required();
  filter_cmd->add_option("--kg", filter.kg)->required();
  filter_cmd->add_option("--out", filter.out)->required();
  filter_cmd->add_option("--k", filter.ks, "Cluster counts (comma list)")
      ->delimiter(',')
      ->required();
  filter_cmd->add_option("--embedding", embedding_path, "Pre-trained embedding TSV");
  filter_cmd->add_option("--dim", filter.transe.dim)->capture_default_str();
  filter_cmd->add_option("--epochs", filter.transe.epochs)->capture_default_str();
  filter_cmd->add_option("--lr", filter.transe.learning_rate)->capture_default_str();
  filter_cmd->add_option("--margin", filter.transe.margin)->capture_default_str();
  filter_cmd->add_option("--negatives", filter.transe.negatives)->capture_default_str();
  filter_cmd->add_option("--seed", filter.transe.seed)->capture_default_str();
  filter_cmd->add_option("--quantile", filter.quantile)->capture_default_str();
  filter_cmd->add_option("--fuzzy-floor", filter.fuzzy_floor)->capture_default_str();

  // ablate
  AblateOptions ablate_opts;
  std::string ab_kind = "icc";
  std::string ab_strategy = "minmax";
  std::string direction = "both";
  auto* ab_cmd = app.add_subcommand("ablate", "Rank units and disable them");
  ab_cmd->add_option("--manifest", ablate_opts.manifest)->required();
  ab_cmd->add_option("--scores", ablate_opts.scores)->required();
  ab_cmd->add_option("--core-concepts", ablate_opts.core_concepts)->required();
  ab_cmd->add_option("--out", ablate_opts.out)->required();
  ab_cmd->add_option("--kind", ab_kind)->check(CLI::IsMember({"scc", "icc"}))
      ->capture_default_str();
  ab_cmd->add_option("--strategy", ab_strategy)->check(CLI::IsMember(kStrategyNames))
      ->capture_default_str();
  ab_cmd->add_option("--direction", direction)
      ->check(CLI::IsMember({"positive", "negative", "both"}))
      ->capture_default_str();
  ab_cmd->add_option("--k", ablate_opts.ks, "Units to disable (comma list)")
      ->delimiter(',');

  // retrain-pe
  RetrainOptions rt;
  std::string rt_kind = "icc";
  std::string rt_strategy = "minmax";
  auto* rt_cmd = app.add_subcommand("retrain-pe", "Train the explanation-feature SVM");
  rt_cmd->add_option("--manifest", rt.manifest)->required();
  rt_cmd->add_option("--scores", rt.scores)->required();
  rt_cmd->add_option("--core-concepts", rt.core_concepts)->required();
  rt_cmd->add_option("--out", rt.out)->required();
  rt_cmd->add_option("--kind", rt_kind)->check(CLI::IsMember({"scc", "icc"}))
      ->capture_default_str();
  rt_cmd->add_option("--strategy", rt_strategy)->check(CLI::IsMember(kStrategyNames))
      ->capture_default_str();
  rt_cmd->add_option("--c", rt.svm.c_reg)->capture_default_str();
  rt_cmd->add_option("--epochs", rt.svm.epochs)->capture_default_str();
  rt_cmd->add_option("--lr", rt.svm.learning_rate)->capture_default_str();
  rt_cmd->add_option("--seed", rt.svm.seed)->capture_default_str();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    if (threads > 0) set_worker_count(threads);
    if (synth_cmd->parsed()) {
      cmd_synth(synth, out);
    } else if (dissect_cmd->parsed()) {
      dissect.source = parse_enum<SceneSource>(source, parse_scene_source, "scene source");
      cmd_dissect(dissect, out);
    } else if (cc_cmd->parsed()) {
      if (cc_kind == "both") {
        cc.kinds = {CoreConceptKind::kSCC, CoreConceptKind::kICC};
      } else {
        cc.kinds = {parse_enum<CoreConceptKind>(cc_kind, parse_core_kind, "kind")};
      }
      cmd_core_concepts(cc, out);
    } else if (ex_cmd->parsed()) {
      ex.strategies = parse_strategies(ex_strategies);
      cmd_explain(ex, out);
    } else if (filter_cmd->parsed()) {
      if (!embedding_path.empty()) filter.embedding = embedding_path;
      cmd_filter(filter, out);
    } else if (ab_cmd->parsed()) {
      ablate_opts.kind = parse_enum<CoreConceptKind>(ab_kind, parse_core_kind, "kind");
      ablate_opts.strategy =
          parse_enum<SelectionStrategy>(ab_strategy, parse_strategy, "strategy");
      if (direction == "both") {
        ablate_opts.directions = {Direction::kPositive, Direction::kNegative};
      } else {
        ablate_opts.directions = {
            parse_enum<Direction>(direction, parse_direction, "direction")};
      }
      if (ablate_opts.ks.empty()) ablate_opts.ks = {20};
      cmd_ablate(ablate_opts, out);
    } else if (rt_cmd->parsed()) {
      rt.kind = parse_enum<CoreConceptKind>(rt_kind, parse_core_kind, "kind");
      rt.strategy = parse_enum<SelectionStrategy>(rt_strategy, parse_strategy, "strategy");
      cmd_retrain_pe(rt, out);
    }
  } catch (const Error& e) {
    fmt::print(err, "error: {}\n", e.what());
    set_worker_count(0);
    return is_input_error(e.code()) ? 2 : 3;
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    set_worker_count(0);
    return 3;
  }
  set_worker_count(0);
  return 0;
}

}  // namespace neurodissect::cli
