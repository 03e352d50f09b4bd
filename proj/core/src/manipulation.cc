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

#include "neurodissect/manipulation.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/core.h>

#include "neurodissect/error.h"
#include "neurodissect/io.h"
#include "neurodissect/random.h"

namespace neurodissect {
namespace {

constexpr char kModule[] = "manipulation";

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::string join(std::span<const double> v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += '\t';
    out += format_double(v[i]);
  }
  return out;
}

std::vector<double> parse_row(std::string_view line, std::size_t expected,
                              const std::filesystem::path& path) {
  auto f = split_fields(line);
  if (f.size() != expected) {
    throw Error(ErrorCode::kDimensionMismatch, kModule,
                fmt::format("'{}': row has {} values, expected {}",
                            path.string(), f.size(), expected));
  }
  std::vector<double> out;
  out.reserve(f.size());
  for (auto v : f) out.push_back(parse_double(v));
  return out;
}

}  // namespace

NeuronContribution contribution_scores(SceneId scene,
                                       std::span<const PredictionRecord> images,
                                       const ConceptSet& core,
                                       const UnitConceptsFn& unit_concepts,
                                       std::uint32_t units) {
  NeuronContribution out;
  out.scene_id = scene;
  out.scores.assign(units, 0.0);
  std::size_t used = 0;
  for (const auto& r : images) {
    if (r.target != scene || r.predicted != scene) continue;
    ++used;
    const auto& per_unit = unit_concepts(r.image_id);
    for (std::size_t t = 0; t < per_unit.size() && t < units; ++t) {
      const auto inside = intersection_size(per_unit[t], core);
      const auto outside = per_unit[t].size() - inside;
      out.scores[t] +=
          static_cast<double>(inside) - static_cast<double>(outside);
    }
  }
  if (used == 0) {
    throw Error(ErrorCode::kNoTruePredictions, kModule,
                fmt::format("scene {} has no correctly predicted images",
                            scene));
  }
  out.ranking.resize(units);
  std::iota(out.ranking.begin(), out.ranking.end(), UnitIndex{0});
  std::stable_sort(out.ranking.begin(), out.ranking.end(),
                   [&](UnitIndex a, UnitIndex b) {
                     return out.scores[a] > out.scores[b];
                   });
  return out;
}

std::string_view direction_name(Direction direction) {
  return direction == Direction::kPositive ? "positive" : "negative";
}

std::optional<Direction> parse_direction(std::string_view name) {
  if (name == "positive") return Direction::kPositive;
  if (name == "negative") return Direction::kNegative;
  return std::nullopt;
}

std::vector<UnitIndex> top_units(const NeuronContribution& contribution,
                                 std::size_t k, Direction direction) {
  const auto& r = contribution.ranking;
  k = std::min(k, r.size());
  if (direction == Direction::kPositive) return {r.begin(), r.begin() + k};
  return {r.rbegin(), r.rbegin() + k};
}

std::vector<std::vector<double>> ablated_logits(
    const LinearHead& head, std::span<const std::vector<float>> features,
    const std::set<UnitIndex>& disabled) {
  for (UnitIndex u : disabled) {
    if (u >= head.num_units) {
      throw Error(ErrorCode::kUnitOutOfRange, kModule,
                  fmt::format("unit {} is outside 0..{}", u,
                              head.num_units - 1));
    }
  }
  std::vector<std::vector<double>> out;
  out.reserve(features.size());
  std::vector<float> masked;
  for (const auto& row : features) {
    masked.assign(row.begin(), row.end());
    for (UnitIndex u : disabled) {
      if (u < masked.size()) masked[u] = 0.0f;
    }
    out.push_back(head.logits(masked));
  }
  return out;
}

AblationResult ablate(const LinearHead& head,
                      std::span<const std::vector<float>> features,
                      std::span<const SceneId> targets,
                      const std::set<UnitIndex>& disabled) {
  if (features.size() != targets.size()) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                "one target per feature row is required");
  }
  if (features.empty()) {
    throw Error(ErrorCode::kEmptySet, kModule, "no images to ablate");
  }
  AblationResult out;
  out.disabled = disabled;
  const auto before = ablated_logits(head, features, {});
  out.logits_after = ablated_logits(head, features, disabled);
  std::size_t correct_before = 0;
  std::size_t correct_after = 0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto p0 = static_cast<SceneId>(argmax(before[i]));
    const auto p1 = static_cast<SceneId>(argmax(out.logits_after[i]));
    out.predictions_before.push_back(p0);
    out.predictions_after.push_back(p1);
    correct_before += p0 == targets[i];
    correct_after += p1 == targets[i];
  }
  const double n = static_cast<double>(features.size());
  out.accuracy_before = correct_before / n;
  out.accuracy_after = correct_after / n;
  return out;
}

std::vector<double> mrr_feature(std::span<const ExplanationScores> per_scene) {
  const std::size_t n = per_scene.size();
  std::vector<double> out(n, 0.0);
  auto accumulate_ranks = [&](auto better) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                       return better(per_scene[a], per_scene[b]);
                     });
    for (std::size_t rank = 0; rank < n; ++rank) {
      out[order[rank]] += 1.0 / static_cast<double>(rank + 1);
    }
  };
  accumulate_ranks([](const auto& a, const auto& b) { return a.cm > b.cm; });
  accumulate_ranks([](const auto& a, const auto& b) { return a.sm > b.sm; });
  accumulate_ranks([](const auto& a, const auto& b) { return a.dm < b.dm; });
  for (double& v : out) v /= 3.0;
  return out;
}

std::vector<double> pe_features(ImageId image, const ConceptSet& learned,
                                std::span<const ConceptSet> core_by_scene,
                                std::span<const float> hidden) {
  std::vector<ExplanationScores> per_scene;
  per_scene.reserve(core_by_scene.size());
  for (SceneId s = 0; s < core_by_scene.size(); ++s) {
    per_scene.push_back(explain(image, s, learned, core_by_scene[s]));
  }
  std::vector<double> out;
  out.reserve(4 * per_scene.size() + hidden.size());
  for (const auto& e : per_scene) {
    out.push_back(e.cm);
    out.push_back(e.sm);
    out.push_back(e.dm);
  }
  for (double m : mrr_feature(per_scene)) out.push_back(m);
  for (float h : hidden) out.push_back(h);
  return out;
}

std::vector<double> LinearSvmModel::standardize(
    std::span<const double> x) const {
  if (x.size() != num_features) {
    throw Error(ErrorCode::kDimensionMismatch, kModule,
                fmt::format("model expects {} features, got {}", num_features,
                            x.size()));
  }
  std::vector<double> out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    out[j] = (x[j] - mean[j]) / stddev[j];
  }
  return out;
}

std::vector<double> LinearSvmModel::margins(std::span<const double> x) const {
  const auto z = standardize(x);
  std::vector<double> out(num_classes);
  for (std::uint32_t c = 0; c < num_classes; ++c) {
    out[c] = dot({weights.data() + c * num_features, num_features}, z) +
             bias[c];
  }
  return out;
}

SceneId LinearSvmModel::predict(std::span<const double> x) const {
  return static_cast<SceneId>(argmax(margins(x)));
}

double svm_objective(std::span<const std::vector<double>> standardized,
                     std::span<const SceneId> labels, SceneId positive,
                     std::span<const double> w, double b, double lambda) {
  double hinge = 0.0;
  for (std::size_t i = 0; i < standardized.size(); ++i) {
    const double y = labels[i] == positive ? 1.0 : -1.0;
    hinge += std::max(0.0, 1.0 - y * (dot(w, standardized[i]) + b));
  }
  return 0.5 * lambda * dot(w, w) +
         hinge / static_cast<double>(standardized.size());
}

SvmTrainingResult train_pe_svm(std::span<const std::vector<double>> features,
                               std::span<const SceneId> labels,
                               std::uint32_t num_classes,
                               const SvmConfig& config) {
  if (features.size() != labels.size() || features.empty()) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                "training needs one label per non-empty feature row");
  }
  if (!(config.c_reg > 0.0) || !(config.learning_rate > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                "C and the learning rate must be positive");
  }
  const std::size_t n = features.size();
  const std::size_t f = features.front().size();
  std::set<SceneId> classes;
  for (std::size_t i = 0; i < n; ++i) {
    if (features[i].size() != f) {
      throw Error(ErrorCode::kDimensionMismatch, kModule,
                  "feature rows differ in length");
    }
    if (labels[i] >= num_classes) {
      throw Error(ErrorCode::kInvalidArgument, kModule,
                  fmt::format("label {} outside 0..{}", labels[i],
                              num_classes - 1));
    }
    classes.insert(labels[i]);
  }
  if (classes.size() < 2) {
    throw Error(ErrorCode::kSingleClass, kModule,
                "training data holds a single class");
  }

  SvmTrainingResult result;
  auto& model = result.model;
  model.num_classes = num_classes;
  model.num_features = static_cast<std::uint32_t>(f);
  model.mean.assign(f, 0.0);
  model.stddev.assign(f, 0.0);
  for (const auto& row : features) {
    for (std::size_t j = 0; j < f; ++j) model.mean[j] += row[j];
  }
  for (double& m : model.mean) m /= static_cast<double>(n);
  for (const auto& row : features) {
    for (std::size_t j = 0; j < f; ++j) {
      const double d = row[j] - model.mean[j];
      model.stddev[j] += d * d;
    }
  }
  std::size_t constant = 0;
  for (double& s : model.stddev) {
    s = std::sqrt(s / static_cast<double>(n));
    if (s == 0.0) {
      s = 1.0;
      ++constant;
    }
  }
  if (constant > 0) {
    result.warnings.push_back(fmt::format(
        "DegenerateFeatures: {} of {} feature columns are constant", constant,
        f));
  }

  std::vector<std::vector<double>> z;
  z.reserve(n);
  for (const auto& row : features) z.push_back(model.standardize(row));

  const double lambda = 1.0 / (config.c_reg * static_cast<double>(n));
  model.weights.assign(static_cast<std::size_t>(num_classes) * f, 0.0);
  model.bias.assign(num_classes, 0.0);
  result.objective.resize(num_classes);
  Rng rng(config.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (SceneId c = 0; c < num_classes; ++c) {
    std::span<double> w{model.weights.data() + c * f, f};
    double& b = model.bias[c];
    auto& history = result.objective[c];
    history.push_back(svm_objective(z, labels, c, w, b, lambda));
    std::vector<double> w_saved(f);
    for (std::uint32_t epoch = 1; epoch <= config.epochs; ++epoch) {
      const double step = config.learning_rate / epoch;
      std::copy(w.begin(), w.end(), w_saved.begin());
      const double b_saved = b;
      rng.shuffle(order);
      for (std::size_t i : order) {
        const double y = labels[i] == c ? 1.0 : -1.0;
        const double margin = y * (dot(w, z[i]) + b);
        const double shrink = 1.0 - step * lambda;
        for (double& wj : w) wj *= shrink;
        if (margin < 1.0) {
          for (std::size_t j = 0; j < f; ++j) w[j] += step * y * z[i][j];
          b += step * y;
        }
      }
      const double objective = svm_objective(z, labels, c, w, b, lambda);
      if (objective <= history.back()) {
        history.push_back(objective);
      } else {
        std::copy(w_saved.begin(), w_saved.end(), w.begin());
        b = b_saved;
        history.push_back(history.back());
      }
    }
  }
  return result;
}

double accuracy(const LinearSvmModel& model,
                std::span<const std::vector<double>> features,
                std::span<const SceneId> labels) {
  if (features.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    correct += model.predict(features[i]) == labels[i];
  }
  return static_cast<double>(correct) / static_cast<double>(features.size());
}

void write_svm_model(const std::filesystem::path& path,
                     const LinearSvmModel& model) {
  std::string out =
      fmt::format("{} {}\n", model.num_classes, model.num_features);
  for (std::uint32_t c = 0; c < model.num_classes; ++c) {
    out += join({model.weights.data() + c * model.num_features,
                 model.num_features});
    out += '\n';
  }
  out += join(model.bias) + '\n';
  out += join(model.mean) + '\n';
  out += join(model.stddev) + '\n';
  write_text_file(path, out);
}

LinearSvmModel read_svm_model(const std::filesystem::path& path) {
  std::vector<std::string> rows;
  for (auto& l : read_lines(path)) {
    if (!l.empty()) rows.push_back(std::move(l));
  }
  if (rows.empty()) {
    throw Error(ErrorCode::kParseError, kModule,
                fmt::format("'{}' is empty", path.string()));
  }
  auto header = split_fields(rows[0], ' ');
  if (header.size() != 2) {
    throw Error(ErrorCode::kParseError, kModule,
                fmt::format("'{}': header must be '<classes> <features>'",
                            path.string()));
  }
  LinearSvmModel m;
  m.num_classes = parse_u32(header[0]);
  m.num_features = parse_u32(header[1]);
  if (rows.size() != m.num_classes + 4u) {
    throw Error(ErrorCode::kDimensionMismatch, kModule,
                fmt::format("'{}': expected {} rows after the header",
                            path.string(), m.num_classes + 3));
  }
  for (std::uint32_t c = 0; c < m.num_classes; ++c) {
    auto w = parse_row(rows[1 + c], m.num_features, path);
    m.weights.insert(m.weights.end(), w.begin(), w.end());
  }
  m.bias = parse_row(rows[1 + m.num_classes], m.num_classes, path);
  m.mean = parse_row(rows[2 + m.num_classes], m.num_features, path);
  m.stddev = parse_row(rows[3 + m.num_classes], m.num_features, path);
  return m;
}

}  // namespace neurodissect
