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

#include "neurodissect/dissection.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_map>

#include <fmt/core.h>

#include "neurodissect/error.h"
#include "neurodissect/io.h"
#include "neurodissect/manifest.h"
#include "neurodissect/parallel.h"

namespace neurodissect {
namespace {

constexpr char kModule[] = "dissection";

void check_quantile(double quantile) {
  if (!(quantile > 0.0 && quantile <= 0.5)) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                fmt::format("quantile level {} is outside (0, 0.5]", quantile));
  }
}

// Upsampled, thresholded activation of one unit at mask resolution.
PixelSet unit_pixels(const ActivationVolume& volume, UnitIndex unit,
                     const SegmentationMask& mask, float threshold) {
  auto up = upsample_bilinear(volume.unit_map(unit), volume.height,
                              volume.width, mask.height, mask.width);
  return threshold_map(up, mask.height, mask.width, threshold);
}

void check_threshold_width(const ActivationVolume& volume,
                           const UnitThresholds& thresholds) {
  if (thresholds.thresholds.size() != volume.units) {
    throw Error(ErrorCode::kDimensionMismatch, kModule,
                fmt::format("{} thresholds for {} units",
                            thresholds.thresholds.size(), volume.units));
  }
}

// Per-concept pixel sets of a mask after relabeling, in one pass over planes.
std::map<ConceptId, PixelSet> all_concept_pixels(
    const SegmentationMask& mask,
    const std::map<ConceptId, ConceptId>& relabel) {
  std::map<ConceptId, PixelSet> out;
  const std::size_t n = mask.plane_size();
  for (std::uint32_t p = 0; p < mask.planes; ++p) {
    auto plane = mask.plane(p);
    for (std::size_t i = 0; i < n; ++i) {
      ConceptId c = plane[i];
      if (c == kNoConcept) continue;
      if (auto it = relabel.find(c); it != relabel.end()) c = it->second;
      auto [slot, inserted] = out.try_emplace(c, mask.height, mask.width);
      slot->second.bits[i] = 1;
    }
  }
  return out;
}

std::size_t intersection_count(const PixelSet& a, const PixelSet& b) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i) n += a.bits[i] & b.bits[i];
  return n;
}

}  // namespace

std::size_t PixelSet::count() const {
  return static_cast<std::size_t>(
      std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

float upper_quantile(std::span<float> values, double quantile) {
  if (values.empty()) {
    throw Error(ErrorCode::kEmptyDataset, kModule,
                "quantile of an empty sample");
  }
  const double pos = (1.0 - quantile) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(lo);
  std::nth_element(values.begin(), values.begin() + lo, values.end());
  const double low = values[lo];
  if (lo + 1 >= values.size() || frac == 0.0) return static_cast<float>(low);
  const double high = *std::min_element(values.begin() + lo + 1, values.end());
  return static_cast<float>(low + frac * (high - low));
}

UnitThresholds compute_thresholds(std::span<const ActivationVolume> volumes,
                                  double quantile) {
  check_quantile(quantile);
  if (volumes.empty()) {
    throw Error(ErrorCode::kEmptyDataset, kModule,
                "cannot compute thresholds over zero images");
  }
  const std::uint32_t units = volumes.front().units;
  for (const auto& v : volumes) {
    if (v.units != units) {
      throw Error(ErrorCode::kDimensionMismatch, kModule,
                  "activation volumes disagree on unit count");
    }
  }
  UnitThresholds out;
  out.quantile_level = quantile;
  out.thresholds.resize(units);
  parallel_for(units, [&](std::size_t t) {
    std::vector<float> sample;
    for (const auto& v : volumes) {
      auto map = v.unit_map(static_cast<UnitIndex>(t));
      sample.insert(sample.end(), map.begin(), map.end());
    }
    out.thresholds[t] = upper_quantile(sample, quantile);
  });
  return out;
}

UnitThresholds compute_thresholds(const DatasetManifest& dataset,
                                  double quantile) {
  check_quantile(quantile);
  if (dataset.images.empty()) {
    throw Error(ErrorCode::kEmptyDataset, kModule,
                "cannot compute thresholds over zero images");
  }
  std::vector<ActivationVolume> volumes(dataset.images.size());
  parallel_for(volumes.size(), [&](std::size_t i) {
    volumes[i] = read_activation(dataset.images[i].activation_path);
  });
  return compute_thresholds(volumes, quantile);
}

std::vector<float> upsample_bilinear(std::span<const float> map,
                                     std::uint32_t height, std::uint32_t width,
                                     std::uint32_t target_height,
                                     std::uint32_t target_width) {
  if (map.size() != static_cast<std::size_t>(height) * width || height == 0 ||
      width == 0) {
    throw Error(ErrorCode::kDimensionMismatch, kModule,
                "source map does not match its stated shape");
  }
  if (target_height < height || target_width < width) {
    throw Error(ErrorCode::kDimensionMismatch, kModule,
                fmt::format("cannot upsample {}x{} to smaller {}x{}", height,
                            width, target_height, target_width));
  }
  if (target_height == height && target_width == width) {
    return {map.begin(), map.end()};
  }
  auto scale = [](std::uint32_t src, std::uint32_t dst) {
    return dst > 1 ? static_cast<double>(src - 1) / (dst - 1) : 0.0;
  };
  const double sy = scale(height, target_height);
  const double sx = scale(width, target_width);
  std::vector<float> out(static_cast<std::size_t>(target_height) *
                         target_width);
  for (std::uint32_t i = 0; i < target_height; ++i) {
    const double y = i * sy;
    const auto y0 = std::min(static_cast<std::uint32_t>(y), height - 1);
    const auto y1 = std::min(y0 + 1, height - 1);
    const double fy = y - y0;
    for (std::uint32_t j = 0; j < target_width; ++j) {
      const double x = j * sx;
      const auto x0 = std::min(static_cast<std::uint32_t>(x), width - 1);
      const auto x1 = std::min(x0 + 1, width - 1);
      const double fx = x - x0;
      const double top = (1.0 - fx) * map[y0 * width + x0] +
                         fx * map[y0 * width + x1];
      const double bottom = (1.0 - fx) * map[y1 * width + x0] +
                            fx * map[y1 * width + x1];
      out[static_cast<std::size_t>(i) * target_width + j] =
          static_cast<float>((1.0 - fy) * top + fy * bottom);
    }
  }
  return out;
}

double iou(const PixelSet& a, const PixelSet& b) {
  if (a.height != b.height || a.width != b.width) {
    throw Error(ErrorCode::kDimensionMismatch, kModule,
                "IoU of pixel sets on different grids");
  }
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    inter += a.bits[i] & b.bits[i];
    uni += a.bits[i] | b.bits[i];
  }
  if (uni == 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

PixelSet threshold_map(std::span<const float> upsampled, std::uint32_t height,
                       std::uint32_t width, float threshold) {
  PixelSet out(height, width);
  for (std::size_t i = 0; i < out.bits.size(); ++i) {
    out.bits[i] = upsampled[i] > threshold ? 1 : 0;
  }
  return out;
}

PixelSet concept_pixels(const SegmentationMask& mask, ConceptId concept_id) {
  PixelSet out(mask.height, mask.width);
  for (std::uint32_t p = 0; p < mask.planes; ++p) {
    auto plane = mask.plane(p);
    for (std::size_t i = 0; i < plane.size(); ++i) {
      if (plane[i] == concept_id) out.bits[i] = 1;
    }
  }
  return out;
}

NeuronConceptScores score_image(ImageId image_id,
                                const ActivationVolume& volume,
                                const SegmentationMask& mask,
                                const UnitThresholds& thresholds,
                                const ConceptSet& scene_concepts) {
  if (scene_concepts.empty()) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                fmt::format("image {}: empty scene concept set", image_id));
  }
  check_threshold_width(volume, thresholds);
  if (mask.height < volume.height || mask.width < volume.width) {
    throw Error(ErrorCode::kDimensionMismatch, kModule,
                fmt::format("image {}: mask is smaller than the activation",
                            image_id));
  }
  auto present = all_concept_pixels(mask, {});
  const PixelSet nothing(mask.height, mask.width);

  NeuronConceptScores out;
  out.image_id = image_id;
  out.per_unit.resize(volume.units);
  for (UnitIndex t = 0; t < volume.units; ++t) {
    const auto fired = unit_pixels(volume, t, mask, thresholds.thresholds[t]);
    const std::size_t fired_count = fired.count();
    auto& scores = out.per_unit[t];
    for (ConceptId c : scene_concepts) {
      auto it = present.find(c);
      if (it == present.end()) {
        scores.emplace_hint(scores.end(), c, 0.0);
        continue;
      }
      const std::size_t inter = intersection_count(fired, it->second);
      const std::size_t uni = fired_count + it->second.count() - inter;
      scores.emplace_hint(scores.end(), c,
                          uni == 0 ? 0.0
                                   : static_cast<double>(inter) /
                                         static_cast<double>(uni));
    }
  }
  return out;
}

NeuronConceptScores score_image(const ImageRecord& record,
                                const UnitThresholds& thresholds,
                                const ConceptSet& scene_concepts) {
  if (!std::filesystem::exists(record.activation_path)) {
    throw Error(ErrorCode::kMissingActivation, kModule,
                fmt::format("image {}: '{}' does not exist", record.image_id,
                            record.activation_path.string()));
  }
  if (!std::filesystem::exists(record.mask_path)) {
    throw Error(ErrorCode::kMissingMask, kModule,
                fmt::format("image {}: '{}' does not exist", record.image_id,
                            record.mask_path.string()));
  }
  return score_image(record.image_id, read_activation(record.activation_path),
                     read_mask(record.mask_path), thresholds, scene_concepts);
}

std::string_view strategy_name(SelectionStrategy strategy) {
  switch (strategy) {
    case SelectionStrategy::kWholeLayer: return "whole_layer";
    case SelectionStrategy::kHighestIoU: return "highest_iou";
    case SelectionStrategy::kMinMaxThreshold: return "minmax";
  }
  return "minmax";
}

std::optional<SelectionStrategy> parse_strategy(std::string_view name) {
  for (auto s : {SelectionStrategy::kWholeLayer, SelectionStrategy::kHighestIoU,
                 SelectionStrategy::kMinMaxThreshold}) {
    if (strategy_name(s) == name) return s;
  }
  return std::nullopt;
}

LearnedConcepts select_learned_concepts(const NeuronConceptScores& scores,
                                        SelectionStrategy strategy) {
  if (scores.per_unit.empty()) {
    throw Error(ErrorCode::kNoScores, kModule,
                fmt::format("image {} has no unit scores", scores.image_id));
  }
  LearnedConcepts out;
  out.image_id = scores.image_id;
  out.strategy = strategy;
  out.per_unit.resize(scores.per_unit.size());

  auto unit_max = [](const std::map<ConceptId, double>& s) {
    double best = 0.0;
    for (const auto& [c, v] : s) best = std::max(best, v);
    return best;
  };

  double theta = std::numeric_limits<double>::infinity();
  if (strategy == SelectionStrategy::kMinMaxThreshold) {
    for (const auto& s : scores.per_unit) {
      const double m = unit_max(s);
      if (m > 0.0) theta = std::min(theta, m);
    }
  }

  for (std::size_t t = 0; t < scores.per_unit.size(); ++t) {
    const auto& s = scores.per_unit[t];
    auto& keep = out.per_unit[t];
    switch (strategy) {
      case SelectionStrategy::kWholeLayer:
        for (const auto& [c, v] : s) {
          if (v > 0.0) keep.insert(keep.end(), c);
        }
        break;
      case SelectionStrategy::kHighestIoU: {
        ConceptId best = kNoConcept;
        double best_v = 0.0;
        for (const auto& [c, v] : s) {
          if (v > best_v) {
            best = c;
            best_v = v;
          }
        }
        if (best != kNoConcept) keep.insert(best);
        break;
      }
      case SelectionStrategy::kMinMaxThreshold:
        for (const auto& [c, v] : s) {
          if (v > 0.0 && v >= theta) keep.insert(keep.end(), c);
        }
        break;
    }
    out.all.insert(keep.begin(), keep.end());
  }
  return out;
}

std::string_view scene_source_name(SceneSource source) {
  switch (source) {
    case SceneSource::kPredicted: return "predicted";
    case SceneSource::kTarget: return "target";
    case SceneSource::kAll: return "all";
  }
  return "predicted";
}

std::optional<SceneSource> parse_scene_source(std::string_view name) {
  for (auto s : {SceneSource::kPredicted, SceneSource::kTarget,
                 SceneSource::kAll}) {
    if (scene_source_name(s) == name) return s;
  }
  return std::nullopt;
}

std::vector<ConceptSet> scene_concept_sets(const DatasetManifest& dataset) {
  std::vector<ConceptSet> out(dataset.scene_vocab.size());
  for (std::size_t i = 0; i < dataset.images.size(); ++i) {
    const auto& c = dataset.image_concepts[i];
    out[dataset.images[i].scene_id].insert(c.begin(), c.end());
  }
  return out;
}

std::vector<NeuronConceptScores> dissect_dataset(
    const DatasetManifest& dataset, const UnitThresholds& thresholds,
    SceneSource source, std::span<const SceneId> predictions) {
  if (source == SceneSource::kPredicted &&
      predictions.size() != dataset.images.size()) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                "one prediction per image is required");
  }
  const auto per_scene = scene_concept_sets(dataset);
  const auto everything = dataset.concept_vocab.all_ids();
  std::vector<NeuronConceptScores> out(dataset.images.size());
  parallel_for(out.size(), [&](std::size_t i) {
    const auto& r = dataset.images[i];
    const ConceptSet* concepts = &everything;
    if (source == SceneSource::kTarget) concepts = &per_scene[r.scene_id];
    if (source == SceneSource::kPredicted) {
      concepts = &per_scene[predictions[i]];
    }
    if (concepts->empty()) {
      // A scene with no annotated concepts (or no images) scores nothing.
      out[i].image_id = r.image_id;
      out[i].per_unit.resize(dataset.units);
      return;
    }
    out[i] = score_image(r, thresholds, *concepts);
  });
  return out;
}

std::vector<double> dataset_best_iou(
    const DatasetManifest& dataset, const UnitThresholds& thresholds,
    const std::map<ConceptId, ConceptId>& relabel) {
  if (dataset.images.empty()) {
    throw Error(ErrorCode::kEmptyDataset, kModule,
                "dataset-level IoU over zero images");
  }
  const std::uint32_t units = dataset.units;

  struct Partial {
    std::vector<std::size_t> fired;                       // per unit
    std::map<ConceptId, std::size_t> labelled;            // per concept
    std::vector<std::map<ConceptId, std::size_t>> inter;  // per unit
  };
  std::vector<Partial> partials(dataset.images.size());
  parallel_for(partials.size(), [&](std::size_t i) {
    const auto& r = dataset.images[i];
    const auto volume = read_activation(r.activation_path);
    const auto mask = read_mask(r.mask_path);
    check_threshold_width(volume, thresholds);
    const auto present = all_concept_pixels(mask, relabel);
    auto& p = partials[i];
    p.fired.resize(units);
    p.inter.resize(units);
    for (const auto& [c, pixels] : present) p.labelled[c] = pixels.count();
    for (UnitIndex t = 0; t < units; ++t) {
      const auto fired = unit_pixels(volume, t, mask, thresholds.thresholds[t]);
      p.fired[t] = fired.count();
      if (p.fired[t] == 0) continue;
      for (const auto& [c, pixels] : present) {
        if (auto n = intersection_count(fired, pixels); n > 0) {
          p.inter[t][c] = n;
        }
      }
    }
  });

  std::vector<std::size_t> fired(units, 0);
  std::map<ConceptId, std::size_t> labelled;
  std::vector<std::map<ConceptId, std::size_t>> inter(units);
  for (const auto& p : partials) {
    for (UnitIndex t = 0; t < units; ++t) {
      fired[t] += p.fired[t];
      for (const auto& [c, n] : p.inter[t]) inter[t][c] += n;
    }
    for (const auto& [c, n] : p.labelled) labelled[c] += n;
  }

  std::vector<double> best(units, 0.0);
  for (UnitIndex t = 0; t < units; ++t) {
    for (const auto& [c, n] : inter[t]) {
      const std::size_t uni = fired[t] + labelled[c] - n;
      best[t] = std::max(best[t], static_cast<double>(n) /
                                      static_cast<double>(uni));
    }
  }
  return best;
}

void write_scores(const std::filesystem::path& path,
                  std::span<const NeuronConceptScores> scores) {
  std::string out;
  const std::size_t units = scores.empty() ? 0 : scores.front().per_unit.size();
  out += fmt::format("#units {}\n", units);
  for (const auto& s : scores) {
    out += fmt::format("#image {}\n", s.image_id);
    for (std::size_t t = 0; t < s.per_unit.size(); ++t) {
      for (const auto& [c, v] : s.per_unit[t]) {
        if (v > 0.0) {
          out += fmt::format("{}\t{}\t{}\t{}\n", s.image_id, t, c,
                             format_double(v));
        }
      }
    }
  }
  write_text_file(path, out);
}

std::vector<NeuronConceptScores> read_scores(
    const std::filesystem::path& path) {
  std::vector<NeuronConceptScores> out;
  std::size_t units = 0;
  bool have_units = false;
  for (const auto& line : read_lines(path)) {
    if (line.empty()) continue;
    if (line.rfind("#units ", 0) == 0) {
      units = parse_u32(std::string_view(line).substr(7));
      have_units = true;
      continue;
    }
    if (line.rfind("#image ", 0) == 0) {
      if (!have_units) {
        throw Error(ErrorCode::kParseError, kModule,
                    fmt::format("'{}': #image before #units", path.string()));
      }
      auto& s = out.emplace_back();
      s.image_id = parse_u64(std::string_view(line).substr(7));
      s.per_unit.resize(units);
      continue;
    }
    if (line.front() == '#') continue;
    auto f = split_fields(line);
    if (f.size() != 4 || out.empty()) {
      throw Error(ErrorCode::kParseError, kModule,
                  fmt::format("'{}': malformed score row '{}'", path.string(),
                              line));
    }
    auto& s = out.back();
    if (parse_u64(f[0]) != s.image_id) {
      throw Error(ErrorCode::kParseError, kModule,
                  fmt::format("'{}': row '{}' outside its #image block",
                              path.string(), line));
    }
    const auto t = parse_u32(f[1]);
    if (t >= units) {
      throw Error(ErrorCode::kDimensionMismatch, kModule,
                  fmt::format("'{}': unit {} >= {}", path.string(), t, units));
    }
    s.per_unit[t][parse_u32(f[2])] = parse_double(f[3]);
  }
  return out;
}

void write_learned_concepts(const std::filesystem::path& path,
                            std::span<const LearnedConcepts> concepts) {
  std::string out;
  for (const auto& lc : concepts) {
    for (std::size_t t = 0; t < lc.per_unit.size(); ++t) {
      for (ConceptId c : lc.per_unit[t]) {
        out += fmt::format("{}\t{}\t{}\t{}\n", lc.image_id,
                           strategy_name(lc.strategy), t, c);
      }
    }
  }
  write_text_file(path, out);
}

std::vector<LearnedConcepts> read_learned_concepts(
    const std::filesystem::path& path) {
  std::vector<LearnedConcepts> out;
  std::unordered_map<ImageId, std::size_t> index;
  for (const auto& line : read_lines(path)) {
    if (line.empty() || line.front() == '#') continue;
    auto f = split_fields(line);
    if (f.size() != 4) {
      throw Error(ErrorCode::kParseError, kModule,
                  fmt::format("'{}': malformed LC row '{}'", path.string(),
                              line));
    }
    const auto id = parse_u64(f[0]);
    auto strategy = parse_strategy(f[1]);
    if (!strategy) {
      throw Error(ErrorCode::kParseError, kModule,
                  fmt::format("'{}': unknown strategy '{}'", path.string(),
                              f[1]));
    }
    auto [it, inserted] = index.try_emplace(id, out.size());
    if (inserted) {
      auto& lc = out.emplace_back();
      lc.image_id = id;
      lc.strategy = *strategy;
    }
    auto& lc = out[it->second];
    const auto t = parse_u32(f[2]);
    if (lc.per_unit.size() <= t) lc.per_unit.resize(t + 1);
    const auto c = parse_u32(f[3]);
    lc.per_unit[t].insert(c);
    lc.all.insert(c);
  }
  return out;
}

void write_thresholds(const std::filesystem::path& path,
                      const UnitThresholds& thresholds) {
  std::string out =
      fmt::format("#quantile {}\n", format_double(thresholds.quantile_level));
  for (std::size_t t = 0; t < thresholds.thresholds.size(); ++t) {
    out += fmt::format("{}\t{}\n", t, format_float(thresholds.thresholds[t]));
  }
  write_text_file(path, out);
}

UnitThresholds read_thresholds(const std::filesystem::path& path) {
  UnitThresholds out;
  for (const auto& line : read_lines(path)) {
    if (line.empty()) continue;
    if (line.rfind("#quantile ", 0) == 0) {
      out.quantile_level = parse_double(std::string_view(line).substr(10));
      continue;
    }
    if (line.front() == '#') continue;
    auto f = split_fields(line);
    if (f.size() != 2 || parse_u32(f[0]) != out.thresholds.size()) {
      throw Error(ErrorCode::kParseError, kModule,
                  fmt::format("'{}': malformed threshold row '{}'",
                              path.string(), line));
    }
    out.thresholds.push_back(parse_float(f[1]));
  }
  return out;
}

}  // namespace neurodissect
