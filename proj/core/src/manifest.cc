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

#include "neurodissect/manifest.h"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>

#include <fmt/core.h>

#include "neurodissect/error.h"
#include "neurodissect/io.h"
#include "neurodissect/parallel.h"

namespace neurodissect {
namespace {

constexpr char kModule[] = "core_model";

std::filesystem::path resolve(const std::filesystem::path& base,
                              std::string_view text) {
  std::filesystem::path p{std::string(text)};
  if (p.is_absolute()) return p.lexically_normal();
  return (base / p).lexically_normal();
}

std::string relative_to(const std::filesystem::path& base,
                        const std::filesystem::path& p) {
  auto rel = p.lexically_proximate(base);
  return rel.empty() ? p.string() : rel.generic_string();
}

std::vector<float> parse_feature_list(std::string_view text) {
  std::vector<float> out;
  for (auto v : split_fields(text, ',')) out.push_back(parse_float(v));
  return out;
}

struct ImageCheck {
  std::uint32_t units = 0;
  ConceptSet concepts;
};

ImageCheck check_image(const ImageRecord& record, const ConceptVocab& vocab) {
  if (!std::filesystem::exists(record.activation_path)) {
    throw Error(ErrorCode::kMissingFile, kModule,
                fmt::format("image {}: activation '{}' does not exist",
                            record.image_id, record.activation_path.string()));
  }
  if (!std::filesystem::exists(record.mask_path)) {
    throw Error(ErrorCode::kMissingFile, kModule,
                fmt::format("image {}: mask '{}' does not exist",
                            record.image_id, record.mask_path.string()));
  }
  auto volume = read_activation(record.activation_path);
  auto mask = read_mask(record.mask_path);
  if (mask.height < volume.height || mask.width < volume.width) {
    throw Error(ErrorCode::kDimensionMismatch, kModule,
                fmt::format("image {}: mask {}x{} is smaller than activation "
                            "{}x{}",
                            record.image_id, mask.height, mask.width,
                            volume.height, volume.width));
  }
  ImageCheck check;
  check.units = volume.units;
  check.concepts = mask.concepts();
  for (ConceptId id : check.concepts) {
    if (!vocab.contains(id)) {
      throw Error(ErrorCode::kVocabMismatch, kModule,
                  fmt::format("image {}: mask references concept id {} which "
                              "is absent from the vocabulary",
                              record.image_id, id));
    }
  }
  if (record.pooled_features &&
      record.pooled_features->size() != volume.units) {
    throw Error(ErrorCode::kDimensionMismatch, kModule,
                fmt::format("image {}: {} pooled features for {} units",
                            record.image_id, record.pooled_features->size(),
                            volume.units));
  }
  return check;
}

}  // namespace

DatasetManifest load_manifest(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  const auto base = path.parent_path();
  DatasetManifest m;
  std::map<std::string, std::string, std::less<>> header;
  std::vector<std::pair<std::size_t, std::string_view>> body;

  for (std::size_t n = 0; n < lines.size(); ++n) {
    std::string_view line = lines[n];
    if (line.empty()) continue;
    if (line.front() == '#') {
      auto space = line.find_first_of(" \t");
      if (space == std::string_view::npos) continue;
      header[std::string(line.substr(1, space - 1))] =
          std::string(line.substr(space + 1));
      continue;
    }
    body.emplace_back(n + 1, line);
  }

  auto header_path = [&](std::string_view key) {
    auto it = header.find(key);
    if (it == header.end()) {
      throw Error(ErrorCode::kParseError, kModule,
                  fmt::format("'{}' is missing the #{} header", path.string(),
                              key));
    }
    return resolve(base, it->second);
  };
  m.concept_vocab_path = header_path("concept_vocab");
  m.scene_vocab_path = header_path("scene_vocab");
  m.head_path = header_path("head");
  m.concept_vocab = read_concept_vocab(m.concept_vocab_path);
  m.scene_vocab = read_scene_vocab(m.scene_vocab_path);
  m.head = read_linear_head(m.head_path);
  if (m.head.num_classes != m.scene_vocab.size()) {
    throw Error(ErrorCode::kDimensionMismatch, kModule,
                fmt::format("head has {} classes but the scene vocabulary has "
                            "{} scenes",
                            m.head.num_classes, m.scene_vocab.size()));
  }

  std::unordered_set<ImageId> seen;
  for (const auto& [line_no, line] : body) {
    auto f = split_fields(line);
    if (f.size() != 6 && f.size() != 7) {
      throw Error(ErrorCode::kParseError, kModule,
                  fmt::format("{}:{}: expected 6 or 7 tab-separated fields, "
                              "got {}",
                              path.string(), line_no, f.size()));
    }
    ImageRecord r;
    r.image_id = parse_u64(f[0]);
    r.scene_id = parse_u32(f[1]);
    if (f[2] != "-") r.predicted_scene_id = parse_u32(f[2]);
    r.activation_path = resolve(base, f[3]);
    r.mask_path = resolve(base, f[4]);
    auto split = parse_split(f[5]);
    if (!split) {
      throw Error(ErrorCode::kParseError, kModule,
                  fmt::format("{}:{}: unknown split '{}'", path.string(),
                              line_no, f[5]));
    }
    r.split = *split;
    if (f.size() == 7 && f[6] != "-") {
      r.pooled_features = parse_feature_list(f[6]);
    }
    if (!m.scene_vocab.contains(r.scene_id)) {
      throw Error(ErrorCode::kVocabMismatch, kModule,
                  fmt::format("{}:{}: scene id {} is not in the vocabulary",
                              path.string(), line_no, r.scene_id));
    }
    if (r.predicted_scene_id && !m.scene_vocab.contains(*r.predicted_scene_id)) {
      throw Error(ErrorCode::kVocabMismatch, kModule,
                  fmt::format("{}:{}: predicted scene id {} is not in the "
                              "vocabulary",
                              path.string(), line_no, *r.predicted_scene_id));
    }
    if (!seen.insert(r.image_id).second) {
      throw Error(ErrorCode::kParseError, kModule,
                  fmt::format("{}:{}: duplicate image id {}", path.string(),
                              line_no, r.image_id));
    }
    m.images.push_back(std::move(r));
  }

  if (m.images.empty()) {
    m.warnings.push_back(
        fmt::format("manifest '{}' lists no images", path.string()));
    return m;
  }

  std::vector<ImageCheck> checks(m.images.size());
  parallel_for(m.images.size(), [&](std::size_t i) {
    checks[i] = check_image(m.images[i], m.concept_vocab);
  });
  m.units = checks.front().units;
  m.image_concepts.reserve(checks.size());
  for (std::size_t i = 0; i < checks.size(); ++i) {
    if (checks[i].units != m.units) {
      throw Error(ErrorCode::kDimensionMismatch, kModule,
                  fmt::format("image {} has {} units, image {} has {}",
                              m.images[i].image_id, checks[i].units,
                              m.images.front().image_id, m.units));
    }
    m.image_concepts.push_back(std::move(checks[i].concepts));
  }
  if (m.head.num_units != m.units) {
    throw Error(ErrorCode::kDimensionMismatch, kModule,
                fmt::format("head expects {} units but activations have {}",
                            m.head.num_units, m.units));
  }
  return m;
}

void write_manifest(const std::filesystem::path& path,
                    const DatasetManifest& manifest) {
  const auto base = path.parent_path();
  std::string out;
  out += fmt::format("#concept_vocab {}\n",
                     relative_to(base, manifest.concept_vocab_path));
  out += fmt::format("#scene_vocab {}\n",
                     relative_to(base, manifest.scene_vocab_path));
  out += fmt::format("#head {}\n", relative_to(base, manifest.head_path));
  for (const auto& r : manifest.images) {
    out += fmt::format(
        "{}\t{}\t{}\t{}\t{}\t{}", r.image_id, r.scene_id,
        r.predicted_scene_id ? std::to_string(*r.predicted_scene_id) : "-",
        relative_to(base, r.activation_path), relative_to(base, r.mask_path),
        split_name(r.split));
    if (r.pooled_features) {
      out += '\t';
      for (std::size_t i = 0; i < r.pooled_features->size(); ++i) {
        if (i) out += ',';
        out += format_float((*r.pooled_features)[i]);
      }
    }
    out += '\n';
  }
  write_text_file(path, out);
}

std::vector<float> pool_features(const ActivationVolume& volume) {
  std::vector<float> out(volume.units);
  const double n = static_cast<double>(volume.map_size());
  for (UnitIndex t = 0; t < volume.units; ++t) {
    double sum = 0.0;
    for (float v : volume.unit_map(t)) sum += v;
    out[t] = static_cast<float>(sum / n);
  }
  return out;
}

std::vector<float> record_features(const ImageRecord& record) {
  if (record.pooled_features) return *record.pooled_features;
  return pool_features(read_activation(record.activation_path));
}

std::vector<std::vector<float>> all_features(const DatasetManifest& manifest) {
  std::vector<std::vector<float>> out(manifest.images.size());
  parallel_for(out.size(), [&](std::size_t i) {
    out[i] = record_features(manifest.images[i]);
  });
  return out;
}

SceneId effective_prediction(const DatasetManifest& manifest,
                             std::size_t image_index,
                             std::span<const float> features) {
  const auto& r = manifest.images[image_index];
  if (r.predicted_scene_id) return *r.predicted_scene_id;
  auto logits = manifest.head.logits(features);
  return static_cast<SceneId>(argmax(logits));
}

}  // namespace neurodissect
