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

// Shared fixtures for the unit tests: scratch directories and a small
// on-disk dataset builder.

#ifndef NEURODISSECT_TESTS_TEST_UTIL_H_
#define NEURODISSECT_TESTS_TEST_UTIL_H_

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "neurodissect/io.h"
#include "neurodissect/manifest.h"
#include "neurodissect/types.h"

namespace neurodissect::testing {

class TempDir {
 public:
  TempDir() {
    std::string tmpl =
        (std::filesystem::temp_directory_path() / "ndtest-XXXXXX").string();
    path_ = mkdtemp(tmpl.data());
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const {
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// One image for build_dataset.
struct TestImage {
  SceneId scene = 0;
  ActivationVolume activation;
  SegmentationMask mask;
  std::optional<SceneId> predicted;
};

// Writes vocabularies, a zero head, volumes, masks and a manifest under
// `dir` and returns the manifest path. Concept ids follow `concepts`
// order starting at 1.
inline std::filesystem::path build_dataset(
    const std::filesystem::path& dir, const std::vector<std::string>& concepts,
    const std::vector<std::string>& scenes,
    const std::vector<TestImage>& images) {
  std::vector<ConceptEntry> ce;
  for (std::size_t i = 0; i < concepts.size(); ++i) {
    ce.push_back({static_cast<ConceptId>(i + 1), concepts[i],
                  ConceptCategory::kObject});
  }
  std::vector<SceneEntry> se;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    se.push_back({static_cast<SceneId>(i), scenes[i]});
  }
  const std::uint32_t units =
      images.empty() ? 1 : images.front().activation.units;
  LinearHead head;
  head.num_classes = static_cast<std::uint32_t>(scenes.size());
  head.num_units = units;
  head.weights.assign(static_cast<std::size_t>(head.num_classes) * units, 0.f);
  head.bias.assign(head.num_classes, 0.f);

  DatasetManifest m;
  m.concept_vocab_path = dir / "concepts.tsv";
  m.scene_vocab_path = dir / "scenes.tsv";
  m.head_path = dir / "head.tsv";
  for (std::size_t i = 0; i < images.size(); ++i) {
    ImageRecord r;
    r.image_id = i + 1;
    r.scene_id = images[i].scene;
    r.predicted_scene_id = images[i].predicted;
    r.activation_path = dir / "act" / (std::to_string(i + 1) + ".nact");
    r.mask_path = dir / "mask" / (std::to_string(i + 1) + ".nmsk");
    write_activation(r.activation_path, images[i].activation);
    write_mask(r.mask_path, images[i].mask);
    m.images.push_back(r);
  }
  write_concept_vocab(m.concept_vocab_path, ConceptVocab(ce));
  write_scene_vocab(m.scene_vocab_path, SceneVocab(se));
  write_linear_head(m.head_path, head);
  write_manifest(dir / "manifest.tsv", m);
  return dir / "manifest.tsv";
}

inline ActivationVolume make_volume(std::uint32_t units, std::uint32_t h,
                                    std::uint32_t w, std::vector<float> data) {
  ActivationVolume v;
  v.units = units;
  v.height = h;
  v.width = w;
  v.data = std::move(data);
  return v;
}

inline SegmentationMask make_mask(std::uint32_t planes, std::uint32_t h,
                                  std::uint32_t w,
                                  std::vector<ConceptId> data) {
  SegmentationMask m;
  m.planes = planes;
  m.height = h;
  m.width = w;
  m.data = std::move(data);
  return m;
}

}  // namespace neurodissect::testing

#endif  // NEURODISSECT_TESTS_TEST_UTIL_H_
