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

#include "neurodissect/synth.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include <fmt/core.h>

#include "neurodissect/error.h"
#include "neurodissect/io.h"
#include "neurodissect/knowledge.h"
#include "neurodissect/manifest.h"
#include "neurodissect/random.h"
#include "neurodissect/types.h"

namespace neurodissect {
namespace {

constexpr char kModule[] = "synth";

constexpr std::array<const char*, 6> kSceneNames = {
    "bedroom", "kitchen", "bathroom", "office", "forest", "beach"};
constexpr std::array<const char*, 6> kIdentifierNames = {
    "bed", "stove", "bathtub", "desk", "tree", "sand"};

std::string scene_name(std::uint32_t s) {
  return s < kSceneNames.size() ? kSceneNames[s] : fmt::format("scene_{}", s);
}

std::string identifier_name(std::uint32_t s) {
  return s < kIdentifierNames.size() ? kIdentifierNames[s]
                                     : fmt::format("landmark_{}", s);
}

// The graph spells one identifier differently so alignment has to go
// through the fuzzy path.
std::string identifier_node(std::uint32_t s) {
  return s == 2 ? "bath_tub" : identifier_name(s);
}

struct Rect {
  std::uint32_t r0 = 0, c0 = 0, rows = 0, cols = 0;
  bool contains(std::uint32_t r, std::uint32_t c) const {
    return r >= r0 && r < r0 + rows && c >= c0 && c < c0 + cols;
  }
  std::uint32_t center_row() const { return r0 + (rows - 1) / 2; }
  std::uint32_t center_col() const { return c0 + (cols - 1) / 2; }
};

// Peaked profile over a region: 1 at the rim rising to 1.5 at the centre.
float bump(const Rect& rect, std::uint32_t r, std::uint32_t c) {
  const double dr = std::abs(static_cast<double>(r) - rect.center_row());
  const double dc = std::abs(static_cast<double>(c) - rect.center_col());
  const double reach =
      std::max<double>({1.0, rect.rows / 2.0, rect.cols / 2.0});
  return static_cast<float>(1.0 + 0.5 * (1.0 - std::max(dr, dc) / reach));
}

}  // namespace

SynthSummary write_synth_dataset(const std::filesystem::path& dir,
                                 const SynthConfig& cfg) {
  if (cfg.scenes < 1 || cfg.images_per_scene < 1 || cfg.units < cfg.scenes) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                fmt::format("need scenes >= 1, images >= 1 and units >= "
                            "scenes (got {}, {}, {})",
                            cfg.scenes, cfg.images_per_scene, cfg.units));
  }
  if (cfg.height < 4 || cfg.width < 4 || cfg.mask_scale < 1) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                "the activation grid must be at least 4x4");
  }
  if (!(cfg.forge_fraction >= 0.0 && cfg.forge_fraction < 1.0) ||
      !(cfg.test_fraction >= 0.0 && cfg.test_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                "forge and test fractions must lie in [0, 1)");
  }
  const std::uint32_t S = cfg.scenes;
  const std::uint32_t h = cfg.height;
  const std::uint32_t w = cfg.width;
  const std::uint32_t mh = h * cfg.mask_scale;
  const std::uint32_t mw = w * cfg.mask_scale;
  const bool decoys = cfg.units >= 2 * S;
  Rng rng(cfg.seed);

  // Vocabulary: identifiers first so they win ties, then shared context.
  std::vector<ConceptEntry> concepts;
  for (std::uint32_t s = 0; s < S; ++s) {
    concepts.push_back({s + 1, identifier_name(s), ConceptCategory::kObject});
  }
  const ConceptId wall = S + 1, floor = S + 2, window = S + 3, lamp = S + 4,
                  white = S + 5;
  concepts.push_back({wall, "wall", ConceptCategory::kPart});
  concepts.push_back({floor, "floor", ConceptCategory::kPart});
  concepts.push_back({window, "window", ConceptCategory::kObject});
  concepts.push_back({lamp, "lamp", ConceptCategory::kObject});
  concepts.push_back({white, "white", ConceptCategory::kColor});
  std::vector<SceneEntry> scenes;
  for (std::uint32_t s = 0; s < S; ++s) scenes.push_back({s, scene_name(s)});

  SynthSummary summary;
  summary.wall = wall;
  summary.floor = floor;
  for (std::uint32_t s = 0; s < S; ++s) {
    PlantedScene p{s, s + 1, s, std::nullopt};
    if (decoys) p.decoy = S + s;
    summary.plants.push_back(p);
  }

  // Head: the discriminative unit votes for its scene, the decoy for the
  // next scene with half the weight. Fillers carry no weight.
  LinearHead head;
  head.num_classes = S;
  head.num_units = cfg.units;
  head.weights.assign(static_cast<std::size_t>(S) * cfg.units, 0.0f);
  head.bias.assign(S, 0.0f);
  for (const auto& p : summary.plants) {
    head.weights[p.scene * cfg.units + p.discriminative] = 10.0f;
    if (p.decoy) head.weights[((p.scene + 1) % S) * cfg.units + *p.decoy] = 5.0f;
  }

  const Rect floor_rect{h - std::max(1u, h / 4), 0, std::max(1u, h / 4), w};
  const std::uint32_t room = floor_rect.r0;  // rows above the floor
  const std::uint32_t ident_rows = (room + 1) / 2;
  const std::uint32_t ident_cols = (w * 11 + 19) / 20;
  const std::uint32_t n = cfg.images_per_scene;
  const auto forged = static_cast<std::uint32_t>(std::ceil(n * cfg.forge_fraction));
  const auto tested = static_cast<std::uint32_t>(std::ceil(n * cfg.test_fraction));

  DatasetManifest manifest;
  manifest.concept_vocab_path = dir / "concepts.tsv";
  manifest.scene_vocab_path = dir / "scenes.tsv";
  manifest.head_path = dir / "head.tsv";

  for (std::uint32_t s = 0; s < S; ++s) {
    for (std::uint32_t i = 0; i < n; ++i) {
      ImageRecord rec;
      rec.image_id = static_cast<ImageId>(s) * n + i + 1;
      rec.scene_id = s;
      const bool forge = S > 1 && i >= n - std::min(forged, n - 1);
      rec.predicted_scene_id = forge ? (s + 1) % S : s;
      // The test block sits just before the forged block; the first image
      // of a scene always trains.
      rec.split = i > 0 && i + forged < n && i + forged + tested >= n
                      ? Split::kTest
                      : Split::kTrain;

      Rect ident{static_cast<std::uint32_t>(rng.below(room - ident_rows + 1)),
                 static_cast<std::uint32_t>(rng.below(w - ident_cols + 1)),
                 ident_rows, ident_cols};
      // Optional window in the top row beside the identifier, optional lamp
      // one row below it.
      std::optional<Rect> win;
      std::optional<Rect> lmp;
      for (std::uint32_t c = 0; c + 1 < w; ++c) {
        Rect cand{0, c, 1, 2};
        if (!ident.contains(0, c) && !ident.contains(0, c + 1)) {
          if (rng.bernoulli(0.6)) win = cand;
          break;
        }
      }
      for (std::uint32_t c = w; c-- > 0;) {
        const std::uint32_t r = std::min(1u, room - 1);
        if (!ident.contains(r, c) && !(win && win->contains(r, c))) {
          if (rng.bernoulli(0.5)) lmp = Rect{r, c, 1, 1};
          break;
        }
      }
      const bool painted = rng.coin();

      ActivationVolume act;
      act.units = cfg.units;
      act.height = h;
      act.width = w;
      act.data.assign(static_cast<std::size_t>(cfg.units) * h * w, 0.0f);
      // Earlier images peak slightly higher, so when the quantile leaves
      // only some images firing, the honestly predicted ones go first.
      const float lead = 1e-3f * static_cast<float>(n - i) / n;
      auto paint = [&](UnitIndex u, const Rect& rect) {
        for (std::uint32_t r = 0; r < h; ++r) {
          for (std::uint32_t c = 0; c < w; ++c) {
            if (!rect.contains(r, c)) continue;
            act.data[(u * h + r) * w + c] =
                bump(rect, r, c) + lead +
                static_cast<float>(rng.uniform(0.0, 1e-5));
          }
        }
      };
      paint(s, ident);
      if (decoys) paint(S + s, floor_rect);
      for (UnitIndex u = decoys ? 2 * S : S; u < cfg.units; ++u) {
        if ((u - S) % 2 == 0 && win) paint(u, *win);
      }

      SegmentationMask mask;
      mask.planes = 2;
      mask.height = mh;
      mask.width = mw;
      mask.data.assign(2 * static_cast<std::size_t>(mh) * mw, kNoConcept);
      for (std::uint32_t y = 0; y < mh; ++y) {
        for (std::uint32_t x = 0; x < mw; ++x) {
          const std::uint32_t r = y / cfg.mask_scale;
          const std::uint32_t c = x / cfg.mask_scale;
          ConceptId id = wall;
          if (floor_rect.contains(r, c)) {
            id = floor;
          } else if (ident.contains(r, c)) {
            id = s + 1;
          } else if (win && win->contains(r, c)) {
            id = window;
          } else if (lmp && lmp->contains(r, c)) {
            id = lamp;
          }
          const std::size_t at = static_cast<std::size_t>(y) * mw + x;
          mask.data[at] = id;
          if (painted && id == wall) mask.data[mask.plane_size() + at] = white;
        }
      }

      const auto stem = fmt::format("{:06}", rec.image_id);
      rec.activation_path = dir / "act" / (stem + ".nact");
      rec.mask_path = dir / "mask" / (stem + ".nmsk");
      write_activation(rec.activation_path, act);
      write_mask(rec.mask_path, mask);
      rec.pooled_features = pool_features(act);
      manifest.images.push_back(std::move(rec));
    }
  }

  std::vector<Triple> triples;
  for (std::uint32_t s = 0; s < S; ++s) {
    triples.push_back({identifier_node(s), "AtLocation", scene_name(s)});
    triples.push_back({"wall", "AtLocation", scene_name(s)});
  }
  for (std::uint32_t s = 0; s < std::min(S, 2u); ++s) {
    triples.push_back({"lamp", "AtLocation", scene_name(s)});
  }
  triples.push_back({"window", "PartOf", "house"});
  triples.push_back({"bulb", "PartOf", "lamp"});
  triples.push_back({"lamp", "UsedFor", "light"});

  std::string plant = "scene\tidentifier\tdiscriminative_unit\tdecoy_unit\n";
  for (const auto& p : summary.plants) {
    plant += fmt::format("{}\t{}\t{}\t{}\n", p.scene, p.identifier,
                         p.discriminative,
                         p.decoy ? std::to_string(*p.decoy) : "-");
  }

  write_concept_vocab(manifest.concept_vocab_path, ConceptVocab(concepts));
  write_scene_vocab(manifest.scene_vocab_path, SceneVocab(scenes));
  write_linear_head(manifest.head_path, head);
  summary.manifest = dir / "manifest.tsv";
  summary.knowledge_graph = dir / "kg.tsv";
  write_manifest(summary.manifest, manifest);
  write_knowledge_graph(summary.knowledge_graph, KnowledgeGraph(triples));
  write_text_file(dir / "plant.tsv", plant);
  summary.images = manifest.images.size();
  return summary;
}

}  // namespace neurodissect
