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

#ifndef NEURODISSECT_TOOLS_COMMANDS_H_
#define NEURODISSECT_TOOLS_COMMANDS_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "neurodissect/dissection.h"
#include "neurodissect/embedding.h"
#include "neurodissect/knowledge.h"
#include "neurodissect/manipulation.h"
#include "neurodissect/synth.h"

namespace neurodissect::cli {

namespace fs = std::filesystem;

struct SynthOptions {
  SynthConfig config;
  fs::path out;
};

struct DissectOptions {
  fs::path manifest;
  fs::path out;
  double quantile = kDefaultQuantile;
  SceneSource source = SceneSource::kPredicted;
};

struct CoreConceptOptions {
  fs::path manifest;
  fs::path kg;
  fs::path out;
  std::vector<CoreConceptKind> kinds = {CoreConceptKind::kSCC,
                                        CoreConceptKind::kICC};
  std::uint32_t hops = 2;
  std::uint32_t k = 2;
  double grid_step = kDefaultGridStep;
  double fuzzy_floor = kDefaultFuzzyFloor;
  std::vector<std::string> relations;
};

struct ExplainOptions {
  fs::path manifest;
  fs::path scores;
  fs::path core_concepts;
  fs::path out;
  std::vector<SelectionStrategy> strategies = {
      SelectionStrategy::kWholeLayer, SelectionStrategy::kHighestIoU,
      SelectionStrategy::kMinMaxThreshold};
};

struct FilterOptions {
  fs::path manifest;
  fs::path kg;
  fs::path out;
  std::optional<fs::path> embedding;  // train TransE when absent
  std::vector<std::uint32_t> ks;
  TransEConfig transe;
  double quantile = kDefaultQuantile;
  double fuzzy_floor = kDefaultFuzzyFloor;
};

struct AblateOptions {
  fs::path manifest;
  fs::path scores;
  fs::path core_concepts;
  fs::path out;
  CoreConceptKind kind = CoreConceptKind::kICC;
  SelectionStrategy strategy = SelectionStrategy::kMinMaxThreshold;
  std::vector<Direction> directions = {Direction::kPositive,
                                       Direction::kNegative};
  std::vector<std::uint32_t> ks = {20};
};

struct RetrainOptions {
  fs::path manifest;
  fs::path scores;
  fs::path core_concepts;
  fs::path out;
  CoreConceptKind kind = CoreConceptKind::kICC;
  SelectionStrategy strategy = SelectionStrategy::kMinMaxThreshold;
  SvmConfig svm;
};

// Each command writes its reports plus config.txt under `out` and prints a
// short human summary to `log`. Errors propagate as neurodissect::Error.
void cmd_synth(const SynthOptions& options, std::ostream& log);
void cmd_dissect(const DissectOptions& options, std::ostream& log);
void cmd_core_concepts(const CoreConceptOptions& options, std::ostream& log);
void cmd_explain(const ExplainOptions& options, std::ostream& log);
void cmd_filter(const FilterOptions& options, std::ostream& log);
void cmd_ablate(const AblateOptions& options, std::ostream& log);
void cmd_retrain_pe(const RetrainOptions& options, std::ostream& log);

// Parses `args` (program name first) and dispatches. Returns the process
// exit code: 0 success, 2 input error, 3 computation error.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace neurodissect::cli

#endif  // NEURODISSECT_TOOLS_COMMANDS_H_
