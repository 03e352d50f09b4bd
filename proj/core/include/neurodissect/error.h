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

#ifndef NEURODISSECT_ERROR_H_
#define NEURODISSECT_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace neurodissect {

// Every failure the toolkit reports. The module that raised the error is
// carried alongside so the CLI can report provenance.
enum class ErrorCode {
  kInvalidArgument,
  kParseError,
  kMissingFile,
  kVocabMismatch,
  kDimensionMismatch,
  kDiskWrite,
  // dissection
  kEmptyDataset,
  kMissingMask,
  kMissingActivation,
  kNoScores,
  // knowledge
  kSceneNotInKG,
  kNoImagesForScene,
  kIndistinguishableScenes,
  // embedding
  kEmptyGraph,
  kUnalignedConcept,
  kKTooLarge,
  kUnclusteredConcept,
  kZeroBaseline,
  // explanation
  kEmptyCoreConcepts,
  kEmptyFalseSet,
  kEmptySet,
  // manipulation
  kNoTruePredictions,
  kUnitOutOfRange,
  kSingleClass,
};

std::string_view error_code_name(ErrorCode code);

// True for errors caused by bad or missing inputs (CLI exit code 2); all
// others are computation errors (exit code 3).
bool is_input_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string module, const std::string& message);

  ErrorCode code() const { return code_; }
  const std::string& module() const { return module_; }

 private:
  ErrorCode code_;
  std::string module_;
};

}  // namespace neurodissect

#endif  // NEURODISSECT_ERROR_H_
