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

#include "neurodissect/error.h"

#include <utility>

namespace neurodissect {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kMissingFile: return "MissingFile";
    case ErrorCode::kVocabMismatch: return "VocabMismatch";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kDiskWrite: return "DiskWrite";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kMissingMask: return "MissingMask";
    case ErrorCode::kMissingActivation: return "MissingActivation";
    case ErrorCode::kNoScores: return "NoScores";
    case ErrorCode::kSceneNotInKG: return "SceneNotInKG";
    case ErrorCode::kNoImagesForScene: return "NoImagesForScene";
    case ErrorCode::kIndistinguishableScenes: return "IndistinguishableScenes";
    case ErrorCode::kEmptyGraph: return "EmptyGraph";
    case ErrorCode::kUnalignedConcept: return "UnalignedConcept";
    case ErrorCode::kKTooLarge: return "KTooLarge";
    case ErrorCode::kUnclusteredConcept: return "UnclusteredConcept";
    case ErrorCode::kZeroBaseline: return "ZeroBaseline";
    case ErrorCode::kEmptyCoreConcepts: return "EmptyCoreConcepts";
    case ErrorCode::kEmptyFalseSet: return "EmptyFalseSet";
    case ErrorCode::kEmptySet: return "EmptySet";
    case ErrorCode::kNoTruePredictions: return "NoTruePredictions";
    case ErrorCode::kUnitOutOfRange: return "UnitOutOfRange";
    case ErrorCode::kSingleClass: return "SingleClass";
  }
  return "Unknown";
}

bool is_input_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kParseError:
    case ErrorCode::kMissingFile:
    case ErrorCode::kVocabMismatch:
    case ErrorCode::kDimensionMismatch:
    case ErrorCode::kMissingMask:
    case ErrorCode::kMissingActivation:
      return true;
    default:
      return false;
  }
}

Error::Error(ErrorCode code, std::string module, const std::string& message)
    : std::runtime_error(std::string(error_code_name(code)) + " [" + module +
                         "]: " + message),
      code_(code),
      module_(std::move(module)) {}

}  // namespace neurodissect
