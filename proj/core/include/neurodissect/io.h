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

#ifndef NEURODISSECT_IO_H_
#define NEURODISSECT_IO_H_

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "neurodissect/types.h"

namespace neurodissect {

// Binary formats are little-endian: a 4-byte magic, u32 version (=1), the
// u32 shape fields, then the payload.
inline constexpr char kActivationMagic[4] = {'N', 'A', 'C', 'T'};
inline constexpr char kMaskMagic[4] = {'N', 'M', 'S', 'K'};
inline constexpr std::uint32_t kFormatVersion = 1;

ActivationVolume read_activation(const std::filesystem::path& path);
void write_activation(const std::filesystem::path& path,
                      const ActivationVolume& volume);

SegmentationMask read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path,
                const SegmentationMask& mask);

ConceptVocab read_concept_vocab(const std::filesystem::path& path);
void write_concept_vocab(const std::filesystem::path& path,
                         const ConceptVocab& vocab);

SceneVocab read_scene_vocab(const std::filesystem::path& path);
void write_scene_vocab(const std::filesystem::path& path,
                       const SceneVocab& vocab);

LinearHead read_linear_head(const std::filesystem::path& path);
void write_linear_head(const std::filesystem::path& path,
                       const LinearHead& head);

// Shortest decimal text that parses back to the identical value.
std::string format_float(float value);
std::string format_double(double value);
float parse_float(std::string_view text);
double parse_double(std::string_view text);
std::uint64_t parse_u64(std::string_view text);
std::uint32_t parse_u32(std::string_view text);

std::vector<std::string_view> split_fields(std::string_view line,
                                           char separator = '\t');

// Reads a text file as lines with trailing CR stripped. Throws kMissingFile.
std::vector<std::string> read_lines(const std::filesystem::path& path);

// Atomic-enough whole-file write; throws kDiskWrite on failure.
void write_text_file(const std::filesystem::path& path,
                     std::string_view contents);

}  // namespace neurodissect

#endif  // NEURODISSECT_IO_H_
