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

#include "neurodissect/io.h"

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <system_error>

#include <fmt/core.h>

#include "neurodissect/error.h"

namespace neurodissect {
namespace {

constexpr char kModule[] = "core_model";

std::vector<char> read_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kMissingFile, kModule,
                fmt::format("cannot open '{}'", path.string()));
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_binary(const std::filesystem::path& path,
                  const std::vector<char>& bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw Error(ErrorCode::kDiskWrite, kModule,
                fmt::format("cannot write '{}'", path.string()));
  }
}

void put_u32(std::vector<char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
  }
}

class ByteReader {
 public:
  ByteReader(const std::vector<char>& bytes, const std::filesystem::path& path)
      : bytes_(bytes), path_(path) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(
               static_cast<unsigned char>(bytes_[pos_ + i]))
           << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  float f32() { return std::bit_cast<float>(u32()); }

  void magic(const char (&expected)[4]) {
    need(4);
    if (std::memcmp(bytes_.data() + pos_, expected, 4) != 0) {
      throw Error(ErrorCode::kParseError, kModule,
                  fmt::format("'{}' has the wrong magic (expected {})",
                              path_.string(), std::string(expected, 4)));
    }
    pos_ += 4;
  }

  void expect_end() const {
    if (pos_ != bytes_.size()) {
      throw Error(ErrorCode::kParseError, kModule,
                  fmt::format("'{}' has {} trailing bytes", path_.string(),
                              bytes_.size() - pos_));
    }
  }

  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw Error(ErrorCode::kParseError, kModule,
                  fmt::format("'{}' is truncated", path_.string()));
    }
  }

 private:
  const std::vector<char>& bytes_;
  const std::filesystem::path& path_;
  std::size_t pos_ = 0;
};

void check_version(std::uint32_t version, const std::filesystem::path& path) {
  if (version != kFormatVersion) {
    throw Error(ErrorCode::kParseError, kModule,
                fmt::format("'{}' has unsupported version {}", path.string(),
                            version));
  }
}

template <typename T>
T parse_number(std::string_view text, const char* what) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(),
                                   value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::kParseError, kModule,
                fmt::format("cannot parse '{}' as {}", text, what));
  }
  return value;
}

template <typename T>
std::string format_shortest(T value) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), ptr);
}

}  // namespace

ActivationVolume read_activation(const std::filesystem::path& path) {
  auto bytes = read_binary(path);
  ByteReader r(bytes, path);
  r.magic(kActivationMagic);
  check_version(r.u32(), path);
  ActivationVolume v;
  v.units = r.u32();
  v.height = r.u32();
  v.width = r.u32();
  const std::size_t n = static_cast<std::size_t>(v.units) * v.height * v.width;
  r.need(n * 4);
  v.data.resize(n);
  for (auto& x : v.data) x = r.f32();
  r.expect_end();
  v.validate();
  return v;
}

void write_activation(const std::filesystem::path& path,
                      const ActivationVolume& volume) {
  volume.validate();
  std::vector<char> out;
  out.reserve(20 + volume.data.size() * 4);
  out.insert(out.end(), std::begin(kActivationMagic), std::end(kActivationMagic));
  put_u32(out, kFormatVersion);
  put_u32(out, volume.units);
  put_u32(out, volume.height);
  put_u32(out, volume.width);
  for (float x : volume.data) put_u32(out, std::bit_cast<std::uint32_t>(x));
  write_binary(path, out);
}

SegmentationMask read_mask(const std::filesystem::path& path) {
  auto bytes = read_binary(path);
  ByteReader r(bytes, path);
  r.magic(kMaskMagic);
  check_version(r.u32(), path);
  SegmentationMask m;
  m.planes = r.u32();
  m.height = r.u32();
  m.width = r.u32();
  const std::size_t n = static_cast<std::size_t>(m.planes) * m.height * m.width;
  r.need(n * 4);
  m.data.resize(n);
  for (auto& x : m.data) x = r.u32();
  r.expect_end();
  m.validate();
  return m;
}

void write_mask(const std::filesystem::path& path,
                const SegmentationMask& mask) {
  mask.validate();
  std::vector<char> out;
  out.reserve(20 + mask.data.size() * 4);
  out.insert(out.end(), std::begin(kMaskMagic), std::end(kMaskMagic));
  put_u32(out, kFormatVersion);
  put_u32(out, mask.planes);
  put_u32(out, mask.height);
  put_u32(out, mask.width);
  for (ConceptId x : mask.data) put_u32(out, x);
  write_binary(path, out);
}

ConceptVocab read_concept_vocab(const std::filesystem::path& path) {
  std::vector<ConceptEntry> entries;
  for (const auto& line : read_lines(path)) {
    if (line.empty() || line.front() == '#') continue;
    auto f = split_fields(line);
    if (f.size() != 3) {
      throw Error(ErrorCode::kParseError, kModule,
                  fmt::format("'{}': expected id<TAB>name<TAB>category, got "
                              "'{}'",
                              path.string(), line));
    }
    auto category = parse_category(f[2]);
    if (!category) {
      throw Error(ErrorCode::kParseError, kModule,
                  fmt::format("'{}': unknown category '{}'", path.string(),
                              f[2]));
    }
    entries.push_back({parse_u32(f[0]), normalize_name(f[1]), *category});
  }
  return ConceptVocab(std::move(entries));
}

void write_concept_vocab(const std::filesystem::path& path,
                         const ConceptVocab& vocab) {
  std::string out;
  for (const auto& e : vocab.entries()) {
    out += fmt::format("{}\t{}\t{}\n", e.id, e.name,
                       category_name(e.category));
  }
  write_text_file(path, out);
}

SceneVocab read_scene_vocab(const std::filesystem::path& path) {
  std::vector<SceneEntry> entries;
  for (const auto& line : read_lines(path)) {
    if (line.empty() || line.front() == '#') continue;
    auto f = split_fields(line);
    // The category column is optional for scenes.
    if (f.size() < 2 || f.size() > 3) {
      throw Error(ErrorCode::kParseError, kModule,
                  fmt::format("'{}': expected id<TAB>name, got '{}'",
                              path.string(), line));
    }
    entries.push_back({parse_u32(f[0]), normalize_name(f[1])});
  }
  return SceneVocab(std::move(entries));
}

void write_scene_vocab(const std::filesystem::path& path,
                       const SceneVocab& vocab) {
  std::string out;
  for (const auto& e : vocab.entries()) {
    out += fmt::format("{}\t{}\tscene\n", e.id, e.name);
  }
  write_text_file(path, out);
}

LinearHead read_linear_head(const std::filesystem::path& path) {
  auto lines = read_lines(path);
  std::vector<std::string_view> rows;
  for (const auto& l : lines) {
    if (!l.empty()) rows.push_back(l);
  }
  if (rows.empty()) {
    throw Error(ErrorCode::kParseError, kModule,
                fmt::format("'{}' is empty", path.string()));
  }
  auto header = split_fields(rows[0], ' ');
  if (header.size() == 1) header = split_fields(rows[0], '\t');
  if (header.size() != 2) {
    throw Error(ErrorCode::kParseError, kModule,
                fmt::format("'{}': header must be '<classes> <units>'",
                            path.string()));
  }
  LinearHead head;
  head.num_classes = parse_u32(header[0]);
  head.num_units = parse_u32(header[1]);
  if (rows.size() != static_cast<std::size_t>(head.num_classes) + 2) {
    throw Error(ErrorCode::kDimensionMismatch, kModule,
                fmt::format("'{}': expected {} weight rows and a bias row",
                            path.string(), head.num_classes));
  }
  head.weights.reserve(static_cast<std::size_t>(head.num_classes) *
                       head.num_units);
  for (std::uint32_t y = 0; y < head.num_classes; ++y) {
    auto f = split_fields(rows[1 + y]);
    if (f.size() != head.num_units) {
      throw Error(ErrorCode::kDimensionMismatch, kModule,
                  fmt::format("'{}': weight row {} has {} values, expected {}",
                              path.string(), y, f.size(), head.num_units));
    }
    for (auto v : f) head.weights.push_back(parse_float(v));
  }
  auto b = split_fields(rows.back());
  if (b.size() != head.num_classes) {
    throw Error(ErrorCode::kDimensionMismatch, kModule,
                fmt::format("'{}': bias row has {} values, expected {}",
                            path.string(), b.size(), head.num_classes));
  }
  for (auto v : b) head.bias.push_back(parse_float(v));
  head.validate();
  return head;
}

void write_linear_head(const std::filesystem::path& path,
                       const LinearHead& head) {
  head.validate();
  std::string out = fmt::format("{} {}\n", head.num_classes, head.num_units);
  for (std::uint32_t y = 0; y < head.num_classes; ++y) {
    auto w = head.row(y);
    for (std::uint32_t u = 0; u < head.num_units; ++u) {
      if (u) out += '\t';
      out += format_float(w[u]);
    }
    out += '\n';
  }
  for (std::uint32_t y = 0; y < head.num_classes; ++y) {
    if (y) out += '\t';
    out += format_float(head.bias[y]);
  }
  out += '\n';
  write_text_file(path, out);
}

std::string format_float(float value) { return format_shortest(value); }
std::string format_double(double value) { return format_shortest(value); }

float parse_float(std::string_view text) {
  return parse_number<float>(text, "f32");
}
double parse_double(std::string_view text) {
  return parse_number<double>(text, "f64");
}
std::uint64_t parse_u64(std::string_view text) {
  return parse_number<std::uint64_t>(text, "u64");
}
std::uint32_t parse_u32(std::string_view text) {
  return parse_number<std::uint32_t>(text, "u32");
}

std::vector<std::string_view> split_fields(std::string_view line,
                                           char separator) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(separator, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kMissingFile, kModule,
                fmt::format("cannot open '{}'", path.string()));
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

void write_text_file(const std::filesystem::path& path,
                     std::string_view contents) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) {
    throw Error(ErrorCode::kDiskWrite, kModule,
                fmt::format("cannot write '{}'", path.string()));
  }
}

}  // namespace neurodissect
