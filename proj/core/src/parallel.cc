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

#include "neurodissect/parallel.h"

#include <atomic>
#include <charconv>
#include <cstdlib>
#include <string_view>

namespace neurodissect {
namespace {

std::atomic<std::size_t> g_override{0};

std::size_t from_environment() {
  const char* env = std::getenv("NEURODISSECT_THREADS");
  if (env == nullptr) return 0;
  std::string_view text(env);
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(),
                                   value);
  if (ec != std::errc() || ptr != text.data() + text.size()) return 0;
  return value;
}

}  // namespace

std::size_t worker_count() {
  if (auto n = g_override.load(); n > 0) return n;
  if (auto n = from_environment(); n > 0) return n;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

void set_worker_count(std::size_t count) { g_override.store(count); }

}  // namespace neurodissect
