/* Copyright 2026 The debias Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "debias/source.hpp"

namespace debias::test {

inline std::vector<Flip> flips_from(std::string_view pattern) {
  std::vector<Flip> flips;
  flips.reserve(pattern.size());
  for (const char ch : pattern) {
    flips.push_back(ch == 'H' ? Flip::Head : Flip::Tail);
  }
  return flips;
}

/// Replays a fixed flip sequence, then reports exhaustion.
class ScriptedSource {
 public:
  explicit ScriptedSource(std::vector<Flip> flips) : flips_(std::move(flips)) {}
  explicit ScriptedSource(std::string_view pattern) : flips_(flips_from(pattern)) {}

  Flip next() {
    if (pos_ == flips_.size()) {
      throw SourceExhausted();
    }
    return flips_[pos_++];
  }

  std::size_t position() const { return pos_; }

 private:
  std::vector<Flip> flips_;
  std::size_t pos_ = 0;
};

/// Temp file that removes itself on scope exit.
class TempFile {
 public:
  explicit TempFile(const std::string& stem) {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = (std::filesystem::temp_directory_path() /
             (stem + "-" + std::to_string(rng()) + ".bits"))
                .string();
  }
  ~TempFile() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  TempFile(const TempFile&) = delete;
  TempFile& operator=(const TempFile&) = delete;

  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

}  // namespace debias::test
