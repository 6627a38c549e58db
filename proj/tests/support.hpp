// Copyright 2026 The SlideSpin Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

#include <nlohmann/json.hpp>

#include "slidespin/slide.hpp"

namespace slidespin::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Solid color image.
RasterPatch solid(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b);

/// Random RGB image from a seeded engine.
RasterPatch random_image(int w, int h, std::mt19937& rng);

/// Uniform integer in [lo, hi] built from raw engine output, so sequences
/// do not depend on the standard library's distribution implementation.
int uniform(std::mt19937& rng, int lo, int hi);
double unit(std::mt19937& rng);

/// The synthetic slides and the demo bundle, written into a temp dir.
struct FixtureSet {
  FixtureSet();

  TempDir root;
  std::filesystem::path slides;
  std::filesystem::path blob;
  std::filesystem::path white;
  std::filesystem::path four_patch;
  std::filesystem::path bundle;
};

/// Structural JSON equality; numbers may differ by `tol` relative to the
/// larger of 1 and |b|.
bool json_near(const nlohmann::json& a, const nlohmann::json& b, double tol = 1e-9);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace slidespin::testing
