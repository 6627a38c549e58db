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

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "slidespin/slide.hpp"

namespace slidespin::detail {

std::vector<LevelInfo> make_levels(
    const std::vector<std::pair<std::int64_t, std::int64_t>>& dims);

class MemoryBackend final : public SlideBackend {
 public:
  explicit MemoryBackend(std::vector<RasterPatch> levels);
  void read_level_rect(int level, std::int64_t x, std::int64_t y, int w, int h,
                       std::uint8_t* out) const override;

 private:
  std::vector<RasterPatch> levels_;
};

// One raw RGB file per level, read with pread so handles can be shared.
class DirectoryBackend final : public SlideBackend {
 public:
  DirectoryBackend(const std::filesystem::path& dir,
                   const std::vector<LevelInfo>& levels);
  ~DirectoryBackend() override;
  DirectoryBackend(const DirectoryBackend&) = delete;
  DirectoryBackend& operator=(const DirectoryBackend&) = delete;

  void read_level_rect(int level, std::int64_t x, std::int64_t y, int w, int h,
                       std::uint8_t* out) const override;

 private:
  std::vector<int> fds_;
  std::vector<std::int64_t> widths_;
};

SlidePyramid open_directory_pyramid(const std::filesystem::path& dir);
SlidePyramid open_tiff_pyramid(const std::filesystem::path& path);

}  // namespace slidespin::detail
