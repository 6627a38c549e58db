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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace slidespin {

/// 8-bit interleaved RGB raster. Also used for whole-level images and
/// thumbnails, in which case the origin fields are zero.
struct RasterPatch {
  static constexpr int kChannels = 3;

  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
  std::int64_t origin_x = 0;  // level-0 coordinates
  std::int64_t origin_y = 0;
  int level = 0;

  RasterPatch() = default;
  RasterPatch(int w, int h, std::uint8_t fill = 255)
      : width(w),
        height(h),
        pixels(static_cast<std::size_t>(w) * h * kChannels, fill) {}

  std::size_t row_bytes() const {
    return static_cast<std::size_t>(width) * kChannels;
  }
  std::uint8_t* row(int y) { return pixels.data() + y * row_bytes(); }
  const std::uint8_t* row(int y) const {
    return pixels.data() + y * row_bytes();
  }
  std::uint8_t* at(int x, int y) { return row(y) + x * kChannels; }
  const std::uint8_t* at(int x, int y) const {
    return row(y) + x * kChannels;
  }
};

/// Axis-aligned rectangle in level-0 pixel coordinates.
struct Rect {
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t width = 0;
  std::int64_t height = 0;
};

struct LevelInfo {
  int index = 0;
  std::int64_t width = 0;
  std::int64_t height = 0;
  double downsample = 1.0;
};

/// Pixel source behind a SlidePyramid. Implementations must tolerate
/// concurrent calls; the rect is always fully inside the level.
class SlideBackend {
 public:
  virtual ~SlideBackend() = default;
  virtual void read_level_rect(int level, std::int64_t x, std::int64_t y,
                               int w, int h, std::uint8_t* out) const = 0;
};

/// Shared, read-only handle to a multi-resolution image. Copies share the
/// same backend; no pixel data is held by the handle itself.
class SlidePyramid {
 public:
  struct Geometry {
    std::vector<LevelInfo> levels;
    std::optional<double> mpp_x;
    std::optional<double> mpp_y;
    int tile_width = 256;
    int tile_height = 256;
  };

  SlidePyramid(std::filesystem::path path, Geometry geometry,
               std::shared_ptr<const SlideBackend> backend);

  const std::filesystem::path& path() const { return path_; }
  const std::vector<LevelInfo>& levels() const { return geometry_.levels; }
  const LevelInfo& level(int index) const;
  int level_count() const { return static_cast<int>(geometry_.levels.size()); }
  std::int64_t width() const { return geometry_.levels.front().width; }
  std::int64_t height() const { return geometry_.levels.front().height; }
  std::optional<double> mpp_x() const { return geometry_.mpp_x; }
  std::optional<double> mpp_y() const { return geometry_.mpp_y; }
  int tile_width() const { return geometry_.tile_width; }
  int tile_height() const { return geometry_.tile_height; }

  /// Reads w x h pixels at `level`, anchored at level-0 (x, y) mapped by
  /// floor(x / downsample). Out-of-slide pixels are white.
  RasterPatch read_region(int level, std::int64_t x, std::int64_t y, int w,
                          int h) const;

  /// Same as read_region but (x, y) are already in `level` coordinates.
  RasterPatch read_level_region(int level, std::int64_t x, std::int64_t y,
                                int w, int h) const;

  /// Whole slide, rendered from the smallest level whose larger side is at
  /// least max_dim, box-downsampled so that max(width, height) <= max_dim.
  RasterPatch thumbnail(int max_dim) const;

 private:
  std::filesystem::path path_;
  Geometry geometry_;
  std::shared_ptr<const SlideBackend> backend_;
};

/// Opens a tiled pyramidal TIFF or a synthetic directory pyramid.
SlidePyramid open_slide(const std::filesystem::path& path);

/// In-memory pyramid; level images must shrink strictly in both axes.
SlidePyramid make_memory_slide(std::vector<RasterPatch> levels,
                               std::optional<double> mpp = std::nullopt,
                               std::string name = "memory");

/// Checks the level-geometry invariants; throws CorruptHeader.
void validate_geometry(const std::vector<LevelInfo>& levels);

/// Area-average resample. Weights are exact integer overlaps, so the result
/// is reproducible bit-for-bit; upsampling degenerates to pixel replication.
RasterPatch box_resize(const RasterPatch& src, int width, int height);

/// Dimensions after fitting (w, h) into max_dim without upsampling.
std::pair<int, int> fit_within(std::int64_t width, std::int64_t height,
                               int max_dim);

}  // namespace slidespin
