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

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "slidespin/slide.hpp"

namespace slidespin {

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
};

struct GrayHistogram {
  std::array<std::uint64_t, 256> counts{};

  std::uint64_t total() const;
};

/// Binary tissue raster at thumbnail scale. scale_x/scale_y map one mask
/// pixel to level-0 pixels.
struct TissueMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;  // 1 = tissue
  double scale_x = 1.0;
  double scale_y = 1.0;
  int threshold_used = 0;

  bool at(int x, int y) const {
    return bits[static_cast<std::size_t>(y) * width + x] != 0;
  }
  /// Fraction of all mask pixels that are tissue.
  double coverage() const;
};

/// round(0.299 R + 0.587 G + 0.114 B), evaluated in integer arithmetic.
inline std::uint8_t gray_value(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  return static_cast<std::uint8_t>((299u * r + 587u * g + 114u * b + 500u) /
                                   1000u);
}

GrayImage to_grayscale(const RasterPatch& patch);
GrayHistogram histogram(const GrayImage& image);

/// Otsu's threshold: the t maximizing w0*w1*(mu0-mu1)^2 with class 0 being
/// intensities <= t. Candidates are compared exactly, smallest t wins ties.
int otsu_threshold(const GrayHistogram& hist);

/// Thumbnail -> grayscale -> Otsu -> (gray <= t) -> 3x3 median -> 3x3
/// closing. Borders replicate edge pixels for every filter.
TissueMask detect_tissue(const SlidePyramid& slide, int max_dim = 2048);

/// Same pipeline from an already-rendered thumbnail.
TissueMask detect_tissue(const RasterPatch& thumbnail, std::int64_t level0_width,
                         std::int64_t level0_height);

/// Tissue share of the mask pixels covered by `rect` (mapped with
/// floor/ceil). Returns 0 when the rect misses the mask entirely.
double tissue_fraction(const TissueMask& mask, const Rect& rect);

namespace morphology {
std::vector<std::uint8_t> median3x3(const std::vector<std::uint8_t>& bits,
                                    int width, int height);
std::vector<std::uint8_t> dilate3x3(const std::vector<std::uint8_t>& bits,
                                    int width, int height);
std::vector<std::uint8_t> erode3x3(const std::vector<std::uint8_t>& bits,
                                   int width, int height);
}  // namespace morphology

/// Binary PGM (P5), tissue = 255.
void write_pgm(const TissueMask& mask, const std::filesystem::path& path);

}  // namespace slidespin
