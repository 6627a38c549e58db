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
#include <optional>
#include <string>
#include <vector>

#include "slidespin/slide.hpp"
#include "slidespin/tissue.hpp"

namespace slidespin {

struct PatchSpec {
  int patch_size_px = 224;             // side fed to the encoder
  std::optional<double> spacing_mpp;   // sampling resolution, if known
  double tissue_threshold = 0.5;
  std::optional<std::int64_t> stride_px;  // level-0 pixels

  /// Throws InvalidArgument on out-of-range fields.
  void validate() const;
};

/// Where and how large patches are read. level0_side is the patch footprint
/// at level 0; read_side is the same footprint at read_level.
struct PatchGeometry {
  int read_level = 0;
  std::int64_t level0_side = 0;
  int read_side = 0;
  bool resize_needed = false;
};

PatchGeometry effective_geometry(const SlidePyramid& slide,
                                 const PatchSpec& spec);

struct PlannedPatch {
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t side = 0;
  double tissue_fraction = 0.0;

  Rect rect() const { return {x, y, side, side}; }
};

/// Row-major list of full-size level-0 patches that pass the tissue filter.
/// An empty plan means no tissue; callers decide how to report it.
struct PatchPlan {
  std::vector<PlannedPatch> patches;
  PatchGeometry geometry;
  PatchSpec spec;
  std::int64_t stride = 0;
  std::string slide_ref;

  std::size_t size() const { return patches.size(); }
  bool empty() const { return patches.empty(); }
};

PatchPlan plan_patches(const SlidePyramid& slide, const TissueMask& mask,
                       const PatchSpec& spec);

/// Reads one planned patch at patch_size_px x patch_size_px.
RasterPatch load_patch(const SlidePyramid& slide, const PatchPlan& plan,
                       std::size_t index);

/// Lazy, plan-ordered patch reader. Pixels are fetched on next().
class PatchIterator {
 public:
  PatchIterator(const SlidePyramid& slide, const PatchPlan& plan)
      : slide_(slide), plan_(plan) {}

  std::optional<RasterPatch> next();
  std::size_t cursor() const { return cursor_; }

 private:
  const SlidePyramid& slide_;
  const PatchPlan& plan_;
  std::size_t cursor_ = 0;
};

}  // namespace slidespin
