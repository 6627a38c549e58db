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

#include "slidespin/patching.hpp"

#include <cmath>
#include <sstream>

#include "slidespin/error.hpp"

namespace slidespin {

void PatchSpec::validate() const {
  std::vector<std::string> problems;
  if (patch_size_px < 32) {
    problems.push_back("patch_size_px must be >= 32, got " +
                       std::to_string(patch_size_px));
  }
  if (!(tissue_threshold >= 0.0 && tissue_threshold <= 1.0)) {
    problems.push_back("tissue_threshold must be in [0, 1]");
  }
  if (stride_px && *stride_px < 1) {
    problems.push_back("stride_px must be >= 1");
  }
  if (spacing_mpp && !(*spacing_mpp > 0.0 && std::isfinite(*spacing_mpp))) {
    problems.push_back("spacing_mpp must be positive");
  }
  if (!problems.empty()) {
    throw Error(ErrorCode::InvalidArgument, "invalid patch spec", problems);
  }
}

PatchGeometry effective_geometry(const SlidePyramid& slide,
                                 const PatchSpec& spec) {
  spec.validate();
  PatchGeometry g;
  if (!spec.spacing_mpp || !slide.mpp_x()) {
    g.read_level = 0;
    g.level0_side = spec.patch_size_px;
    g.read_side = spec.patch_size_px;
    g.resize_needed = false;
    return g;
  }
  const double slide_mpp = *slide.mpp_x();
  if (*spec.spacing_mpp < slide_mpp) {
    std::ostringstream msg;
    msg << "requested spacing " << *spec.spacing_mpp
        << " mpp is finer than the slide's native " << slide_mpp << " mpp";
    throw Error(ErrorCode::BadSpacing, msg.str());
  }
  g.level0_side = std::llround(spec.patch_size_px * *spec.spacing_mpp / slide_mpp);
  const double wanted =
      static_cast<double>(g.level0_side) / static_cast<double>(spec.patch_size_px);
  for (const LevelInfo& l : slide.levels()) {
    if (l.downsample <= wanted * (1.0 + 1e-9)) g.read_level = l.index;
  }
  const double ds = slide.level(g.read_level).downsample;
  g.read_side = static_cast<int>(std::max<long long>(
      1, std::llround(static_cast<double>(g.level0_side) / ds)));
  g.resize_needed = g.read_side != spec.patch_size_px;
  return g;
}

PatchPlan plan_patches(const SlidePyramid& slide, const TissueMask& mask,
                       const PatchSpec& spec) {
  PatchPlan plan;
  plan.spec = spec;
  plan.geometry = effective_geometry(slide, spec);
  plan.slide_ref = slide.path().string();
  const std::int64_t side = plan.geometry.level0_side;
  plan.stride = spec.stride_px.value_or(side);

  for (std::int64_t y = 0; y + side <= slide.height(); y += plan.stride) {
    for (std::int64_t x = 0; x + side <= slide.width(); x += plan.stride) {
      const double f = tissue_fraction(mask, {x, y, side, side});
      if (f >= spec.tissue_threshold) plan.patches.push_back({x, y, side, f});
    }
  }
  return plan;
}

RasterPatch load_patch(const SlidePyramid& slide, const PatchPlan& plan,
                       std::size_t index) {
  if (index >= plan.patches.size()) {
    throw Error(ErrorCode::IndexOutOfRange,
                "patch index " + std::to_string(index) + " out of range [0, " +
                    std::to_string(plan.patches.size()) + ")");
  }
  const PlannedPatch& p = plan.patches[index];
  const PatchGeometry& g = plan.geometry;
  RasterPatch patch =
      slide.read_region(g.read_level, p.x, p.y, g.read_side, g.read_side);
  if (g.resize_needed || g.read_side != plan.spec.patch_size_px) {
    patch = box_resize(patch, plan.spec.patch_size_px, plan.spec.patch_size_px);
  }
  patch.origin_x = p.x;
  patch.origin_y = p.y;
  patch.level = g.read_level;
  return patch;
}

std::optional<RasterPatch> PatchIterator::next() {
  if (cursor_ >= plan_.size()) return std::nullopt;
  return load_patch(slide_, plan_, cursor_++);
}

}  // namespace slidespin
