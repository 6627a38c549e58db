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

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "slidespin/slide.hpp"
#include "slidespin/zoo.hpp"

namespace slidespin::fixtures {

// Colors of the synthetic slides. Tissue grays out at 124, glass at 245.
inline constexpr std::uint8_t kTissueRgb[3] = {180, 90, 150};
inline constexpr std::uint8_t kGlassRgb[3] = {245, 245, 245};

/// White field of `size` x `size` with a textured tissue disk of the given
/// diameter at its center.
RasterPatch blob_image(int size = 4096, int diameter = 1000);

/// 1024 x 1280: the top 1024 rows are flat tissue, the rest is glass. With
/// 512 px patches this plans exactly four identical patches.
RasterPatch four_patch_image();

/// Uniform pure white.
RasterPatch white_image(int size = 1024);

/// Three-level (factor 2) deflate TIFF at 0.5 mpp.
void write_slide_tiff(const std::filesystem::path& path, const RasterPatch& base);

/// Attention-MIL head for the demo bundle: 8-dim reference features, 4
/// hidden units. The "positive" logit is 6 - sum(z), so any bag of tissue
/// patches (features near 0.49) scores positive and pale glass negative.
nlohmann::json demo_aggregator();
ModelManifest demo_manifest();

/// Writes the demo bundle (manifest.json + aggregator.json) into `dir`.
void write_demo_bundle(const std::filesystem::path& dir);

}  // namespace slidespin::fixtures
