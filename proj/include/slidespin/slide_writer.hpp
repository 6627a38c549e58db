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
#include <optional>
#include <vector>

#include "slidespin/slide.hpp"

namespace slidespin {

enum class TiffCompression { None, Deflate };

/// Builds `n_levels` levels from `base`, each `factor` times smaller
/// (rounded up) than the previous one, using box_resize.
std::vector<RasterPatch> build_pyramid(const RasterPatch& base, int n_levels,
                                       int factor = 4);

/// Writes the synthetic directory-pyramid format:
/// pyramid.json plus level_{i}.rgb (raw row-major RGB bytes).
void write_directory_pyramid(const std::filesystem::path& dir,
                             const std::vector<RasterPatch>& levels,
                             int tile = 256,
                             std::optional<double> mpp = std::nullopt);

/// Writes a tiled pyramidal TIFF, one directory per level; mpp is stored as
/// X/Y resolution in pixels per centimeter.
void write_tiff_pyramid(const std::filesystem::path& path,
                        const std::vector<RasterPatch>& levels, int tile = 256,
                        TiffCompression compression = TiffCompression::Deflate,
                        std::optional<double> mpp = std::nullopt);

}  // namespace slidespin
