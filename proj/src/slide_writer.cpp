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

#include "slidespin/slide_writer.hpp"

#include <tiffio.h>

#include <algorithm>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "slidespin/error.hpp"

namespace slidespin {

namespace fs = std::filesystem;

std::vector<RasterPatch> build_pyramid(const RasterPatch& base, int n_levels,
                                       int factor) {
  std::vector<RasterPatch> levels{base};
  for (int i = 1; i < n_levels; ++i) {
    const RasterPatch& prev = levels.back();
    const int w = (prev.width + factor - 1) / factor;
    const int h = (prev.height + factor - 1) / factor;
    if (w >= prev.width || h >= prev.height) break;
    levels.push_back(box_resize(prev, w, h));
  }
  return levels;
}

void write_directory_pyramid(const fs::path& dir,
                             const std::vector<RasterPatch>& levels, int tile,
                             std::optional<double> mpp) {
  fs::create_directories(dir);
  nlohmann::json meta;
  meta["levels"] = nlohmann::json::array();
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const RasterPatch& l = levels[i];
    meta["levels"].push_back({{"width", l.width}, {"height", l.height}});
    std::ofstream out(dir / ("level_" + std::to_string(i) + ".rgb"),
                      std::ios::binary);
    out.write(reinterpret_cast<const char*>(l.pixels.data()),
              static_cast<std::streamsize>(l.pixels.size()));
    if (!out) throw Error(ErrorCode::WriteFailure, "write failed in " + dir.string());
  }
  meta["tile"] = tile;
  meta["mpp"] = mpp ? nlohmann::json(*mpp) : nlohmann::json(nullptr);
  std::ofstream(dir / "pyramid.json") << meta.dump(2) << "\n";
}

void write_tiff_pyramid(const fs::path& path,
                        const std::vector<RasterPatch>& levels, int tile,
                        TiffCompression compression,
                        std::optional<double> mpp) {
  TIFF* tif = TIFFOpen(path.c_str(), "w");
  if (!tif) throw Error(ErrorCode::WriteFailure, "cannot create " + path.string());
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(tile) * tile * 3);
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const RasterPatch& l = levels[i];
    TIFFSetField(tif, TIFFTAG_SUBFILETYPE, i == 0 ? 0 : FILETYPE_REDUCEDIMAGE);
    TIFFSetField(tif, TIFFTAG_IMAGEWIDTH, static_cast<std::uint32_t>(l.width));
    TIFFSetField(tif, TIFFTAG_IMAGELENGTH, static_cast<std::uint32_t>(l.height));
    TIFFSetField(tif, TIFFTAG_TILEWIDTH, static_cast<std::uint32_t>(tile));
    TIFFSetField(tif, TIFFTAG_TILELENGTH, static_cast<std::uint32_t>(tile));
    TIFFSetField(tif, TIFFTAG_BITSPERSAMPLE, 8);
    TIFFSetField(tif, TIFFTAG_SAMPLESPERPIXEL, 3);
    TIFFSetField(tif, TIFFTAG_PLANARCONFIG, PLANARCONFIG_CONTIG);
    TIFFSetField(tif, TIFFTAG_PHOTOMETRIC, PHOTOMETRIC_RGB);
    TIFFSetField(tif, TIFFTAG_COMPRESSION,
                 compression == TiffCompression::Deflate
                     ? COMPRESSION_ADOBE_DEFLATE
                     : COMPRESSION_NONE);
    if (mpp) {
      const float ppcm = static_cast<float>(10000.0 / (*mpp * l.width / levels[0].width));
      TIFFSetField(tif, TIFFTAG_RESOLUTIONUNIT, RESUNIT_CENTIMETER);
      TIFFSetField(tif, TIFFTAG_XRESOLUTION, ppcm);
      TIFFSetField(tif, TIFFTAG_YRESOLUTION, ppcm);
    }
    for (int ty = 0; ty < l.height; ty += tile) {
      for (int tx = 0; tx < l.width; tx += tile) {
        std::fill(buf.begin(), buf.end(), 255);
        const int cw = std::min(tile, l.width - tx);
        const int ch = std::min(tile, l.height - ty);
        for (int r = 0; r < ch; ++r) {
          std::memcpy(buf.data() + static_cast<std::size_t>(r) * tile * 3,
                      l.at(tx, ty + r), static_cast<std::size_t>(cw) * 3);
        }
        if (TIFFWriteTile(tif, buf.data(), static_cast<std::uint32_t>(tx),
                          static_cast<std::uint32_t>(ty), 0, 0) < 0) {
          TIFFClose(tif);
          throw Error(ErrorCode::WriteFailure, "tile write failed in " + path.string());
        }
      }
    }
    if (!TIFFWriteDirectory(tif)) {
      TIFFClose(tif);
      throw Error(ErrorCode::WriteFailure, "directory write failed in " + path.string());
    }
  }
  TIFFClose(tif);
}

}  // namespace slidespin
