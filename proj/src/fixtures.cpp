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

#include "slidespin/fixtures.hpp"

#include "slidespin/slide_writer.hpp"

namespace slidespin::fixtures {

using nlohmann::json;

namespace {

void put(RasterPatch& img, int x, int y, const std::uint8_t rgb[3], int jitter) {
  std::uint8_t* p = img.at(x, y);
  for (int c = 0; c < 3; ++c) {
    p[c] = static_cast<std::uint8_t>(std::clamp(rgb[c] + jitter, 0, 255));
  }
}

}  // namespace

RasterPatch blob_image(int size, int diameter) {
  RasterPatch img(size, size);
  const double c = (size - 1) / 2.0;
  const double r2 = (diameter / 2.0) * (diameter / 2.0);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double dx = x - c;
      const double dy = y - c;
      const int jitter = (x * 7 + y * 13) % 11 - 5;
      if (dx * dx + dy * dy <= r2) {
        put(img, x, y, kTissueRgb, jitter);
      } else {
        put(img, x, y, kGlassRgb, jitter / 2);
      }
    }
  }
  return img;
}

RasterPatch four_patch_image() {
  RasterPatch img(1024, 1280);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) put(img, x, y, y < 1024 ? kTissueRgb : kGlassRgb, 0);
  }
  return img;
}

RasterPatch white_image(int size) { return RasterPatch(size, size, 255); }

void write_slide_tiff(const std::filesystem::path& path, const RasterPatch& base) {
  write_tiff_pyramid(path, build_pyramid(base, 3, 2), 256, TiffCompression::Deflate, 0.5);
}

json demo_aggregator() {
  return {
      {"dims", {{"D", 8}, {"L", 4}, {"C", 2}}},
      {"attention", "tanh"},
      {"V",
       {{0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5},
        {1.0, -1.0, 0.5, -0.5, 0.0, 0.0, 0.25, -0.25},
        {0.0, 0.0, 1.0, 1.0, -1.0, -1.0, 0.0, 0.0},
        {-0.5, -0.5, 0.0, 0.0, 0.0, 0.0, 0.5, 0.5}}},
      {"w", {-1.5, 0.5, 0.25, 0.5}},
      {"W_out",
       {{0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0},
        {-1.0, -1.0, -1.0, -1.0, -1.0, -1.0, -1.0, -1.0}}},
      {"b_out", {0.0, 6.0}},
      {"class_names", {"negative", "positive"}},
  };
}

ModelManifest demo_manifest() {
  ModelManifest m;
  m.model_name = "demo-reference";
  m.description =
      "Synthetic demo: reference band-mean encoder with a hand-set attention head; "
      "dark tissue scores positive.";
  m.encoder.encoder_id = "reference-v1";
  m.encoder.embed_dim = 8;
  m.encoder.input_size = 256;
  m.patch.patch_size_px = 256;
  m.patch.tissue_threshold = 0.5;
  m.class_names = {"negative", "positive"};
  return m;
}

void write_demo_bundle(const std::filesystem::path& dir) {
  write_bundle(dir, demo_manifest(),
               {{"aggregator", {"aggregator.json", demo_aggregator().dump(2) + "\n"}}});
}

}  // namespace slidespin::fixtures
