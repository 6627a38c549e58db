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

#include "slidespin/tissue.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <boost/multiprecision/cpp_int.hpp>

#include "slidespin/error.hpp"

namespace slidespin {

using boost::multiprecision::cpp_int;

std::uint64_t GrayHistogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

double TissueMask::coverage() const {
  if (bits.empty()) return 0.0;
  const auto n = std::count(bits.begin(), bits.end(), std::uint8_t{1});
  return static_cast<double>(n) / static_cast<double>(bits.size());
}

GrayImage to_grayscale(const RasterPatch& patch) {
  GrayImage gray;
  gray.width = patch.width;
  gray.height = patch.height;
  gray.pixels.resize(static_cast<std::size_t>(patch.width) * patch.height);
  const std::uint8_t* p = patch.pixels.data();
  for (auto& g : gray.pixels) {
    g = gray_value(p[0], p[1], p[2]);
    p += 3;
  }
  return gray;
}

GrayHistogram histogram(const GrayImage& image) {
  GrayHistogram hist;
  for (std::uint8_t v : image.pixels) ++hist.counts[v];
  return hist;
}

int otsu_threshold(const GrayHistogram& hist) {
  const std::uint64_t total = hist.total();
  if (total == 0) throw Error(ErrorCode::EmptyHistogram, "histogram is empty");

  cpp_int sum_all = 0;
  for (int v = 0; v < 256; ++v) sum_all += cpp_int(v) * hist.counts[v];

  // w0*w1*(mu0-mu1)^2 = (N*S0 - n0*S)^2 / (N^2 * n0 * n1); the N^2 factor is
  // shared by every candidate, so compare the remaining fraction exactly.
  int best_t = 0;
  cpp_int best_num = 0;
  cpp_int best_den = 1;
  cpp_int n0 = 0;
  cpp_int s0 = 0;
  for (int t = 0; t < 256; ++t) {
    n0 += hist.counts[t];
    s0 += cpp_int(t) * hist.counts[t];
    const cpp_int n1 = cpp_int(total) - n0;
    if (n0 == 0 || n1 == 0) continue;
    const cpp_int a = cpp_int(total) * s0 - n0 * sum_all;
    const cpp_int num = a * a;
    const cpp_int den = n0 * n1;
    if (num * best_den > best_num * den) {
      best_num = num;
      best_den = den;
      best_t = t;
    }
  }
  return best_t;
}

namespace morphology {
namespace {

template <typename Reduce>
std::vector<std::uint8_t> filter3x3(const std::vector<std::uint8_t>& bits,
                                    int width, int height, Reduce reduce) {
  std::vector<std::uint8_t> out(bits.size());
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      int ones = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        const int yy = std::clamp(y + dy, 0, height - 1);
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = std::clamp(x + dx, 0, width - 1);
          ones += bits[static_cast<std::size_t>(yy) * width + xx] ? 1 : 0;
        }
      }
      out[static_cast<std::size_t>(y) * width + x] = reduce(ones) ? 1 : 0;
    }
  }
  return out;
}

}  // namespace

std::vector<std::uint8_t> median3x3(const std::vector<std::uint8_t>& bits,
                                    int width, int height) {
  return filter3x3(bits, width, height, [](int ones) { return ones >= 5; });
}

std::vector<std::uint8_t> dilate3x3(const std::vector<std::uint8_t>& bits,
                                    int width, int height) {
  return filter3x3(bits, width, height, [](int ones) { return ones > 0; });
}

std::vector<std::uint8_t> erode3x3(const std::vector<std::uint8_t>& bits,
                                   int width, int height) {
  return filter3x3(bits, width, height, [](int ones) { return ones == 9; });
}

}  // namespace morphology

TissueMask detect_tissue(const RasterPatch& thumbnail, std::int64_t level0_width,
                         std::int64_t level0_height) {
  const GrayImage gray = to_grayscale(thumbnail);
  const int t = otsu_threshold(histogram(gray));

  TissueMask mask;
  mask.width = gray.width;
  mask.height = gray.height;
  mask.threshold_used = t;
  mask.scale_x = static_cast<double>(level0_width) / gray.width;
  mask.scale_y = static_cast<double>(level0_height) / gray.height;

  std::vector<std::uint8_t> bits(gray.pixels.size());
  std::transform(gray.pixels.begin(), gray.pixels.end(), bits.begin(),
                 [t](std::uint8_t g) { return g <= t ? 1 : 0; });
  bits = morphology::median3x3(bits, mask.width, mask.height);
  bits = morphology::dilate3x3(bits, mask.width, mask.height);
  mask.bits = morphology::erode3x3(bits, mask.width, mask.height);
  return mask;
}

TissueMask detect_tissue(const SlidePyramid& slide, int max_dim) {
  return detect_tissue(slide.thumbnail(max_dim), slide.width(), slide.height());
}

double tissue_fraction(const TissueMask& mask, const Rect& rect) {
  if (rect.width <= 0 || rect.height <= 0 || mask.width == 0) return 0.0;
  auto lo = [](double v, int limit) {
    return static_cast<int>(std::clamp(std::floor(v), 0.0, double(limit)));
  };
  auto hi = [](double v, int limit) {
    return static_cast<int>(std::clamp(std::ceil(v), 0.0, double(limit)));
  };
  const int x0 = lo(rect.x / mask.scale_x, mask.width);
  const int x1 = hi((rect.x + rect.width) / mask.scale_x, mask.width);
  const int y0 = lo(rect.y / mask.scale_y, mask.height);
  const int y1 = hi((rect.y + rect.height) / mask.scale_y, mask.height);
  if (x0 >= x1 || y0 >= y1) return 0.0;

  std::int64_t tissue = 0;
  for (int y = y0; y < y1; ++y) {
    const std::uint8_t* row = mask.bits.data() + static_cast<std::size_t>(y) * mask.width;
    tissue += std::count(row + x0, row + x1, std::uint8_t{1});
  }
  const auto area = static_cast<std::int64_t>(x1 - x0) * (y1 - y0);
  return static_cast<double>(tissue) / static_cast<double>(area);
}

void write_pgm(const TissueMask& mask, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
  for (std::uint8_t b : mask.bits) out.put(static_cast<char>(b ? 255 : 0));
  if (!out) throw Error(ErrorCode::WriteFailure, "cannot write " + path.string());
}

}  // namespace slidespin
