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

#include "slidespin/slide.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "slide_backends.hpp"
#include "slidespin/error.hpp"

namespace slidespin {

namespace fs = std::filesystem;

void validate_geometry(const std::vector<LevelInfo>& levels) {
  if (levels.empty()) {
    throw Error(ErrorCode::CorruptHeader, "slide has no levels");
  }
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const auto& l = levels[i];
    if (l.width < 1 || l.height < 1) {
      throw Error(ErrorCode::CorruptHeader,
                  "level " + std::to_string(i) + " has empty dimensions");
    }
    if (!std::isfinite(l.downsample) || l.downsample < 1.0) {
      throw Error(ErrorCode::CorruptHeader,
                  "level " + std::to_string(i) + " has invalid downsample");
    }
    if (i > 0 && (l.width >= levels[i - 1].width ||
                  l.height >= levels[i - 1].height)) {
      throw Error(ErrorCode::CorruptHeader,
                  "level " + std::to_string(i) + " (" +
                      std::to_string(l.width) + "x" + std::to_string(l.height) +
                      ") is not smaller than level " + std::to_string(i - 1));
    }
  }
  if (levels.front().downsample != 1.0) {
    throw Error(ErrorCode::CorruptHeader, "level 0 downsample must be 1");
  }
}

namespace detail {

std::vector<LevelInfo> make_levels(
    const std::vector<std::pair<std::int64_t, std::int64_t>>& dims) {
  std::vector<LevelInfo> levels;
  levels.reserve(dims.size());
  for (std::size_t i = 0; i < dims.size(); ++i) {
    LevelInfo info;
    info.index = static_cast<int>(i);
    info.width = dims[i].first;
    info.height = dims[i].second;
    info.downsample =
        (i == 0 || info.width <= 0)
            ? 1.0
            : static_cast<double>(dims[0].first) / static_cast<double>(info.width);
    levels.push_back(info);
  }
  return levels;
}

}  // namespace detail

SlidePyramid::SlidePyramid(fs::path path, Geometry geometry,
                           std::shared_ptr<const SlideBackend> backend)
    : path_(std::move(path)),
      geometry_(std::move(geometry)),
      backend_(std::move(backend)) {
  validate_geometry(geometry_.levels);
}

const LevelInfo& SlidePyramid::level(int index) const {
  if (index < 0 || index >= level_count()) {
    throw Error(ErrorCode::InvalidLevel,
                "level " + std::to_string(index) + " out of range [0, " +
                    std::to_string(level_count()) + ")");
  }
  return geometry_.levels[static_cast<std::size_t>(index)];
}

RasterPatch SlidePyramid::read_region(int level_index, std::int64_t x,
                                      std::int64_t y, int w, int h) const {
  const LevelInfo& info = level(level_index);
  const auto lx = static_cast<std::int64_t>(
      std::floor(static_cast<double>(x) / info.downsample));
  const auto ly = static_cast<std::int64_t>(
      std::floor(static_cast<double>(y) / info.downsample));
  RasterPatch patch = read_level_region(level_index, lx, ly, w, h);
  patch.origin_x = x;
  patch.origin_y = y;
  return patch;
}

RasterPatch SlidePyramid::read_level_region(int level_index, std::int64_t x,
                                            std::int64_t y, int w,
                                            int h) const {
  const LevelInfo& info = level(level_index);
  if (w < 1 || h < 1) {
    throw Error(ErrorCode::InvalidArgument,
                "region size must be positive, got " + std::to_string(w) +
                    "x" + std::to_string(h));
  }
  RasterPatch patch(w, h, 255);
  patch.level = level_index;
  patch.origin_x = static_cast<std::int64_t>(
      std::floor(static_cast<double>(x) * info.downsample));
  patch.origin_y = static_cast<std::int64_t>(
      std::floor(static_cast<double>(y) * info.downsample));

  const std::int64_t x0 = std::max<std::int64_t>(x, 0);
  const std::int64_t y0 = std::max<std::int64_t>(y, 0);
  const std::int64_t x1 = std::min<std::int64_t>(x + w, info.width);
  const std::int64_t y1 = std::min<std::int64_t>(y + h, info.height);
  if (x0 >= x1 || y0 >= y1) return patch;

  const int iw = static_cast<int>(x1 - x0);
  const int ih = static_cast<int>(y1 - y0);
  if (iw == w && ih == h) {
    backend_->read_level_rect(level_index, x0, y0, iw, ih, patch.pixels.data());
    return patch;
  }
  std::vector<std::uint8_t> inner(static_cast<std::size_t>(iw) * ih * 3);
  backend_->read_level_rect(level_index, x0, y0, iw, ih, inner.data());
  const auto dx = static_cast<int>(x0 - x);
  const auto dy = static_cast<int>(y0 - y);
  for (int r = 0; r < ih; ++r) {
    std::memcpy(patch.at(dx, dy + r), inner.data() + r * iw * 3,
                static_cast<std::size_t>(iw) * 3);
  }
  return patch;
}

std::pair<int, int> fit_within(std::int64_t width, std::int64_t height,
                               int max_dim) {
  const std::int64_t longest = std::max(width, height);
  if (longest <= max_dim) {
    return {static_cast<int>(width), static_cast<int>(height)};
  }
  auto scaled = [&](std::int64_t side) {
    const std::int64_t v = (side * max_dim + longest / 2) / longest;
    return static_cast<int>(std::clamp<std::int64_t>(v, 1, max_dim));
  };
  return {scaled(width), scaled(height)};
}

RasterPatch SlidePyramid::thumbnail(int max_dim) const {
  if (max_dim < 16) {
    throw Error(ErrorCode::InvalidArgument,
                "thumbnail max_dim must be >= 16, got " +
                    std::to_string(max_dim));
  }
  int source = 0;
  for (int i = level_count() - 1; i >= 0; --i) {
    const auto& l = geometry_.levels[static_cast<std::size_t>(i)];
    if (std::max(l.width, l.height) >= max_dim) {
      source = i;
      break;
    }
  }
  const LevelInfo& l = level(source);
  RasterPatch full = read_level_region(source, 0, 0, static_cast<int>(l.width),
                                       static_cast<int>(l.height));
  const auto [tw, th] = fit_within(l.width, l.height, max_dim);
  RasterPatch thumb = (tw == full.width && th == full.height)
                          ? std::move(full)
                          : box_resize(full, tw, th);
  thumb.level = source;
  thumb.origin_x = 0;
  thumb.origin_y = 0;
  return thumb;
}

RasterPatch box_resize(const RasterPatch& src, int width, int height) {
  if (width < 1 || height < 1 || src.width < 1 || src.height < 1) {
    throw Error(ErrorCode::InvalidArgument, "box_resize needs positive sizes");
  }
  const std::int64_t sw = src.width;
  const std::int64_t sh = src.height;
  const std::int64_t tw = width;
  const std::int64_t th = height;

  // Source pixel j spans [j*tw, (j+1)*tw) and target pixel i spans
  // [i*sw, (i+1)*sw) in a common integer grid, so every overlap is exact.
  struct Tap {
    std::int64_t index;
    std::int64_t weight;
  };
  auto taps_for = [](std::int64_t n_src, std::int64_t n_dst) {
    std::vector<std::vector<Tap>> taps(static_cast<std::size_t>(n_dst));
    for (std::int64_t i = 0; i < n_dst; ++i) {
      const std::int64_t lo = i * n_src;
      const std::int64_t hi = (i + 1) * n_src;
      for (std::int64_t j = lo / n_dst; j * n_dst < hi && j < n_src; ++j) {
        const std::int64_t o =
            std::min(hi, (j + 1) * n_dst) - std::max(lo, j * n_dst);
        if (o > 0) taps[static_cast<std::size_t>(i)].push_back({j, o});
      }
    }
    return taps;
  };
  const auto xtaps = taps_for(sw, tw);
  const auto ytaps = taps_for(sh, th);

  RasterPatch out(width, height, 0);
  out.origin_x = src.origin_x;
  out.origin_y = src.origin_y;
  out.level = src.level;

  const std::uint64_t denom = static_cast<std::uint64_t>(sw) * sh;
  std::vector<std::uint64_t> hrow(static_cast<std::size_t>(tw) * 3);
  std::vector<std::uint64_t> acc(static_cast<std::size_t>(tw) * 3);
  for (std::int64_t i = 0; i < th; ++i) {
    std::fill(acc.begin(), acc.end(), 0);
    for (const Tap& ty : ytaps[static_cast<std::size_t>(i)]) {
      const std::uint8_t* srow = src.row(static_cast<int>(ty.index));
      for (std::int64_t k = 0; k < tw; ++k) {
        std::uint64_t r = 0, g = 0, b = 0;
        for (const Tap& tx : xtaps[static_cast<std::size_t>(k)]) {
          const std::uint8_t* p = srow + tx.index * 3;
          r += p[0] * static_cast<std::uint64_t>(tx.weight);
          g += p[1] * static_cast<std::uint64_t>(tx.weight);
          b += p[2] * static_cast<std::uint64_t>(tx.weight);
        }
        hrow[k * 3 + 0] = r;
        hrow[k * 3 + 1] = g;
        hrow[k * 3 + 2] = b;
      }
      const auto wy = static_cast<std::uint64_t>(ty.weight);
      for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += hrow[c] * wy;
    }
    std::uint8_t* orow = out.row(static_cast<int>(i));
    for (std::size_t c = 0; c < acc.size(); ++c) {
      orow[c] = static_cast<std::uint8_t>((acc[c] + denom / 2) / denom);
    }
  }
  return out;
}

namespace detail {

// ---- in-memory -------------------------------------------------------------

MemoryBackend::MemoryBackend(std::vector<RasterPatch> levels)
    : levels_(std::move(levels)) {}

void MemoryBackend::read_level_rect(int level, std::int64_t x, std::int64_t y,
                                    int w, int h, std::uint8_t* out) const {
  const RasterPatch& img = levels_.at(static_cast<std::size_t>(level));
  for (int r = 0; r < h; ++r) {
    std::memcpy(out + static_cast<std::size_t>(r) * w * 3,
                img.at(static_cast<int>(x), static_cast<int>(y) + r),
                static_cast<std::size_t>(w) * 3);
  }
}

// ---- directory pyramid -------------------------------------------------------

DirectoryBackend::DirectoryBackend(const fs::path& dir,
                                   const std::vector<LevelInfo>& levels) {
  for (const auto& l : levels) {
    const fs::path file = dir / ("level_" + std::to_string(l.index) + ".rgb");
    std::error_code ec;
    const auto size = fs::file_size(file, ec);
    if (ec) {
      throw Error(ErrorCode::CorruptHeader,
                  "missing level file " + file.string());
    }
    const auto expected = static_cast<std::uintmax_t>(l.width) * l.height * 3;
    if (size != expected) {
      throw Error(ErrorCode::CorruptHeader,
                  file.string() + " has " + std::to_string(size) +
                      " bytes, expected " + std::to_string(expected));
    }
    const int fd = ::open(file.c_str(), O_RDONLY | O_CLOEXEC);
    if (fd < 0) {
      throw Error(ErrorCode::ReadFailure, "cannot open " + file.string());
    }
    fds_.push_back(fd);
    widths_.push_back(l.width);
  }
}

DirectoryBackend::~DirectoryBackend() {
  for (int fd : fds_) ::close(fd);
}

void DirectoryBackend::read_level_rect(int level, std::int64_t x,
                                       std::int64_t y, int w, int h,
                                       std::uint8_t* out) const {
  const int fd = fds_.at(static_cast<std::size_t>(level));
  const std::int64_t stride = widths_[static_cast<std::size_t>(level)] * 3;
  const auto row_len = static_cast<std::size_t>(w) * 3;
  for (int r = 0; r < h; ++r) {
    const off_t offset = static_cast<off_t>((y + r) * stride + x * 3);
    std::size_t done = 0;
    while (done < row_len) {
      const ssize_t n = ::pread(fd, out + r * row_len + done, row_len - done,
                                offset + static_cast<off_t>(done));
      if (n <= 0) {
        throw Error(ErrorCode::ReadFailure,
                    "short read on level " + std::to_string(level));
      }
      done += static_cast<std::size_t>(n);
    }
  }
}

SlidePyramid open_directory_pyramid(const fs::path& dir) {
  const fs::path meta_path = dir / "pyramid.json";
  std::ifstream in(meta_path);
  if (!in) throw Error(ErrorCode::NotFound, "cannot read " + meta_path.string());
  nlohmann::json meta;
  try {
    in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptHeader,
                meta_path.string() + ": " + e.what());
  }
  SlidePyramid::Geometry geometry;
  try {
    std::vector<std::pair<std::int64_t, std::int64_t>> dims;
    for (const auto& l : meta.at("levels")) {
      dims.emplace_back(l.at("width").get<std::int64_t>(),
                        l.at("height").get<std::int64_t>());
    }
    geometry.levels = make_levels(dims);
    const int tile = meta.value("tile", 256);
    geometry.tile_width = tile;
    geometry.tile_height = tile;
    if (meta.contains("mpp") && !meta["mpp"].is_null()) {
      const double mpp = meta["mpp"].get<double>();
      if (!(mpp > 0.0) || !std::isfinite(mpp)) {
        throw Error(ErrorCode::CorruptHeader, "mpp must be positive");
      }
      geometry.mpp_x = mpp;
      geometry.mpp_y = mpp;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptHeader,
                meta_path.string() + ": " + e.what());
  }
  validate_geometry(geometry.levels);
  auto backend = std::make_shared<DirectoryBackend>(dir, geometry.levels);
  return SlidePyramid(dir, std::move(geometry), std::move(backend));
}

}  // namespace detail

SlidePyramid open_slide(const fs::path& path) {
  std::error_code ec;
  if (!fs::exists(path, ec)) {
    throw Error(ErrorCode::NotFound, "no such slide: " + path.string());
  }
  if (fs::is_directory(path, ec)) {
    if (!fs::exists(path / "pyramid.json", ec)) {
      throw Error(ErrorCode::UnsupportedFormat,
                  path.string() + " is a directory without pyramid.json");
    }
    return detail::open_directory_pyramid(path);
  }
  return detail::open_tiff_pyramid(path);
}

SlidePyramid make_memory_slide(std::vector<RasterPatch> levels,
                               std::optional<double> mpp, std::string name) {
  std::vector<std::pair<std::int64_t, std::int64_t>> dims;
  for (const auto& l : levels) dims.emplace_back(l.width, l.height);
  SlidePyramid::Geometry geometry;
  geometry.levels = detail::make_levels(dims);
  geometry.mpp_x = mpp;
  geometry.mpp_y = mpp;
  auto backend = std::make_shared<detail::MemoryBackend>(std::move(levels));
  return SlidePyramid(std::move(name), std::move(geometry), std::move(backend));
}

}  // namespace slidespin
