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

#include <tiffio.h>

#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <list>
#include <memory>
#include <mutex>
#include <unordered_map>

#include "slide_backends.hpp"
#include "slidespin/error.hpp"

namespace slidespin::detail {

namespace fs = std::filesystem;

namespace {

thread_local std::string tls_tiff_error;

void capture_tiff_error(const char* module, const char* fmt, va_list args) {
  char buf[512];
  std::vsnprintf(buf, sizeof(buf), fmt, args);
  tls_tiff_error = (module ? std::string(module) + ": " : std::string()) + buf;
}

void install_handlers() {
  static std::once_flag once;
  std::call_once(once, [] {
    TIFFSetErrorHandler(capture_tiff_error);
    TIFFSetWarningHandler(nullptr);
  });
}

std::string last_tiff_error() {
  return tls_tiff_error.empty() ? "unknown libtiff error" : tls_tiff_error;
}

bool has_tiff_magic(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  unsigned char m[4] = {0, 0, 0, 0};
  in.read(reinterpret_cast<char*>(m), 4);
  if (in.gcount() != 4) return false;
  const bool le = m[0] == 'I' && m[1] == 'I' && (m[2] == 42 || m[2] == 43) &&
                  m[3] == 0;
  const bool be = m[0] == 'M' && m[1] == 'M' && m[2] == 0 &&
                  (m[3] == 42 || m[3] == 43);
  return le || be;
}

struct TiffCloser {
  void operator()(TIFF* t) const {
    if (t) TIFFClose(t);
  }
};
using TiffPtr = std::unique_ptr<TIFF, TiffCloser>;

struct TiffLevel {
  tdir_t directory = 0;
  std::int64_t width = 0;
  std::int64_t height = 0;
  std::uint32_t tile_width = 0;
  std::uint32_t tile_height = 0;
  int samples = 3;
  bool jpeg_ycbcr = false;
};

using TileBuffer = std::shared_ptr<const std::vector<std::uint8_t>>;

class TiffBackend final : public SlideBackend {
 public:
  TiffBackend(fs::path path, std::vector<TiffLevel> levels)
      : path_(std::move(path)), levels_(std::move(levels)) {}

  ~TiffBackend() override = default;

  void read_level_rect(int level, std::int64_t x, std::int64_t y, int w, int h,
                       std::uint8_t* out) const override {
    const TiffLevel& L = levels_.at(static_cast<std::size_t>(level));
    const std::int64_t tw = L.tile_width;
    const std::int64_t th = L.tile_height;
    const std::int64_t tx0 = x / tw, tx1 = (x + w - 1) / tw;
    const std::int64_t ty0 = y / th, ty1 = (y + h - 1) / th;
    for (std::int64_t ty = ty0; ty <= ty1; ++ty) {
      for (std::int64_t tx = tx0; tx <= tx1; ++tx) {
        const TileBuffer tile = fetch_tile(level, L, tx, ty);
        const std::int64_t ox = tx * tw, oy = ty * th;
        const std::int64_t cx0 = std::max(x, ox), cx1 = std::min(x + w, ox + tw);
        const std::int64_t cy0 = std::max(y, oy), cy1 = std::min(y + h, oy + th);
        for (std::int64_t r = cy0; r < cy1; ++r) {
          std::memcpy(out + ((r - y) * w + (cx0 - x)) * 3,
                      tile->data() + ((r - oy) * tw + (cx0 - ox)) * 3,
                      static_cast<std::size_t>(cx1 - cx0) * 3);
        }
      }
    }
  }

 private:
  static constexpr std::size_t kCacheTiles = 128;

  struct Key {
    int level;
    std::int64_t tx, ty;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      return std::hash<std::int64_t>()((k.tx * 1000003 + k.ty) * 31 + k.level);
    }
  };

  // Handles are checked out for the duration of one tile decode.
  class Lease {
   public:
    explicit Lease(const TiffBackend& owner) : owner_(owner) {
      {
        std::lock_guard lock(owner_.pool_mutex_);
        if (!owner_.idle_.empty()) {
          handle_ = std::move(owner_.idle_.back());
          owner_.idle_.pop_back();
          return;
        }
      }
      handle_.tif.reset(TIFFOpen(owner_.path_.c_str(), "r"));
      if (!handle_.tif) {
        throw Error(ErrorCode::ReadFailure,
                    "cannot reopen " + owner_.path_.string() + ": " +
                        last_tiff_error());
      }
      handle_.directory = TIFFCurrentDirectory(handle_.tif.get());
      handle_.jpeg_rgb_set = false;
    }
    ~Lease() {
      std::lock_guard lock(owner_.pool_mutex_);
      owner_.idle_.push_back(std::move(handle_));
    }
    Lease(const Lease&) = delete;
    Lease& operator=(const Lease&) = delete;

    TIFF* select(const TiffLevel& L) {
      if (handle_.directory != L.directory || !handle_.valid) {
        if (!TIFFSetDirectory(handle_.tif.get(), L.directory)) {
          throw Error(ErrorCode::ReadFailure,
                      "cannot select directory: " + last_tiff_error());
        }
        handle_.directory = L.directory;
        handle_.valid = true;
        handle_.jpeg_rgb_set = false;
      }
      if (L.jpeg_ycbcr && !handle_.jpeg_rgb_set) {
        TIFFSetField(handle_.tif.get(), TIFFTAG_JPEGCOLORMODE,
                     JPEGCOLORMODE_RGB);
        handle_.jpeg_rgb_set = true;
      }
      return handle_.tif.get();
    }

   private:
    const TiffBackend& owner_;
    struct Handle {
      TiffPtr tif;
      tdir_t directory = 0;
      bool valid = false;
      bool jpeg_rgb_set = false;
    };
    Handle handle_;
    friend class TiffBackend;
  };

  TileBuffer fetch_tile(int level, const TiffLevel& L, std::int64_t tx,
                        std::int64_t ty) const {
    const Key key{level, tx, ty};
    {
      std::lock_guard lock(cache_mutex_);
      auto it = cache_index_.find(key);
      if (it != cache_index_.end()) {
        lru_.splice(lru_.begin(), lru_, it->second);
        return it->second->second;
      }
    }
    TileBuffer tile = decode_tile(L, tx, ty);
    std::lock_guard lock(cache_mutex_);
    if (cache_index_.find(key) == cache_index_.end()) {
      lru_.emplace_front(key, tile);
      cache_index_[key] = lru_.begin();
      if (lru_.size() > kCacheTiles) {
        cache_index_.erase(lru_.back().first);
        lru_.pop_back();
      }
    }
    return tile;
  }

  TileBuffer decode_tile(const TiffLevel& L, std::int64_t tx,
                         std::int64_t ty) const {
    Lease lease(*this);
    TIFF* tif = lease.select(L);
    const tmsize_t size = TIFFTileSize(tif);
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(size));
    const ttile_t index =
        TIFFComputeTile(tif, static_cast<std::uint32_t>(tx * L.tile_width),
                        static_cast<std::uint32_t>(ty * L.tile_height), 0, 0);
    if (TIFFReadEncodedTile(tif, index, raw.data(), size) < 0) {
      throw Error(ErrorCode::ReadFailure,
                  "tile (" + std::to_string(tx) + "," + std::to_string(ty) +
                      ") decode failed: " + last_tiff_error());
    }
    const std::size_t n =
        static_cast<std::size_t>(L.tile_width) * L.tile_height;
    if (L.samples == 3) {
      raw.resize(n * 3);
      return std::make_shared<const std::vector<std::uint8_t>>(std::move(raw));
    }
    auto rgb = std::make_shared<std::vector<std::uint8_t>>(n * 3);
    for (std::size_t i = 0; i < n; ++i) {
      std::memcpy(rgb->data() + i * 3, raw.data() + i * L.samples, 3);
    }
    return rgb;
  }

  fs::path path_;
  std::vector<TiffLevel> levels_;

  mutable std::mutex pool_mutex_;
  mutable std::vector<Lease::Handle> idle_;

  mutable std::mutex cache_mutex_;
  mutable std::list<std::pair<Key, TileBuffer>> lru_;
  mutable std::unordered_map<Key, decltype(lru_)::iterator, KeyHash>
      cache_index_;
};

bool supported_compression(std::uint16_t c) {
  switch (c) {
    case COMPRESSION_NONE:
    case COMPRESSION_ADOBE_DEFLATE:
    case COMPRESSION_DEFLATE:
      return true;
    case COMPRESSION_JPEG:
      return TIFFIsCODECConfigured(COMPRESSION_JPEG) != 0;
    default:
      return false;
  }
}

std::optional<double> resolution_to_mpp(TIFF* tif, ttag_t tag) {
  float res = 0.0f;
  std::uint16_t unit = RESUNIT_NONE;
  if (!TIFFGetField(tif, tag, &res) || res <= 0.0f) return std::nullopt;
  TIFFGetFieldDefaulted(tif, TIFFTAG_RESOLUTIONUNIT, &unit);
  if (unit == RESUNIT_CENTIMETER) return 10000.0 / res;
  if (unit == RESUNIT_INCH) return 25400.0 / res;
  return std::nullopt;
}

}  // namespace

SlidePyramid open_tiff_pyramid(const fs::path& path) {
  install_handlers();
  if (!has_tiff_magic(path)) {
    throw Error(ErrorCode::UnsupportedFormat,
                path.string() + " is not a TIFF file");
  }
  TiffPtr tif(TIFFOpen(path.c_str(), "r"));
  if (!tif) {
    throw Error(ErrorCode::CorruptHeader,
                "cannot parse " + path.string() + ": " + last_tiff_error());
  }

  std::vector<TiffLevel> levels;
  SlidePyramid::Geometry geometry;
  tdir_t dir = 0;
  do {
    std::uint32_t subfile = 0;
    TIFFGetField(tif.get(), TIFFTAG_SUBFILETYPE, &subfile);
    if (subfile & FILETYPE_MASK) continue;
    if (!TIFFIsTiled(tif.get())) {
      if (levels.empty()) {
        throw Error(ErrorCode::UnsupportedFormat,
                    path.string() + " is not tiled");
      }
      continue;  // associated images (label, macro) are stripped
    }
    std::uint32_t w = 0, h = 0, tw = 0, th = 0;
    std::uint16_t bps = 0, spp = 0, planar = PLANARCONFIG_CONTIG,
                  photometric = 0, compression = COMPRESSION_NONE;
    TIFFGetField(tif.get(), TIFFTAG_IMAGEWIDTH, &w);
    TIFFGetField(tif.get(), TIFFTAG_IMAGELENGTH, &h);
    TIFFGetField(tif.get(), TIFFTAG_TILEWIDTH, &tw);
    TIFFGetField(tif.get(), TIFFTAG_TILELENGTH, &th);
    TIFFGetFieldDefaulted(tif.get(), TIFFTAG_BITSPERSAMPLE, &bps);
    TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLESPERPIXEL, &spp);
    TIFFGetFieldDefaulted(tif.get(), TIFFTAG_PLANARCONFIG, &planar);
    TIFFGetField(tif.get(), TIFFTAG_PHOTOMETRIC, &photometric);
    TIFFGetFieldDefaulted(tif.get(), TIFFTAG_COMPRESSION, &compression);

    const std::string where =
        path.string() + " directory " + std::to_string(dir);
    if (bps != 8 || (spp != 3 && spp != 4) || planar != PLANARCONFIG_CONTIG) {
      throw Error(ErrorCode::UnsupportedFormat,
                  where + ": only 8-bit interleaved RGB/RGBA is supported");
    }
    if (!supported_compression(compression)) {
      throw Error(ErrorCode::UnsupportedFormat,
                  where + ": unsupported compression " +
                      std::to_string(compression));
    }
    const bool ycbcr = photometric == PHOTOMETRIC_YCBCR;
    if (photometric != PHOTOMETRIC_RGB &&
        !(ycbcr && compression == COMPRESSION_JPEG)) {
      throw Error(ErrorCode::UnsupportedFormat,
                  where + ": unsupported photometric " +
                      std::to_string(photometric));
    }
    if (w == 0 || h == 0 || tw == 0 || th == 0) {
      throw Error(ErrorCode::CorruptHeader, where + ": zero dimension");
    }

    TiffLevel L;
    L.directory = TIFFCurrentDirectory(tif.get());
    L.width = w;
    L.height = h;
    L.tile_width = tw;
    L.tile_height = th;
    L.samples = spp;
    L.jpeg_ycbcr = ycbcr;
    if (levels.empty()) {
      geometry.tile_width = static_cast<int>(tw);
      geometry.tile_height = static_cast<int>(th);
      geometry.mpp_x = resolution_to_mpp(tif.get(), TIFFTAG_XRESOLUTION);
      geometry.mpp_y = resolution_to_mpp(tif.get(), TIFFTAG_YRESOLUTION);
      if (!geometry.mpp_y) geometry.mpp_y = geometry.mpp_x;
      if (!geometry.mpp_x) geometry.mpp_y.reset();
    }
    levels.push_back(L);
    ++dir;
  } while (TIFFReadDirectory(tif.get()));

  if (levels.empty()) {
    throw Error(ErrorCode::UnsupportedFormat,
                path.string() + " has no image directories");
  }
  std::vector<std::pair<std::int64_t, std::int64_t>> dims;
  for (const auto& L : levels) dims.emplace_back(L.width, L.height);
  geometry.levels = make_levels(dims);
  validate_geometry(geometry.levels);
  auto backend = std::make_shared<TiffBackend>(path, std::move(levels));
  return SlidePyramid(path, std::move(geometry), std::move(backend));
}

}  // namespace slidespin::detail
