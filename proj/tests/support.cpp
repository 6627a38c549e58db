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

#include "support.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "slidespin/fixtures.hpp"

namespace slidespin::testing {

namespace fs = std::filesystem;

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          ("slidespin-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

RasterPatch solid(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  RasterPatch p(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::uint8_t* px = p.at(x, y);
      px[0] = r;
      px[1] = g;
      px[2] = b;
    }
  }
  return p;
}

int uniform(std::mt19937& rng, int lo, int hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<int>(static_cast<std::uint64_t>(rng()) % span);
}

double unit(std::mt19937& rng) { return static_cast<double>(rng()) / 4294967296.0; }

RasterPatch random_image(int w, int h, std::mt19937& rng) {
  RasterPatch p(w, h);
  for (auto& v : p.pixels) v = static_cast<std::uint8_t>(rng() & 0xff);
  return p;
}

FixtureSet::FixtureSet()
    : slides(root / "slides"),
      blob(slides / "blob.tiff"),
      white(slides / "white.tiff"),
      four_patch(slides / "four_patch.tiff"),
      bundle(root / "demo-reference") {
  fs::create_directories(slides);
  fixtures::write_slide_tiff(blob, fixtures::blob_image());
  fixtures::write_slide_tiff(white, fixtures::white_image(2048));
  fixtures::write_slide_tiff(four_patch, fixtures::four_patch_image());
  fixtures::write_demo_bundle(bundle);
}

bool json_near(const nlohmann::json& a, const nlohmann::json& b, double tol) {
  if (a.is_number() && b.is_number()) {
    const double x = a.get<double>();
    const double y = b.get<double>();
    return std::abs(x - y) <= tol * std::max(1.0, std::abs(y));
  }
  if (a.type() != b.type()) return false;
  if (a.is_array()) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!json_near(a[i], b[i], tol)) return false;
    }
    return true;
  }
  if (a.is_object()) {
    if (a.size() != b.size()) return false;
    for (const auto& [k, v] : a.items()) {
      if (!b.contains(k) || !json_near(v, b[k], tol)) return false;
    }
    return true;
  }
  return a == b;
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace slidespin::testing
