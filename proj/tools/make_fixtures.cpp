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

// Writes the synthetic slides and the demo bundle used by the examples in
// the README and by the service smoke test.

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "slidespin/fixtures.hpp"

namespace fs = std::filesystem;
namespace fx = slidespin::fixtures;

int main(int argc, char** argv) {
  CLI::App app{"Generate synthetic slides and the demo bundle"};
  fs::path slides_dir = "fixtures/slides";
  fs::path bundle_dir;
  app.add_option("--slides", slides_dir, "Output directory for slides");
  app.add_option("--bundle", bundle_dir, "Also write the demo bundle here");
  CLI11_PARSE(app, argc, argv);

  try {
    fs::create_directories(slides_dir);
    fx::write_slide_tiff(slides_dir / "blob.tiff", fx::blob_image());
    fx::write_slide_tiff(slides_dir / "white.tiff", fx::white_image(2048));
    fx::write_slide_tiff(slides_dir / "four_patch.tiff", fx::four_patch_image());
    std::cout << "wrote slides to " << slides_dir << "\n";
    if (!bundle_dir.empty()) {
      fx::write_demo_bundle(bundle_dir);
      std::cout << "wrote demo bundle to " << bundle_dir << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
