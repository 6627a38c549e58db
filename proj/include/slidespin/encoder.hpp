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

#include <array>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "slidespin/patching.hpp"
#include "slidespin/slide.hpp"

namespace slidespin {

struct EncoderSpec {
  std::string encoder_id = "reference-v1";  // or "onnx:<file in bundle>"
  int embed_dim = 16;
  int input_size = 224;
  std::array<float, 3> norm_mean{0.485f, 0.456f, 0.406f};
  std::array<float, 3> norm_std{0.229f, 0.224f, 0.225f};

  void validate() const;
};

/// N x D row-major float32; row i belongs to plan patch i.
struct EmbeddingMatrix {
  std::size_t rows = 0;
  int dim = 0;
  std::vector<float> values;

  std::span<const float> row(std::size_t i) const {
    return {values.data() + i * static_cast<std::size_t>(dim),
            static_cast<std::size_t>(dim)};
  }
};

/// Immutable after construction; embed() may be called concurrently.
class Encoder {
 public:
  virtual ~Encoder() = default;
  virtual const EncoderSpec& spec() const = 0;
  /// Writes patches.size() x embed_dim values into `out`.
  virtual void embed(std::span<const RasterPatch> patches,
                     std::span<float> out) const = 0;
};

/// "reference-v1" needs no files; "onnx:<file>" resolves <file> inside
/// bundle_dir and checks its declared and actual I/O against `spec`.
std::shared_ptr<const Encoder> load_encoder(const EncoderSpec& spec,
                                            const std::filesystem::path& bundle_dir);

/// (pixel / 255 - mean[c]) / std[c], channel-first (3 x S x S).
std::vector<float> normalize(const RasterPatch& patch, const EncoderSpec& spec);

/// Deterministic weight-free features: mean gray level of D horizontal
/// bands, scaled to [0, 1]. The last band absorbs leftover rows; when D
/// exceeds the patch height the extra bands are zero.
std::vector<float> reference_encode(const RasterPatch& patch, int dim);

struct EmbedOptions {
  std::size_t batch_size = 32;
  int threads = 1;
};

/// Loads patches lazily and encodes them in batches. Rows come back in plan
/// order regardless of batch size or thread count.
EmbeddingMatrix embed_batch(const Encoder& encoder, const PatchPlan& plan,
                            const SlidePyramid& slide,
                            const EmbedOptions& options = {});

}  // namespace slidespin
