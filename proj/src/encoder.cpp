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

#include "slidespin/encoder.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <optional>
#include <thread>

#include "slidespin/error.hpp"
#include "slidespin/onnx.hpp"
#include "slidespin/tissue.hpp"

namespace slidespin {

namespace fs = std::filesystem;

void EncoderSpec::validate() const {
  std::vector<std::string> problems;
  if (encoder_id.empty()) problems.push_back("encoder_id is empty");
  if (embed_dim < 1) problems.push_back("embed_dim must be >= 1");
  if (input_size < 1) problems.push_back("input_size must be >= 1");
  for (int c = 0; c < 3; ++c) {
    if (!(norm_std[c] > 0.0f) || !std::isfinite(norm_std[c])) {
      problems.push_back("norm_std[" + std::to_string(c) + "] must be > 0");
    }
    if (!std::isfinite(norm_mean[c])) {
      problems.push_back("norm_mean[" + std::to_string(c) + "] must be finite");
    }
  }
  if (!problems.empty()) {
    throw Error(ErrorCode::InvalidArgument, "invalid encoder spec", problems);
  }
}

std::vector<float> normalize(const RasterPatch& patch, const EncoderSpec& spec) {
  if (patch.width != spec.input_size || patch.height != spec.input_size) {
    throw Error(ErrorCode::SizeMismatch,
                "patch is " + std::to_string(patch.width) + "x" +
                    std::to_string(patch.height) + ", encoder expects " +
                    std::to_string(spec.input_size));
  }
  const std::size_t plane = static_cast<std::size_t>(patch.width) * patch.height;
  std::vector<float> out(plane * 3);
  for (int c = 0; c < 3; ++c) {
    const float mean = spec.norm_mean[c];
    const float stdev = spec.norm_std[c];
    float* dst = out.data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      dst[i] = (static_cast<float>(patch.pixels[i * 3 + c]) / 255.0f - mean) / stdev;
    }
  }
  return out;
}

std::vector<float> reference_encode(const RasterPatch& patch, int dim) {
  std::vector<float> features(static_cast<std::size_t>(std::max(dim, 0)), 0.0f);
  if (dim < 1 || patch.height < 1) return features;
  const int h = patch.height;
  const int band = h / dim;
  for (int j = 0; j < dim; ++j) {
    int y0, y1;
    if (dim > h) {
      if (j >= h) break;
      y0 = j;
      y1 = j + 1;
    } else {
      y0 = j * band;
      y1 = j == dim - 1 ? h : y0 + band;
    }
    std::uint64_t sum = 0;
    for (int y = y0; y < y1; ++y) {
      const std::uint8_t* p = patch.row(y);
      for (int x = 0; x < patch.width; ++x, p += 3) sum += gray_value(p[0], p[1], p[2]);
    }
    const double n = static_cast<double>(y1 - y0) * patch.width;
    features[static_cast<std::size_t>(j)] = static_cast<float>(sum / (n * 255.0));
  }
  return features;
}

namespace {

class ReferenceEncoder final : public Encoder {
 public:
  explicit ReferenceEncoder(EncoderSpec spec) : spec_(std::move(spec)) {}

  const EncoderSpec& spec() const override { return spec_; }

  void embed(std::span<const RasterPatch> patches,
             std::span<float> out) const override {
    const auto d = static_cast<std::size_t>(spec_.embed_dim);
    for (std::size_t i = 0; i < patches.size(); ++i) {
      const auto f = reference_encode(patches[i], spec_.embed_dim);
      std::copy(f.begin(), f.end(), out.begin() + static_cast<std::ptrdiff_t>(i * d));
    }
  }

 private:
  EncoderSpec spec_;
};

std::string dim_str(const onnx::Dim& d) {
  return d.value ? std::to_string(*d.value) : (d.param.empty() ? "?" : d.param);
}

class OnnxEncoder final : public Encoder {
 public:
  OnnxEncoder(EncoderSpec spec, onnx::Model model)
      : spec_(std::move(spec)), runtime_(std::move(model)) {
    check_declared_io();
    const auto& batch = runtime_.input().shape.front();
    single_image_input_ = batch.value && *batch.value == 1;
    // The declared output dim may be symbolic; a dry run settles it.
    RasterPatch blank(spec_.input_size, spec_.input_size, 0);
    std::vector<float> probe(static_cast<std::size_t>(spec_.embed_dim));
    embed(std::span<const RasterPatch>(&blank, 1), probe);
  }

  const EncoderSpec& spec() const override { return spec_; }

  void embed(std::span<const RasterPatch> patches,
             std::span<float> out) const override {
    if (patches.empty()) return;
    const std::size_t step = single_image_input_ ? 1 : patches.size();
    for (std::size_t start = 0; start < patches.size(); start += step) {
      const std::size_t n = std::min(step, patches.size() - start);
      const auto s = static_cast<std::int64_t>(spec_.input_size);
      std::vector<float> input;
      input.reserve(n * 3 * s * s);
      for (std::size_t i = 0; i < n; ++i) {
        const auto chw = normalize(patches[start + i], spec_);
        input.insert(input.end(), chw.begin(), chw.end());
      }
      const onnx::Tensor y = runtime_.run(onnx::Tensor::of_floats(
          {static_cast<std::int64_t>(n), 3, s, s}, std::move(input)));
      if (y.shape.size() != 2 || y.shape[0] != static_cast<std::int64_t>(n) ||
          y.shape[1] != spec_.embed_dim) {
        std::string got = "[";
        for (std::size_t i = 0; i < y.shape.size(); ++i) {
          got += (i ? "," : "") + std::to_string(y.shape[i]);
        }
        throw Error(ErrorCode::ShapeMismatch,
                    "encoder produced " + got + "], expected [" + std::to_string(n) +
                        "," + std::to_string(spec_.embed_dim) + "]");
      }
      std::copy(y.floats.begin(), y.floats.end(),
                out.begin() + static_cast<std::ptrdiff_t>(start * spec_.embed_dim));
    }
  }

 private:
  void check_declared_io() const {
    const onnx::ValueInfo& in = runtime_.input();
    if (in.elem_type != onnx::ElemType::Float) {
      throw Error(ErrorCode::ShapeMismatch, "encoder input must be float32");
    }
    if (!in.has_shape || in.shape.size() != 4) {
      throw Error(ErrorCode::ShapeMismatch, "encoder input must be rank-4 NCHW");
    }
    const auto expect = [&](std::size_t axis, std::int64_t want, const char* what) {
      const auto& d = in.shape[axis];
      if (d.value && *d.value != want) {
        throw Error(ErrorCode::ShapeMismatch,
                    std::string("encoder input ") + what + " is " + dim_str(d) +
                        ", spec requires " + std::to_string(want));
      }
    };
    expect(1, 3, "channels");
    expect(2, spec_.input_size, "height");
    expect(3, spec_.input_size, "width");

    const onnx::ValueInfo& out = runtime_.output();
    if (out.has_shape) {
      if (out.shape.size() != 2) {
        throw Error(ErrorCode::ShapeMismatch, "encoder output must be rank-2 [N, D]");
      }
      const auto& d = out.shape[1];
      if (d.value && *d.value != spec_.embed_dim) {
        throw Error(ErrorCode::ShapeMismatch,
                    "encoder output dim is " + std::to_string(*d.value) +
                        ", spec embed_dim is " + std::to_string(spec_.embed_dim));
      }
    }
  }

  EncoderSpec spec_;
  onnx::Runtime runtime_;
  bool single_image_input_ = false;
};

}  // namespace

std::shared_ptr<const Encoder> load_encoder(const EncoderSpec& spec,
                                            const fs::path& bundle_dir) {
  spec.validate();
  if (spec.encoder_id == "reference-v1") {
    return std::make_shared<ReferenceEncoder>(spec);
  }
  constexpr std::string_view kOnnx = "onnx:";
  if (spec.encoder_id.rfind(kOnnx, 0) == 0) {
    const fs::path file = bundle_dir / spec.encoder_id.substr(kOnnx.size());
    std::error_code ec;
    if (!fs::is_regular_file(file, ec)) {
      throw Error(ErrorCode::UnknownEncoder,
                  "encoder model not found: " + file.string());
    }
    return std::make_shared<OnnxEncoder>(spec, onnx::load_model(file));
  }
  throw Error(ErrorCode::UnknownEncoder,
              "unknown encoder id '" + spec.encoder_id + "'");
}

EmbeddingMatrix embed_batch(const Encoder& encoder, const PatchPlan& plan,
                            const SlidePyramid& slide,
                            const EmbedOptions& options) {
  if (options.batch_size < 1) {
    throw Error(ErrorCode::InvalidArgument, "batch_size must be >= 1");
  }
  EmbeddingMatrix m;
  m.rows = plan.size();
  m.dim = encoder.spec().embed_dim;
  m.values.assign(m.rows * static_cast<std::size_t>(m.dim), 0.0f);
  if (m.rows == 0) return m;

  const std::size_t bs = options.batch_size;
  const std::size_t n_batches = (m.rows + bs - 1) / bs;
  const std::size_t workers = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::max(options.threads, 1)), 1, n_batches);

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::optional<std::pair<std::size_t, Error>> first_error;
  auto record = [&](std::size_t patch, Error e) {
    std::lock_guard lock(error_mutex);
    if (!first_error || patch < first_error->first) first_error.emplace(patch, std::move(e));
  };

  auto work = [&] {
    std::vector<RasterPatch> batch;
    for (std::size_t b = next++; b < n_batches; b = next++) {
      const std::size_t begin = b * bs;
      const std::size_t end = std::min(begin + bs, m.rows);
      batch.clear();
      std::size_t i = begin;
      try {
        for (; i < end; ++i) batch.push_back(load_patch(slide, plan, i));
        std::span<float> out(m.values.data() + begin * m.dim, (end - begin) * m.dim);
        i = begin;
        encoder.embed(batch, out);
        for (std::size_t r = begin; r < end; ++r) {
          for (float v : m.row(r)) {
            if (!std::isfinite(v)) {
              i = r;
              throw Error(ErrorCode::NonFiniteEmbedding,
                          "non-finite embedding value for patch " + std::to_string(r));
            }
          }
        }
      } catch (const Error& e) {
        if (e.code() == ErrorCode::NonFiniteEmbedding) {
          record(i, e);
        } else {
          record(i, Error(e.code(), "patch " + std::to_string(i) + ": " + e.message(),
                          e.details()));
        }
        return;
      } catch (const std::exception& e) {
        record(i, Error(ErrorCode::ReadFailure, "patch " + std::to_string(i) + ": " + e.what()));
        return;
      }
    }
  };

  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work);
  }
  if (first_error) throw first_error->second;
  return m;
}

}  // namespace slidespin
