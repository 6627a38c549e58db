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

#include <doctest.h>

#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "slidespin/encoder.hpp"
#include "slidespin/error.hpp"
#include "slidespin/onnx.hpp"
#include "onnx_models.hpp"
#include "support.hpp"

using namespace slidespin;
namespace fs = std::filesystem;

namespace {

Error error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e;
  }
  FAIL("expected slidespin::Error");
  return Error(ErrorCode::InvalidArgument, "");
}

EncoderSpec spec_of(const std::string& id, int dim, int size) {
  EncoderSpec s;
  s.encoder_id = id;
  s.embed_dim = dim;
  s.input_size = size;
  return s;
}

TissueMask full_mask(std::int64_t w, std::int64_t h) {
  TissueMask m;
  m.width = 16;
  m.height = 16;
  m.bits.assign(256, 1);
  m.scale_x = static_cast<double>(w) / 16;
  m.scale_y = static_cast<double>(h) / 16;
  return m;
}

// Emits the patch's origin as features, or NaN for one chosen patch.
class ProbeEncoder final : public Encoder {
 public:
  ProbeEncoder(std::int64_t nan_x) : spec_(spec_of("probe", 2, 64)), nan_x_(nan_x) {}
  const EncoderSpec& spec() const override { return spec_; }
  void embed(std::span<const RasterPatch> patches, std::span<float> out) const override {
    for (std::size_t i = 0; i < patches.size(); ++i) {
      const bool bad = patches[i].origin_x == nan_x_;
      out[2 * i] = bad ? std::numeric_limits<float>::quiet_NaN()
                       : static_cast<float>(patches[i].origin_x);
      out[2 * i + 1] = static_cast<float>(patches[i].origin_y);
    }
  }

 private:
  EncoderSpec spec_;
  std::int64_t nan_x_;
};

}  // namespace

TEST_CASE("normalize") {
  EncoderSpec s = spec_of("reference-v1", 4, 32);
  s.norm_mean = {0.5f, 0.5f, 0.5f};
  s.norm_std = {0.5f, 0.5f, 0.5f};
  const auto white = normalize(RasterPatch(32, 32, 255), s);
  CHECK(white.size() == 3u * 32u * 32u);
  for (float v : white) CHECK(v == doctest::Approx(1.0f));
  for (float v : normalize(RasterPatch(32, 32, 0), s)) CHECK(v == doctest::Approx(-1.0f));

  s.norm_std = {0.25f, 0.25f, 0.25f};
  for (float v : normalize(RasterPatch(32, 32, 128), s)) {
    CHECK(v == doctest::Approx((128.0 / 255.0 - 0.5) / 0.25).epsilon(1e-6));
    CHECK(v == doctest::Approx(0.00784).epsilon(1e-3));
  }

  // Channel-first layout.
  const auto chw = normalize(testing::solid(32, 32, 255, 0, 255), s);
  CHECK(chw[0] > 0);
  CHECK(chw[32 * 32] < 0);
  CHECK(chw[2 * 32 * 32] > 0);

  CHECK(error_of([&] { normalize(RasterPatch(31, 32), s); }).code() == ErrorCode::SizeMismatch);
}

TEST_CASE("reference_encode") {
  const auto white = reference_encode(RasterPatch(64, 64, 255), 4);
  CHECK(white == std::vector<float>{1, 1, 1, 1});

  RasterPatch half(64, 64, 255);
  for (int y = 0; y < 32; ++y) std::fill_n(half.row(y), 64 * 3, 0);
  CHECK(reference_encode(half, 2) == std::vector<float>{0, 1});

  std::mt19937 rng(2);
  const RasterPatch p = testing::random_image(64, 64, rng);
  const auto f = reference_encode(p, 3);
  const int bounds[4] = {0, 21, 42, 64};
  for (int j = 0; j < 3; ++j) {
    double sum = 0;
    for (int y = bounds[j]; y < bounds[j + 1]; ++y) {
      for (int x = 0; x < 64; ++x) {
        const std::uint8_t* px = p.at(x, y);
        // Exact decimal weights; 0.299 etc. are not representable in binary.
        sum += std::floor((299.0 * px[0] + 587.0 * px[1] + 114.0 * px[2]) / 1000.0 + 0.5);
      }
    }
    const double mean = sum / ((bounds[j + 1] - bounds[j]) * 64.0) / 255.0;
    CHECK(std::abs(f[static_cast<std::size_t>(j)] - mean) <= 1e-6);
    CHECK(f[static_cast<std::size_t>(j)] >= 0.0f);
    CHECK(f[static_cast<std::size_t>(j)] <= 1.0f);
  }

  const auto wide = reference_encode(RasterPatch(4, 4, 255), 6);
  CHECK(wide == std::vector<float>{1, 1, 1, 1, 0, 0});
}

TEST_CASE("load_encoder") {
  testing::TempDir tmp;
  const auto ref = load_encoder(spec_of("reference-v1", 16, 224), tmp.path());
  CHECK(ref->spec().embed_dim == 16);

  SUBCASE("unknown id") {
    CHECK(error_of([&] { load_encoder(spec_of("resnet-9000", 8, 224), tmp.path()); }).code() ==
          ErrorCode::UnknownEncoder);
  }
  SUBCASE("missing onnx file names the path") {
    const Error e = error_of([&] { load_encoder(spec_of("onnx:enc.onnx", 8, 64), tmp.path()); });
    CHECK(e.code() == ErrorCode::UnknownEncoder);
    CHECK(e.message().find((tmp / "enc.onnx").string()) != std::string::npos);
  }
  SUBCASE("output dimension disagrees with the spec") {
    onnx::save_model(testing::gap_gemm_encoder(32, 768), tmp / "enc.onnx");
    const Error e = error_of([&] { load_encoder(spec_of("onnx:enc.onnx", 512, 32), tmp.path()); });
    CHECK(e.code() == ErrorCode::ShapeMismatch);
    CHECK(e.message().find("768") != std::string::npos);
  }
  SUBCASE("declared input size disagrees with the spec") {
    onnx::save_model(testing::gap_gemm_encoder(48, 8), tmp / "enc.onnx");
    CHECK(error_of([&] { load_encoder(spec_of("onnx:enc.onnx", 8, 32), tmp.path()); }).code() ==
          ErrorCode::ShapeMismatch);
  }
  SUBCASE("declared output dim lies about the real one") {
    onnx::save_model(testing::gap_gemm_encoder(32, 6, -1, 8), tmp / "enc.onnx");
    CHECK(error_of([&] { load_encoder(spec_of("onnx:enc.onnx", 8, 32), tmp.path()); }).code() ==
          ErrorCode::ShapeMismatch);
  }
  SUBCASE("fixed batch of one is accepted") {
    onnx::save_model(testing::gap_gemm_encoder(32, 8, 1), tmp / "enc.onnx");
    const auto enc = load_encoder(spec_of("onnx:enc.onnx", 8, 32), tmp.path());
    std::vector<RasterPatch> patches(3, RasterPatch(32, 32, 10));
    std::vector<float> out(24);
    enc->embed(patches, out);
    for (int i = 0; i < 8; ++i) {
      CHECK(out[static_cast<std::size_t>(i)] == out[static_cast<std::size_t>(16 + i)]);
    }
  }
  SUBCASE("unsupported operator") {
    onnx::save_model(testing::single_op_model("LSTM"), tmp / "enc.onnx");
    CHECK(error_of([&] { load_encoder(spec_of("onnx:enc.onnx", 8, 32), tmp.path()); }).code() ==
          ErrorCode::UnsupportedOperator);
  }
  SUBCASE("old opset") {
    onnx::save_model(testing::single_op_model("Relu", 11), tmp / "enc.onnx");
    CHECK(error_of([&] { load_encoder(spec_of("onnx:enc.onnx", 8, 32), tmp.path()); }).code() ==
          ErrorCode::UnsupportedOperator);
  }
  SUBCASE("corrupt model file") {
    testing::write_text(tmp / "enc.onnx", std::string("\x0a\xff\xff\xff\xff\x0f", 6));
    CHECK(error_of([&] { load_encoder(spec_of("onnx:enc.onnx", 8, 32), tmp.path()); }).code() ==
          ErrorCode::ParseError);
  }
}

TEST_CASE("onnx encoder computes normalized channel means times W plus b") {
  testing::TempDir tmp;
  const onnx::Model model = testing::gap_gemm_encoder(32, 5);
  onnx::save_model(model, tmp / "enc.onnx");
  const EncoderSpec spec = spec_of("onnx:enc.onnx", 5, 32);
  const auto enc = load_encoder(spec, tmp.path());

  std::mt19937 rng(12);
  const RasterPatch p = testing::random_image(32, 32, rng);
  std::vector<float> out(5);
  enc->embed(std::span<const RasterPatch>(&p, 1), out);

  const onnx::Tensor& W = model.graph.initializers[0];
  const onnx::Tensor& b = model.graph.initializers[1];
  double mean[3] = {0, 0, 0};
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      for (int c = 0; c < 3; ++c) {
        mean[c] += (p.at(x, y)[c] / 255.0 - spec.norm_mean[c]) / spec.norm_std[c];
      }
    }
  }
  for (double& m : mean) m /= 1024.0;
  for (int d = 0; d < 5; ++d) {
    double want = b.floats[static_cast<std::size_t>(d)];
    for (int c = 0; c < 3; ++c) want += W.floats[static_cast<std::size_t>(d * 3 + c)] * mean[c];
    CHECK(out[static_cast<std::size_t>(d)] == doctest::Approx(want).epsilon(1e-5));
  }
}

TEST_CASE("onnx interpreter matches onnxruntime golden outputs") {
  const fs::path dir = fs::path(SLIDESPIN_SOURCE_DIR) / "tests" / "data" / "onnx";
  int checked = 0;
  for (const auto& m : testing::golden_models()) {
    CAPTURE(m.name);
    const auto doc = nlohmann::json::parse(testing::read_text(dir / (m.name + ".json")));
    REQUIRE(doc.contains("expected"));
    // The committed model file must still be what the builders produce.
    const auto bytes = onnx::serialize_model(m.model);
    CHECK(testing::read_text(dir / (m.name + ".onnx")) == std::string(bytes.begin(), bytes.end()));

    const onnx::Runtime rt(onnx::load_model(dir / (m.name + ".onnx")));
    const onnx::Tensor y = rt.run(onnx::Tensor::of_floats(
        doc["input_shape"].get<std::vector<std::int64_t>>(), doc["input"].get<std::vector<float>>()));
    CHECK(y.shape == doc["expected_shape"].get<std::vector<std::int64_t>>());
    const auto expected = doc["expected"].get<std::vector<double>>();
    REQUIRE(y.floats.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
      CHECK(std::abs(y.floats[i] - expected[i]) <= 1e-5 + 1e-5 * std::abs(expected[i]));
    }
    ++checked;
  }
  CHECK(checked == 3);
}

TEST_CASE("onnx codec round trip") {
  for (const auto& m : testing::golden_models()) {
    const auto bytes = onnx::serialize_model(m.model);
    const onnx::Model back = onnx::parse_model(bytes);
    CHECK(back.graph.nodes.size() == m.model.graph.nodes.size());
    CHECK(back.graph.initializers.size() == m.model.graph.initializers.size());
    CHECK(back.opsets == m.model.opsets);
    CHECK(onnx::serialize_model(back) == bytes);
  }
}

TEST_CASE("embed_batch") {
  std::mt19937 rng(5);
  const SlidePyramid slide = make_memory_slide({testing::random_image(1024, 1024, rng)});
  PatchSpec ps;
  ps.patch_size_px = 64;
  const PatchPlan plan = plan_patches(slide, full_mask(1024, 1024), ps);
  REQUIRE(plan.size() == 256);

  const auto ref = load_encoder(spec_of("reference-v1", 5, 64), {});

  SUBCASE("empty plan") {
    PatchPlan empty = plan;
    empty.patches.clear();
    const EmbeddingMatrix m = embed_batch(*ref, empty, slide);
    CHECK(m.rows == 0);
    CHECK(m.dim == 5);
    CHECK(m.values.empty());
  }
  SUBCASE("rows follow plan order for any batch size and thread count") {
    const EmbeddingMatrix base = embed_batch(*ref, plan, slide, {1, 1});
    for (std::size_t i = 0; i < plan.size(); i += 37) {
      const auto f = reference_encode(load_patch(slide, plan, i), 5);
      CHECK(std::equal(f.begin(), f.end(), base.row(i).begin()));
    }
    for (std::size_t bs : {1, 7, 32, 1000}) {
      for (int threads : {1, 3, 8}) {
        CHECK(embed_batch(*ref, plan, slide, {bs, threads}).values == base.values);
      }
    }
  }
  SUBCASE("onnx encoder rows agree across batching") {
    testing::TempDir tmp;
    onnx::save_model(testing::gap_gemm_encoder(64, 4), tmp / "e.onnx");
    const auto enc = load_encoder(spec_of("onnx:e.onnx", 4, 64), tmp.path());
    const EmbeddingMatrix a = embed_batch(*enc, plan, slide, {1, 1});
    const EmbeddingMatrix b = embed_batch(*enc, plan, slide, {13, 4});
    REQUIRE(a.values.size() == b.values.size());
    for (std::size_t i = 0; i < a.values.size(); ++i) {
      CHECK(std::abs(a.values[i] - b.values[i]) <= 1e-5);
    }
  }
  SUBCASE("non-finite output names the patch") {
    const ProbeEncoder probe(plan.patches[40].x);  // first patch with that x is index 8
    for (int threads : {1, 4}) {
      const Error e = error_of([&] { embed_batch(probe, plan, slide, {16, threads}); });
      CHECK(e.code() == ErrorCode::NonFiniteEmbedding);
      CHECK(e.message().find("patch 8") != std::string::npos);
    }
  }
  SUBCASE("batch size zero") {
    CHECK(error_of([&] { embed_batch(*ref, plan, slide, {0, 1}); }).code() ==
          ErrorCode::InvalidArgument);
  }
}

TEST_CASE("four-patch tiling rows equal per-patch reference features") {
  RasterPatch base(1024, 1024);
  for (int y = 0; y < 1024; ++y) {
    for (int x = 0; x < 1024; ++x) std::fill_n(base.at(x, y), 3, (x / 512 + 2 * (y / 512)) * 60);
  }
  const SlidePyramid slide = make_memory_slide({base});
  PatchSpec ps;
  ps.patch_size_px = 512;
  const PatchPlan plan = plan_patches(slide, full_mask(1024, 1024), ps);
  REQUIRE(plan.size() == 4);
  const auto enc = load_encoder(spec_of("reference-v1", 2, 512), {});
  const EmbeddingMatrix m = embed_batch(*enc, plan, slide, {3, 2});
  for (std::size_t i = 0; i < 4; ++i) {
    const float v = static_cast<float>(i * 60 / 255.0);
    CHECK(m.row(i)[0] == doctest::Approx(v));
    CHECK(m.row(i)[1] == doctest::Approx(v));
    const auto f = reference_encode(load_patch(slide, plan, i), 2);
    CHECK(std::equal(f.begin(), f.end(), m.row(i).begin()));
  }
}
