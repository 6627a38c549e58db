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

// Small ONNX graphs used by the encoder tests and the golden-output check.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "slidespin/onnx.hpp"

namespace slidespin::testing {

struct NamedModel {
  std::string name;
  onnx::Model model;
  std::vector<std::int64_t> input_shape;  // concrete shape used for goldens
};

/// Encoder-shaped model: [N,3,S,S] -> GlobalAveragePool -> Flatten ->
/// Gemm(D x 3, transB) -> [N,D]. batch_dim <= 0 declares a symbolic "N".
onnx::Model gap_gemm_encoder(int input_size, int dim, std::int64_t batch_dim = -1,
                             std::int64_t declared_dim = -1);

/// Graphs that together exercise every supported operator.
std::vector<NamedModel> golden_models();

/// Model whose only node is `op_type` (unsupported ops for error tests).
onnx::Model single_op_model(const std::string& op_type, std::int64_t opset = 13);

/// Deterministic input values for a golden model.
std::vector<float> golden_input(const std::vector<std::int64_t>& shape, std::uint32_t seed);

}  // namespace slidespin::testing
