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

// Minimal ONNX support: a protobuf codec for the fields of ModelProto that
// inference needs, and a single-threaded float32 CPU interpreter for a small
// operator set (see Runtime::supported_ops). Enough to run compact patch
// encoders shipped inside model bundles without an external runtime.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace slidespin::onnx {

enum class ElemType : int { Undefined = 0, Float = 1, Int64 = 7 };

struct Tensor {
  std::string name;
  ElemType type = ElemType::Float;
  std::vector<std::int64_t> shape;
  std::vector<float> floats;       // when type == Float
  std::vector<std::int64_t> ints;  // when type == Int64

  std::int64_t numel() const;
  static Tensor of_floats(std::vector<std::int64_t> shape,
                          std::vector<float> data, std::string name = {});
  static Tensor of_ints(std::vector<std::int64_t> shape,
                        std::vector<std::int64_t> data, std::string name = {});
};

struct Dim {
  std::optional<std::int64_t> value;
  std::string param;
};

struct ValueInfo {
  std::string name;
  ElemType elem_type = ElemType::Undefined;
  bool has_shape = false;
  std::vector<Dim> shape;
};

struct Attribute {
  enum class Kind : int {
    Undefined = 0,
    Float = 1,
    Int = 2,
    String = 3,
    Tensor = 4,
    Floats = 6,
    Ints = 7,
  };
  std::string name;
  Kind kind = Kind::Undefined;
  float f = 0.0f;
  std::int64_t i = 0;
  std::string s;
  std::vector<float> floats;
  std::vector<std::int64_t> ints;
  std::vector<onnx::Tensor> tensor;  // zero or one element
};

struct Node {
  std::string op_type;
  std::string name;
  std::string domain;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::vector<Attribute> attributes;

  const Attribute* attr(const std::string& key) const;
  std::int64_t attr_int(const std::string& key, std::int64_t fallback) const;
  float attr_float(const std::string& key, float fallback) const;
  std::vector<std::int64_t> attr_ints(const std::string& key) const;
};

struct Graph {
  std::string name;
  std::vector<Node> nodes;
  std::vector<Tensor> initializers;
  std::vector<ValueInfo> inputs;
  std::vector<ValueInfo> outputs;
};

struct Model {
  std::int64_t ir_version = 8;
  std::string producer_name;
  std::map<std::string, std::int64_t> opsets;  // "" is the default domain
  Graph graph;

  /// Graph inputs that are not initializers.
  std::vector<const ValueInfo*> runtime_inputs() const;
};

/// Decodes a serialized ModelProto. Throws Error(ParseError).
Model parse_model(std::span<const std::uint8_t> bytes);
Model load_model(const std::filesystem::path& path);

/// Encodes a ModelProto; used by tooling and tests to build encoders.
std::vector<std::uint8_t> serialize_model(const Model& model);
void save_model(const Model& model, const std::filesystem::path& path);

/// Immutable execution plan. run() is safe to call from several threads.
class Runtime {
 public:
  /// Validates opset >= 13, a single runtime input, a single output and
  /// that every op is supported. Throws UnsupportedOperator/ShapeMismatch.
  explicit Runtime(Model model);

  Tensor run(const Tensor& input) const;

  const Model& model() const { return model_; }
  const ValueInfo& input() const { return *input_; }
  const ValueInfo& output() const { return model_.graph.outputs.front(); }

  static const std::vector<std::string>& supported_ops();

 private:
  Model model_;
  const ValueInfo* input_ = nullptr;
  std::map<std::string, Tensor> constants_;
};

}  // namespace slidespin::onnx
