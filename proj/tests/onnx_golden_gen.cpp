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

// Writes the golden ONNX graphs and their inputs. The expected outputs are
// then produced by an independent runtime, see tests/data/onnx/make_expected.py.

#include <iostream>

#include <nlohmann/json.hpp>

#include "onnx_models.hpp"
#include "support.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: onnx_golden_gen <out-dir>\n";
    return 1;
  }
  const std::filesystem::path dir = argv[1];
  std::filesystem::create_directories(dir);
  std::uint32_t seed = 100;
  for (const auto& m : slidespin::testing::golden_models()) {
    slidespin::onnx::save_model(m.model, dir / (m.name + ".onnx"));
    const nlohmann::json doc = {
        {"input_shape", m.input_shape},
        {"input", slidespin::testing::golden_input(m.input_shape, seed++)}};
    slidespin::testing::write_text(dir / (m.name + ".json"), doc.dump() + "\n");
    std::cout << m.name << "\n";
  }
  return 0;
}
