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

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "slidespin/encoder.hpp"

namespace slidespin {

enum class AttentionKind { Tanh, Gated };

/// Attention-MIL head. Matrices are row-major float32:
/// V and U are L x D, W_out is C x D.
struct AggregatorWeights {
  int dim = 0;          // D
  int hidden = 0;       // L
  int num_classes = 0;  // C
  AttentionKind attention = AttentionKind::Tanh;
  std::vector<float> V;
  std::vector<float> w;
  std::vector<float> U;  // gated only
  std::vector<float> W_out;
  std::vector<float> b_out;
  std::vector<std::string> class_names;
};

struct InferenceResult {
  std::vector<double> logits;
  std::vector<double> probs;
  int predicted_index = -1;  // -1 when indeterminate
  std::vector<double> attention;
  std::vector<std::string> class_names;
};

/// Parses and validates the aggregator.json document.
/// Throws MissingTensor, ShapeMismatch (naming the tensor), NonFiniteWeight.
AggregatorWeights load_aggregator(const nlohmann::json& doc);

/// Numerically stable softmax; throws NonFiniteInput.
std::vector<double> softmax(const std::vector<double>& x);

/// Raw scores e_k = w . tanh(V h_k) (gated: w . (tanh(V h_k) * sigm(U h_k))).
std::vector<double> attention_logits(const AggregatorWeights& weights,
                                     const EmbeddingMatrix& embeddings);

/// softmax over patches of attention_logits. Throws EmptyBag for N = 0.
std::vector<double> attention_scores(const AggregatorWeights& weights,
                                     const EmbeddingMatrix& embeddings);

/// z = sum_k a_k h_k; logits = W_out z + b_out; probs = softmax(logits).
InferenceResult forward(const AggregatorWeights& weights,
                        const EmbeddingMatrix& embeddings);

/// Index of the largest value, smallest index on ties.
int argmax(const std::vector<double>& values);

}  // namespace slidespin
