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

#include "slidespin/aggregator.hpp"

#include <cmath>
#include <limits>

#include "slidespin/error.hpp"

namespace slidespin {

namespace {

using nlohmann::json;

float to_weight(const json& v, const std::string& tensor) {
  if (v.is_number()) {
    const double d = v.get<double>();
    // Values outside float range turn into inf and are rejected below.
    return static_cast<float>(d);
  }
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "NaN" || s == "nan") return std::numeric_limits<float>::quiet_NaN();
    if (s == "Infinity" || s == "inf") return std::numeric_limits<float>::infinity();
    if (s == "-Infinity" || s == "-inf") return -std::numeric_limits<float>::infinity();
  }
  throw Error(ErrorCode::ParseError, "tensor '" + tensor + "' holds a non-numeric value");
}

std::vector<float> read_vector(const json& doc, const std::string& name,
                               std::size_t expected) {
  if (!doc.contains(name)) {
    throw Error(ErrorCode::MissingTensor, "missing tensor '" + name + "'");
  }
  const json& v = doc.at(name);
  if (!v.is_array()) throw Error(ErrorCode::ShapeMismatch, "'" + name + "' must be an array");
  if (v.size() != expected) {
    throw Error(ErrorCode::ShapeMismatch,
                "'" + name + "' has length " + std::to_string(v.size()) +
                    ", expected " + std::to_string(expected));
  }
  std::vector<float> out;
  out.reserve(expected);
  for (const auto& x : v) out.push_back(to_weight(x, name));
  return out;
}

std::vector<float> read_matrix(const json& doc, const std::string& name,
                               std::size_t rows, std::size_t cols) {
  if (!doc.contains(name)) {
    throw Error(ErrorCode::MissingTensor, "missing tensor '" + name + "'");
  }
  const json& m = doc.at(name);
  if (!m.is_array() || m.size() != rows) {
    throw Error(ErrorCode::ShapeMismatch,
                "'" + name + "' must have " + std::to_string(rows) + " rows, found " +
                    (m.is_array() ? std::to_string(m.size()) : std::string("non-array")));
  }
  std::vector<float> out;
  out.reserve(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const json& row = m[r];
    if (!row.is_array() || row.size() != cols) {
      throw Error(ErrorCode::ShapeMismatch,
                  "'" + name + "' row " + std::to_string(r) + " must have " +
                      std::to_string(cols) + " columns");
    }
    for (const auto& x : row) out.push_back(to_weight(x, name));
  }
  return out;
}

void require_finite(const std::vector<float>& v, const std::string& name) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw Error(ErrorCode::NonFiniteWeight,
                  "'" + name + "' has a non-finite value at flat index " + std::to_string(i));
    }
  }
}

}  // namespace

AggregatorWeights load_aggregator(const json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::ParseError, "aggregator document must be an object");
  if (!doc.contains("dims")) throw Error(ErrorCode::MissingTensor, "missing 'dims'");
  AggregatorWeights w;
  try {
    const json& dims = doc.at("dims");
    w.dim = dims.at("D").get<int>();
    w.hidden = dims.at("L").get<int>();
    w.num_classes = dims.at("C").get<int>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("bad 'dims': ") + e.what());
  }
  if (w.dim < 1 || w.hidden < 1) {
    throw Error(ErrorCode::ShapeMismatch, "dims D and L must be >= 1");
  }
  if (w.num_classes < 2) {
    throw Error(ErrorCode::ShapeMismatch, "dims C must be >= 2");
  }
  const std::string kind = doc.value("attention", std::string("tanh"));
  if (kind == "tanh") {
    w.attention = AttentionKind::Tanh;
  } else if (kind == "gated") {
    w.attention = AttentionKind::Gated;
  } else {
    throw Error(ErrorCode::ParseError, "unknown attention kind '" + kind + "'");
  }

  const auto D = static_cast<std::size_t>(w.dim);
  const auto L = static_cast<std::size_t>(w.hidden);
  const auto C = static_cast<std::size_t>(w.num_classes);
  w.V = read_matrix(doc, "V", L, D);
  w.w = read_vector(doc, "w", L);
  if (w.attention == AttentionKind::Gated) w.U = read_matrix(doc, "U", L, D);
  w.W_out = read_matrix(doc, "W_out", C, D);
  w.b_out = read_vector(doc, "b_out", C);

  if (!doc.contains("class_names")) {
    throw Error(ErrorCode::MissingTensor, "missing 'class_names'");
  }
  try {
    w.class_names = doc.at("class_names").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("bad 'class_names': ") + e.what());
  }
  if (w.class_names.size() != C) {
    throw Error(ErrorCode::ShapeMismatch,
                "'class_names' has " + std::to_string(w.class_names.size()) +
                    " entries, expected " + std::to_string(C));
  }

  require_finite(w.V, "V");
  require_finite(w.w, "w");
  require_finite(w.U, "U");
  require_finite(w.W_out, "W_out");
  require_finite(w.b_out, "b_out");
  return w;
}

std::vector<double> softmax(const std::vector<double>& x) {
  if (x.empty()) throw Error(ErrorCode::EmptyInput, "softmax of an empty vector");
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : x) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteInput, "softmax input is not finite");
    mx = std::max(mx, v);
  }
  std::vector<double> y(x.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = std::exp(x[i] - mx);
    sum += y[i];
  }
  for (double& v : y) v /= sum;
  return y;
}

int argmax(const std::vector<double>& values) {
  int best = -1;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (best < 0 || values[i] > values[static_cast<std::size_t>(best)]) {
      best = static_cast<int>(i);
    }
  }
  return best;
}

std::vector<double> attention_logits(const AggregatorWeights& weights,
                                     const EmbeddingMatrix& h) {
  if (h.dim != weights.dim) {
    throw Error(ErrorCode::DimMismatch,
                "embeddings have dim " + std::to_string(h.dim) +
                    ", aggregator expects " + std::to_string(weights.dim));
  }
  const auto D = static_cast<std::size_t>(weights.dim);
  const auto L = static_cast<std::size_t>(weights.hidden);
  std::vector<double> e(h.rows);
  for (std::size_t k = 0; k < h.rows; ++k) {
    const auto hk = h.row(k);
    double score = 0.0;
    for (std::size_t l = 0; l < L; ++l) {
      double proj = 0.0;
      for (std::size_t d = 0; d < D; ++d) proj += double(weights.V[l * D + d]) * hk[d];
      double unit = std::tanh(proj);
      if (weights.attention == AttentionKind::Gated) {
        double gate = 0.0;
        for (std::size_t d = 0; d < D; ++d) gate += double(weights.U[l * D + d]) * hk[d];
        unit *= 1.0 / (1.0 + std::exp(-gate));
      }
      score += double(weights.w[l]) * unit;
    }
    e[k] = score;
  }
  return e;
}

std::vector<double> attention_scores(const AggregatorWeights& weights,
                                     const EmbeddingMatrix& h) {
  if (h.rows == 0) throw Error(ErrorCode::EmptyBag, "attention over an empty bag");
  return softmax(attention_logits(weights, h));
}

InferenceResult forward(const AggregatorWeights& weights,
                        const EmbeddingMatrix& h) {
  if (h.rows == 0) throw Error(ErrorCode::EmptyBag, "cannot aggregate an empty bag");
  InferenceResult r;
  r.attention = attention_scores(weights, h);
  r.class_names = weights.class_names;

  const auto D = static_cast<std::size_t>(weights.dim);
  std::vector<double> z(D, 0.0);
  for (std::size_t k = 0; k < h.rows; ++k) {
    const auto hk = h.row(k);
    for (std::size_t d = 0; d < D; ++d) z[d] += r.attention[k] * hk[d];
  }
  r.logits.resize(static_cast<std::size_t>(weights.num_classes));
  for (std::size_t c = 0; c < r.logits.size(); ++c) {
    double acc = weights.b_out[c];
    for (std::size_t d = 0; d < D; ++d) acc += double(weights.W_out[c * D + d]) * z[d];
    r.logits[c] = acc;
  }
  r.probs = softmax(r.logits);
  r.predicted_index = argmax(r.logits);
  return r;
}

}  // namespace slidespin
