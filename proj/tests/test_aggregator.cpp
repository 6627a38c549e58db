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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "slidespin/aggregator.hpp"
#include "slidespin/error.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace slidespin;
using nlohmann::json;

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

json minimal_doc() {
  return {{"dims", {{"D", 2}, {"L", 2}, {"C", 2}}},
          {"attention", "tanh"},
          {"V", {{1.0, 0.0}, {0.0, 1.0}}},
          {"w", {1.0, -1.0}},
          {"W_out", {{1.0, 2.0}, {-1.0, 0.5}}},
          {"b_out", {0.0, 0.1}},
          {"class_names", {"a", "b"}}};
}

EmbeddingMatrix bag(int dim, std::vector<float> values) {
  EmbeddingMatrix m;
  m.dim = dim;
  m.rows = values.size() / static_cast<std::size_t>(dim);
  m.values = std::move(values);
  return m;
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

TEST_CASE("load_aggregator") {
  const AggregatorWeights w = load_aggregator(minimal_doc());
  CHECK(w.dim == 2);
  CHECK(w.hidden == 2);
  CHECK(w.num_classes == 2);
  CHECK(w.attention == AttentionKind::Tanh);
  CHECK(w.W_out == std::vector<float>{1.0f, 2.0f, -1.0f, 0.5f});

  SUBCASE("w of the wrong length") {
    json d = minimal_doc();
    d["w"] = {1.0, 2.0, 3.0};
    const Error e = error_of([&] { load_aggregator(d); });
    CHECK(e.code() == ErrorCode::ShapeMismatch);
    CHECK(e.message().find("'w'") != std::string::npos);
  }
  SUBCASE("NaN bias") {
    json d = minimal_doc();
    d["b_out"] = {0.0, "NaN"};
    CHECK(error_of([&] { load_aggregator(d); }).code() == ErrorCode::NonFiniteWeight);
  }
  SUBCASE("infinite weight") {
    json d = minimal_doc();
    d["V"][1][0] = "-Infinity";
    CHECK(error_of([&] { load_aggregator(d); }).code() == ErrorCode::NonFiniteWeight);
  }
  SUBCASE("missing tensor") {
    json d = minimal_doc();
    d.erase("W_out");
    CHECK(error_of([&] { load_aggregator(d); }).code() == ErrorCode::MissingTensor);
  }
  SUBCASE("ragged matrix") {
    json d = minimal_doc();
    d["V"][1] = {1.0};
    CHECK(error_of([&] { load_aggregator(d); }).code() == ErrorCode::ShapeMismatch);
  }
  SUBCASE("single class") {
    json d = minimal_doc();
    d["dims"]["C"] = 1;
    CHECK(error_of([&] { load_aggregator(d); }).code() == ErrorCode::ShapeMismatch);
  }
  SUBCASE("class_names length") {
    json d = minimal_doc();
    d["class_names"] = {"a", "b", "c"};
    CHECK(error_of([&] { load_aggregator(d); }).code() == ErrorCode::ShapeMismatch);
  }
  SUBCASE("gated needs U") {
    json d = minimal_doc();
    d["attention"] = "gated";
    CHECK(error_of([&] { load_aggregator(d); }).code() == ErrorCode::MissingTensor);
    d["U"] = {{0.5, 0.5}, {0.5, -0.5}};
    CHECK(load_aggregator(d).attention == AttentionKind::Gated);
  }
  SUBCASE("text value") {
    json d = minimal_doc();
    d["w"] = {1.0, "heavy"};
    CHECK(error_of([&] { load_aggregator(d); }).code() == ErrorCode::ParseError);
  }
}

TEST_CASE("softmax") {
  CHECK(softmax({0, 0}) == std::vector<double>{0.5, 0.5});
  const auto big = softmax({1000, 0});
  CHECK(big[0] == doctest::Approx(1.0));
  CHECK(big[1] >= 0.0);
  CHECK(big[1] < 1e-300);
  const auto s = softmax({1, 2, 3});
  CHECK(s[0] == doctest::Approx(0.09003).epsilon(1e-4));
  CHECK(s[1] == doctest::Approx(0.24473).epsilon(1e-4));
  CHECK(s[2] == doctest::Approx(0.66524).epsilon(1e-4));
  CHECK(std::abs(sum(s) - 1.0) <= 1e-9);
  CHECK(error_of([] { softmax({1.0, NAN}); }).code() == ErrorCode::NonFiniteInput);
  CHECK(error_of([] { softmax({}); }).code() == ErrorCode::EmptyInput);
}

TEST_CASE("argmax ties go to the smallest index") {
  CHECK(argmax({1, 3, 3, 2}) == 1);
  CHECK(argmax({5, 5}) == 0);
  CHECK(argmax({-1, -0.5}) == 1);
}

TEST_CASE("attention examples") {
  const AggregatorWeights w = load_aggregator(minimal_doc());
  CHECK(attention_scores(w, bag(2, {0.3f, -0.7f})) == std::vector<double>{1.0});
  const auto same = attention_scores(w, bag(2, {0.3f, -0.7f, 0.3f, -0.7f}));
  CHECK(same[0] == 0.5);
  CHECK(same[1] == 0.5);

  json d = {{"dims", {{"D", 1}, {"L", 1}, {"C", 2}}}, {"V", {{1.0}}}, {"w", {1.0}},
            {"W_out", {{0.0}, {0.0}}}, {"b_out", {0.0, 0.0}}, {"class_names", {"x", "y"}}};
  const AggregatorWeights one = load_aggregator(d);
  const auto a = attention_scores(one, bag(1, {0.0f, 10.0f}));
  CHECK(a[0] == doctest::Approx(0.2689).epsilon(1e-3));
  CHECK(a[1] == doctest::Approx(0.7311).epsilon(1e-3));
  // W_out = 0 and b_out = 0 give uniform probabilities.
  const InferenceResult r = forward(one, bag(1, {0.0f, 10.0f, -3.0f}));
  CHECK(r.probs == std::vector<double>{0.5, 0.5});
  CHECK(r.predicted_index == 0);

  CHECK(error_of([&] { attention_scores(w, bag(2, {})); }).code() == ErrorCode::EmptyBag);
  CHECK(error_of([&] { forward(w, bag(2, {})); }).code() == ErrorCode::EmptyBag);
  CHECK(error_of([&] { forward(w, bag(3, {1, 2, 3})); }).code() == ErrorCode::DimMismatch);
}

TEST_CASE("single instance collapses attention") {
  const AggregatorWeights w = load_aggregator(minimal_doc());
  const InferenceResult r = forward(w, bag(2, {0.25f, -2.0f}));
  CHECK(r.attention == std::vector<double>{1.0});
  CHECK(r.logits[0] == doctest::Approx(1.0 * 0.25 + 2.0 * -2.0));
  CHECK(r.logits[1] == doctest::Approx(-1.0 * 0.25 + 0.5 * -2.0 + 0.1f));
  CHECK(r.class_names == std::vector<std::string>{"a", "b"});
  CHECK(r.predicted_index == 1);
}

TEST_CASE("forward matches the naive evaluator") {
  std::mt19937 rng(77);
  for (int i = 0; i < 100; ++i) {
    const auto inst = oracle::random_mil(rng, i % 4 == 3);
    const InferenceResult r = forward(inst.weights, inst.bag);
    const auto ref = oracle::mil_forward(inst.weights, inst.bag);
    REQUIRE(r.attention.size() == inst.bag.rows);
    for (std::size_t k = 0; k < ref.attention.size(); ++k) {
      CHECK(std::abs(r.attention[k] - static_cast<double>(ref.attention[k])) <= 1e-9);
    }
    for (std::size_t c = 0; c < ref.logits.size(); ++c) {
      CHECK(std::abs(r.logits[c] - static_cast<double>(ref.logits[c])) <= 1e-6);
    }
    CHECK(std::abs(sum(r.attention) - 1.0) <= 1e-6);
    CHECK(std::abs(sum(r.probs) - 1.0) <= 1e-6);
    for (double p : r.probs) {
      CHECK(p > 0.0);
      CHECK(p < 1.0);
    }
    CHECK(r.predicted_index == argmax(r.logits));
  }
}

TEST_CASE("permutation invariance") {
  std::mt19937 rng(31);
  for (int i = 0; i < 30; ++i) {
    const auto inst = oracle::random_mil(rng);
    const std::size_t n = inst.bag.rows;
    const auto D = static_cast<std::size_t>(inst.bag.dim);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    EmbeddingMatrix shuffled = inst.bag;
    for (std::size_t k = 0; k < n; ++k) {
      std::copy_n(inst.bag.values.begin() + static_cast<std::ptrdiff_t>(perm[k] * D), D,
                  shuffled.values.begin() + static_cast<std::ptrdiff_t>(k * D));
    }
    const InferenceResult a = forward(inst.weights, inst.bag);
    const InferenceResult b = forward(inst.weights, shuffled);
    for (std::size_t k = 0; k < n; ++k) {
      CHECK(std::abs(b.attention[k] - a.attention[perm[k]]) <= 1e-12);
    }
    for (std::size_t c = 0; c < a.logits.size(); ++c) {
      CHECK(std::abs(a.logits[c] - b.logits[c]) <= 1e-6);
    }
  }
}

TEST_CASE("attention is shift invariant") {
  std::mt19937 rng(9);
  for (int i = 0; i < 50; ++i) {
    const auto inst = oracle::random_mil(rng);
    const auto e = attention_logits(inst.weights, inst.bag);
    const double c = (testing::unit(rng) - 0.5) * 200.0;
    std::vector<double> shifted = e;
    for (double& v : shifted) v += c;
    const auto a = softmax(e);
    const auto b = softmax(shifted);
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(std::abs(a[k] - b[k]) <= 1e-9);
    CHECK(attention_scores(inst.weights, inst.bag) == a);
  }
}
