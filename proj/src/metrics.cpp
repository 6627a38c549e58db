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

#include "slidespin/metrics.hpp"

#include "slidespin/error.hpp"

namespace slidespin {

Metrics metrics_from_counts(std::size_t tp, std::size_t tn, std::size_t fp,
                            std::size_t fn) {
  Metrics m;
  m.tp = tp;
  m.tn = tn;
  m.fp = fp;
  m.fn = fn;
  auto ratio = [](std::size_t num, std::size_t den, bool& defined) {
    defined = den != 0;
    return defined ? static_cast<double>(num) / static_cast<double>(den) : 0.0;
  };
  m.sensitivity = ratio(tp, tp + fn, m.sensitivity_defined);
  m.specificity = ratio(tn, tn + fp, m.specificity_defined);
  m.precision = ratio(tp, tp + fp, m.precision_defined);
  m.balanced_accuracy = (m.sensitivity + m.specificity) / 2.0;
  return m;
}

Metrics compute_metrics(const std::vector<int>& predicted,
                        const std::vector<int>& truth, int positive_index) {
  if (predicted.empty() && truth.empty()) {
    throw Error(ErrorCode::EmptyInput, "no labels to score");
  }
  if (predicted.size() != truth.size()) {
    throw Error(ErrorCode::LengthMismatch,
                std::to_string(predicted.size()) + " predictions vs " +
                    std::to_string(truth.size()) + " ground-truth labels");
  }
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool p = predicted[i] == positive_index;
    const bool t = truth[i] == positive_index;
    if (p && t) ++tp;
    else if (!p && !t) ++tn;
    else if (p) ++fp;
    else ++fn;
  }
  return metrics_from_counts(tp, tn, fp, fn);
}

nlohmann::json Metrics::to_json() const {
  nlohmann::json undefined = nlohmann::json::array();
  if (!sensitivity_defined) undefined.push_back("sensitivity");
  if (!specificity_defined) undefined.push_back("specificity");
  if (!precision_defined) undefined.push_back("precision");
  return {{"tp", tp},
          {"tn", tn},
          {"fp", fp},
          {"fn", fn},
          {"sensitivity", sensitivity},
          {"specificity", specificity},
          {"precision", precision},
          {"balanced_accuracy", balanced_accuracy},
          {"undefined", undefined}};
}

}  // namespace slidespin
