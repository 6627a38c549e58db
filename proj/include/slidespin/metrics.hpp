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

#include <cstddef>
#include <vector>

#include <nlohmann/json.hpp>

namespace slidespin {

/// Binary confusion counts and the rates derived from them. A rate whose
/// denominator is zero is reported as 0 and flagged as undefined.
struct Metrics {
  std::size_t tp = 0;
  std::size_t tn = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double precision = 0.0;
  double balanced_accuracy = 0.0;
  bool sensitivity_defined = true;
  bool specificity_defined = true;
  bool precision_defined = true;

  nlohmann::json to_json() const;
};

/// Labels equal to positive_index are positive, everything else negative.
/// Throws EmptyInput / LengthMismatch.
Metrics compute_metrics(const std::vector<int>& predicted,
                        const std::vector<int>& truth, int positive_index);

Metrics metrics_from_counts(std::size_t tp, std::size_t tn, std::size_t fp,
                            std::size_t fn);

}  // namespace slidespin
