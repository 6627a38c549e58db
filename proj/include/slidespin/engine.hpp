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
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "slidespin/aggregator.hpp"
#include "slidespin/encoder.hpp"
#include "slidespin/patching.hpp"
#include "slidespin/tissue.hpp"
#include "slidespin/zoo.hpp"

namespace slidespin {

inline constexpr const char* kIndeterminate = "indeterminate";

/// Simple polygon in level-0 pixel coordinates, stored as an open ring.
class Polygon {
 public:
  /// Accepts closed or open rings. Throws InvalidPolygon for fewer than 3
  /// distinct vertices, non-finite coordinates or self-intersections.
  explicit Polygon(std::vector<std::pair<double, double>> ring);

  /// Even-odd rule.
  bool contains(double x, double y) const;
  const std::vector<std::pair<double, double>>& vertices() const { return ring_; }

 private:
  std::vector<std::pair<double, double>> ring_;
};

/// Reads the exterior ring of a GeoJSON Polygon geometry or of a Feature
/// wrapping one. Holes and other geometry types are rejected.
Polygon polygon_from_geojson(const nlohmann::json& doc);

/// Keeps the patches whose center lies inside `region`.
PatchPlan restrict_to_region(const PatchPlan& plan, const Polygon& region);

struct RunOptions {
  std::optional<int> patch_size;
  std::optional<double> tissue_threshold;
  std::optional<std::int64_t> stride;
  std::size_t batch_size = 32;
  int threads = 1;
  int thumbnail_max_dim = 2048;
  std::optional<Polygon> region;
  std::filesystem::path cache_dir;  // empty = default_cache_dir()
};

/// Stage order used in durations_ms; "total" spans all of them.
inline const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names = {
      "resolve", "open", "tissue", "plan", "embed", "aggregate"};
  return names;
}

struct RunReport {
  std::string slide_path;
  std::string model_name;
  InferenceResult result;
  std::string predicted_class;
  std::size_t n_patches = 0;
  std::map<std::string, double> durations_ms;
  PatchSpec patch;
  EncoderSpec encoder;
  PatchGeometry geometry;
  std::int64_t stride = 0;
  int tissue_threshold_used = 0;
  std::size_t batch_size = 0;
  int threads = 0;
  bool region_restricted = false;
  bool indeterminate = false;
  std::vector<std::string> warnings;
  std::string timestamp;  // UTC, ISO 8601; metadata only

  nlohmann::json to_json() const;
};

struct InferenceRun {
  RunReport report;
  PatchPlan plan;
  TissueMask mask;
};

/// resolve bundle -> open slide -> detect tissue -> plan -> embed ->
/// aggregate. A plan without patches yields an indeterminate report rather
/// than an error. Failures are rethrown tagged with the stage name.
InferenceRun run_inference(const std::filesystem::path& wsi,
                           const ModelRef& model, const RunOptions& options);

/// Same, for an already opened slide and loaded bundle; the "resolve"
/// stage then only loads the encoder.
InferenceRun run_inference(const SlidePyramid& slide, const ModelBundle& bundle,
                           const RunOptions& options);

/// FeatureCollection with one square polygon per patch, level-0 pixel
/// coordinates. Throws LengthMismatch when plan and attention disagree.
nlohmann::json export_geojson(const PatchPlan& plan, const InferenceResult& result,
                              const RunReport& report);

/// Process exit code for a failed run: 1 for input problems (resolve and
/// open stages, bad arguments), 2 for everything else.
int exit_code_for(const Error& error);

}  // namespace slidespin
