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

#include "slidespin/engine.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <functional>

#include "slidespin/error.hpp"

namespace slidespin {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- polygon ---------------------------------------------------------------

namespace {

using Point = std::pair<double, double>;

double cross(const Point& o, const Point& a, const Point& b) {
  return (a.first - o.first) * (b.second - o.second) -
         (a.second - o.second) * (b.first - o.first);
}

int orientation(const Point& a, const Point& b, const Point& c) {
  const double v = cross(a, b, c);
  return v > 0 ? 1 : (v < 0 ? -1 : 0);
}

bool within_box(const Point& a, const Point& b, const Point& p) {
  return std::min(a.first, b.first) <= p.first && p.first <= std::max(a.first, b.first) &&
         std::min(a.second, b.second) <= p.second && p.second <= std::max(a.second, b.second);
}

bool segments_touch(const Point& p1, const Point& p2, const Point& q1, const Point& q2) {
  const int o1 = orientation(p1, p2, q1);
  const int o2 = orientation(p1, p2, q2);
  const int o3 = orientation(q1, q2, p1);
  const int o4 = orientation(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && within_box(p1, p2, q1)) return true;
  if (o2 == 0 && within_box(p1, p2, q2)) return true;
  if (o3 == 0 && within_box(q1, q2, p1)) return true;
  if (o4 == 0 && within_box(q1, q2, p2)) return true;
  return false;
}

[[noreturn]] void invalid(const std::string& why) {
  throw Error(ErrorCode::InvalidPolygon, why);
}

}  // namespace

Polygon::Polygon(std::vector<Point> ring) {
  for (const auto& p : ring) {
    if (!std::isfinite(p.first) || !std::isfinite(p.second)) invalid("non-finite vertex");
    if (ring_.empty() || ring_.back() != p) ring_.push_back(p);
  }
  if (ring_.size() > 1 && ring_.front() == ring_.back()) ring_.pop_back();
  if (ring_.size() < 3) invalid("polygon needs at least 3 distinct vertices");

  const std::size_t n = ring_.size();
  bool degenerate = true;
  for (std::size_t i = 2; i < n && degenerate; ++i) {
    degenerate = orientation(ring_[0], ring_[1], ring_[i]) == 0;
  }
  if (degenerate) invalid("polygon has zero area");

  for (std::size_t i = 0; i < n; ++i) {
    const Point& a1 = ring_[i];
    const Point& a2 = ring_[(i + 1) % n];
    for (std::size_t j = i + 1; j < n; ++j) {
      const Point& b1 = ring_[j];
      const Point& b2 = ring_[(j + 1) % n];
      const bool next = j == i + 1;
      const bool wrap = i == 0 && j == n - 1;
      if (next || wrap) {
        // Adjacent edges share one vertex; they may only meet there.
        const Point& shared = next ? a2 : a1;
        const Point& a_far = next ? a1 : a2;
        const Point& b_far = next ? b2 : b1;
        if (orientation(a_far, shared, b_far) == 0 &&
            (within_box(shared, b_far, a_far) || within_box(a_far, shared, b_far))) {
          invalid("polygon folds back on itself at vertex (" +
                  std::to_string(shared.first) + ", " + std::to_string(shared.second) + ")");
        }
        continue;
      }
      if (segments_touch(a1, a2, b1, b2)) {
        invalid("polygon edges " + std::to_string(i) + " and " + std::to_string(j) +
                " intersect");
      }
    }
  }
}

bool Polygon::contains(double x, double y) const {
  bool inside = false;
  const std::size_t n = ring_.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const auto [xi, yi] = ring_[i];
    const auto [xj, yj] = ring_[j];
    if ((yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi) {
      inside = !inside;
    }
  }
  return inside;
}

Polygon polygon_from_geojson(const json& doc) {
  const json* geom = &doc;
  if (doc.is_object() && doc.value("type", "") == "Feature") {
    if (!doc.contains("geometry")) invalid("Feature without geometry");
    geom = &doc["geometry"];
  }
  if (!geom->is_object() || geom->value("type", "") != "Polygon") {
    invalid("region must be a GeoJSON Polygon");
  }
  if (!geom->contains("coordinates") || !(*geom)["coordinates"].is_array()) {
    invalid("Polygon without coordinates");
  }
  const json& rings = (*geom)["coordinates"];
  if (rings.size() != 1) invalid("region must have exactly one ring (no holes)");
  std::vector<Point> ring;
  for (const auto& pt : rings[0]) {
    if (!pt.is_array() || pt.size() < 2 || !pt[0].is_number() || !pt[1].is_number()) {
      invalid("vertices must be [x, y] number pairs");
    }
    ring.emplace_back(pt[0].get<double>(), pt[1].get<double>());
  }
  return Polygon(std::move(ring));
}

PatchPlan restrict_to_region(const PatchPlan& plan, const Polygon& region) {
  PatchPlan out = plan;
  out.patches.clear();
  for (const PlannedPatch& p : plan.patches) {
    const double cx = static_cast<double>(p.x) + static_cast<double>(p.side) / 2.0;
    const double cy = static_cast<double>(p.y) + static_cast<double>(p.side) / 2.0;
    if (region.contains(cx, cy)) out.patches.push_back(p);
  }
  return out;
}

// ---- report ----------------------------------------------------------------

json RunReport::to_json() const {
  json durations = json::object();
  for (const auto& [k, v] : durations_ms) durations[k] = v;
  json patch_json = {{"patch_size_px", patch.patch_size_px},
                     {"spacing_mpp", patch.spacing_mpp ? json(*patch.spacing_mpp) : json(nullptr)},
                     {"tissue_threshold", patch.tissue_threshold},
                     {"stride_px", stride}};
  return {
      {"slide_path", slide_path},
      {"model_name", model_name},
      {"timestamp", timestamp},
      {"n_patches", n_patches},
      {"predicted_class", predicted_class},
      {"indeterminate", indeterminate},
      {"warnings", warnings},
      {"result",
       {{"class_names", result.class_names},
        {"logits", result.logits},
        {"probs", result.probs},
        {"predicted_index", result.predicted_index},
        {"attention", result.attention}}},
      {"durations_ms", durations},
      {"parameters",
       {{"patch", patch_json},
        {"encoder",
         {{"id", encoder.encoder_id},
          {"embed_dim", encoder.embed_dim},
          {"input_size", encoder.input_size},
          {"norm_mean", encoder.norm_mean},
          {"norm_std", encoder.norm_std}}},
        {"read_level", geometry.read_level},
        {"level0_side", geometry.level0_side},
        {"read_side", geometry.read_side},
        {"resize_needed", geometry.resize_needed},
        {"tissue_threshold_used", tissue_threshold_used},
        {"region_restricted", region_restricted},
        {"batch_size", batch_size},
        {"threads", threads}}},
  };
}

// ---- pipeline --------------------------------------------------------------

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Consecutive laps on one monotonic clock: every instant between the first
// and last mark belongs to exactly one stage.
class StageClock {
 public:
  StageClock() : last_(Clock::now()), start_(last_) {}

  template <typename Fn>
  auto run(const std::string& stage, Fn&& fn) {
    try {
      if constexpr (std::is_void_v<decltype(fn())>) {
        fn();
        lap(stage);
      } else {
        auto value = fn();
        lap(stage);
        return value;
      }
    } catch (const Error& e) {
      throw e.stage().empty() ? e.with_stage(stage) : e;
    } catch (const std::exception& e) {
      throw Error(ErrorCode::ReadFailure, e.what()).with_stage(stage);
    }
  }

  std::map<std::string, double> durations() const {
    auto out = laps_;
    out["total"] = ms(last_ - start_);
    return out;
  }

 private:
  using Clock = std::chrono::steady_clock;
  static double ms(Clock::duration d) {
    return std::chrono::duration<double, std::milli>(d).count();
  }
  void lap(const std::string& stage) {
    const auto now = Clock::now();
    laps_[stage] = ms(now - last_);
    last_ = now;
  }

  Clock::time_point last_;
  Clock::time_point start_;
  std::map<std::string, double> laps_;
};

PatchSpec effective_patch_spec(const ModelManifest& m, const RunOptions& o) {
  PatchSpec spec = m.patch;
  if (o.patch_size) spec.patch_size_px = *o.patch_size;
  if (o.tissue_threshold) spec.tissue_threshold = *o.tissue_threshold;
  if (o.stride) spec.stride_px = *o.stride;
  spec.validate();
  return spec;
}

InferenceRun run_pipeline(const std::function<ModelBundle()>& resolve,
                          const std::function<SlidePyramid()>& open,
                          const RunOptions& options) {
  StageClock clock;
  InferenceRun run;
  RunReport& report = run.report;
  report.timestamp = utc_timestamp();
  report.batch_size = options.batch_size;
  report.threads = options.threads;

  struct Resolved {
    ModelBundle bundle;
    PatchSpec patch;
    std::shared_ptr<const Encoder> encoder;
  };
  const Resolved model = clock.run("resolve", [&] {
    Resolved r{resolve(), {}, nullptr};
    r.patch = effective_patch_spec(r.bundle.manifest, options);
    EncoderSpec enc = r.bundle.manifest.encoder;
    enc.input_size = r.patch.patch_size_px;
    r.encoder = load_encoder(enc, r.bundle.dir);
    return r;
  });
  report.model_name = model.bundle.manifest.model_name;
  report.patch = model.patch;
  report.encoder = model.encoder->spec();

  const SlidePyramid slide = clock.run("open", open);
  report.slide_path = slide.path().string();

  run.mask = clock.run("tissue", [&] { return detect_tissue(slide, options.thumbnail_max_dim); });
  report.tissue_threshold_used = run.mask.threshold_used;

  run.plan = clock.run("plan", [&] {
    PatchPlan plan = plan_patches(slide, run.mask, model.patch);
    if (options.region) plan = restrict_to_region(plan, *options.region);
    return plan;
  });
  report.geometry = run.plan.geometry;
  report.stride = run.plan.stride;
  report.region_restricted = options.region.has_value();
  report.n_patches = run.plan.size();

  const EmbeddingMatrix embeddings = clock.run("embed", [&] {
    return embed_batch(*model.encoder, run.plan, slide,
                       {options.batch_size, options.threads});
  });

  report.result = clock.run("aggregate", [&] {
    if (embeddings.rows == 0) {
      InferenceResult r;
      const auto c = static_cast<std::size_t>(model.bundle.aggregator.num_classes);
      r.class_names = model.bundle.aggregator.class_names;
      r.logits.assign(c, 0.0);
      r.probs.assign(c, 1.0 / static_cast<double>(c));
      r.predicted_index = -1;
      return r;
    }
    return forward(model.bundle.aggregator, embeddings);
  });
  report.durations_ms = clock.durations();

  if (report.result.predicted_index < 0) {
    report.indeterminate = true;
    report.predicted_class = kIndeterminate;
    report.warnings.push_back(
        "EmptyPlan: no patch reached the tissue threshold; result is indeterminate");
  } else {
    report.predicted_class =
        report.result.class_names[static_cast<std::size_t>(report.result.predicted_index)];
  }
  return run;
}

}  // namespace

InferenceRun run_inference(const fs::path& wsi, const ModelRef& model,
                           const RunOptions& options) {
  const fs::path cache = options.cache_dir.empty() ? default_cache_dir() : options.cache_dir;
  return run_pipeline([&] { return load_bundle(resolve_model(model, cache)); },
                      [&] { return open_slide(wsi); }, options);
}

InferenceRun run_inference(const SlidePyramid& slide, const ModelBundle& bundle,
                           const RunOptions& options) {
  return run_pipeline([&] { return bundle; }, [&] { return slide; }, options);
}

json export_geojson(const PatchPlan& plan, const InferenceResult& result,
                    const RunReport& report) {
  if (plan.size() != result.attention.size()) {
    throw Error(ErrorCode::LengthMismatch,
                std::to_string(plan.size()) + " patches but " +
                    std::to_string(result.attention.size()) + " attention scores");
  }
  json features = json::array();
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const PlannedPatch& p = plan.patches[i];
    const std::int64_t x1 = p.x + p.side;
    const std::int64_t y1 = p.y + p.side;
    json ring = json::array({json::array({p.x, p.y}), json::array({x1, p.y}),
                             json::array({x1, y1}), json::array({p.x, y1}),
                             json::array({p.x, p.y})});
    features.push_back({{"type", "Feature"},
                        {"geometry", {{"type", "Polygon"}, {"coordinates", json::array({ring})}}},
                        {"properties",
                         {{"index", i},
                          {"attention", result.attention[i]},
                          {"tissue_fraction", p.tissue_fraction}}}});
  }
  return {{"type", "FeatureCollection"},
          {"properties",
           {{"model_name", report.model_name},
            {"predicted_class", report.predicted_class},
            {"probs", result.probs},
            {"class_names", result.class_names}}},
          {"features", features}};
}

int exit_code_for(const Error& error) {
  if (error.stage() == "resolve" || error.stage() == "open") return 1;
  if (error.stage().empty()) return 1;
  return 2;
}

}  // namespace slidespin
