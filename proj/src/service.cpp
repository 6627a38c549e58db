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

#include "slidespin/service.hpp"

#include <httplib.h>

#include <iostream>

#include "slidespin/error.hpp"
#include "slidespin/png.hpp"
#include "slidespin/zoo.hpp"

namespace slidespin {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json; charset=utf-8");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

bool looks_like_slide(const fs::path& p) {
  if (fs::is_directory(p)) return fs::exists(p / "pyramid.json");
  const std::string ext = p.extension().string();
  return ext == ".tif" || ext == ".tiff" || ext == ".svs";
}

}  // namespace

json slide_to_json(const std::string& id, const SlidePyramid& slide) {
  json levels = json::array();
  for (const LevelInfo& l : slide.levels()) {
    levels.push_back({{"index", l.index},
                      {"width", l.width},
                      {"height", l.height},
                      {"downsample", l.downsample}});
  }
  return {{"id", id},
          {"width", slide.width()},
          {"height", slide.height()},
          {"mpp_x", slide.mpp_x() ? json(*slide.mpp_x()) : json(nullptr)},
          {"mpp_y", slide.mpp_y() ? json(*slide.mpp_y()) : json(nullptr)},
          {"tile_size", kTileSize},
          {"levels", levels}};
}

Service::Service(ServiceConfig config)
    : config_(std::move(config)), server_(std::make_unique<httplib::Server>()) {
  discover();
  install_routes();
}

Service::~Service() { stop(); }

void Service::discover() {
  if (!fs::is_directory(config_.slides_dir)) {
    throw Error(ErrorCode::NotFound, "slide directory not found: " + config_.slides_dir.string());
  }
  if (!fs::is_directory(config_.models_dir)) {
    throw Error(ErrorCode::NotFound, "model directory not found: " + config_.models_dir.string());
  }
  for (const auto& entry : fs::directory_iterator(config_.slides_dir)) {
    if (!looks_like_slide(entry.path())) continue;
    try {
      slides_.emplace(entry.path().filename().string(), open_slide(entry.path()));
    } catch (const Error& e) {
      std::cerr << "skipping slide " << entry.path() << ": " << e.what() << "\n";
    }
  }
  auto add_model = [this](const fs::path& dir) {
    const VerifyReport report = verify_bundle(dir);
    if (!report.manifest) {
      std::cerr << "skipping bundle " << dir << ": unreadable manifest\n";
      return;
    }
    const std::string& name = report.manifest->model_name;
    models_[name] = dir;
    model_info_[name] = {{"name", name},
                         {"description", report.manifest->description},
                         {"encoder", report.manifest->encoder.encoder_id},
                         {"class_names", report.manifest->class_names},
                         {"verified", report.ok()}};
  };
  if (fs::exists(config_.models_dir / "manifest.json")) add_model(config_.models_dir);
  for (const auto& entry : fs::directory_iterator(config_.models_dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / "manifest.json")) {
      add_model(entry.path());
    }
  }
}

json Service::slides_json() const {
  json out = json::array();
  for (const auto& [id, slide] : slides_) out.push_back(slide_to_json(id, slide));
  return out;
}

json Service::models_json() const {
  json out = json::array();
  for (const auto& [name, info] : model_info_) out.push_back(info);
  return out;
}

void Service::install_routes() {
  httplib::Server& srv = *server_;

  srv.Get("/api/slides", [this](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, slides_json());
  });

  srv.Get(R"(/api/slides/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    const auto it = slides_.find(req.matches[1].str());
    if (it == slides_.end()) return send_error(res, 404, "unknown slide");
    send_json(res, 200, slide_to_json(it->first, it->second));
  });

  srv.Get(R"(/api/slides/([^/]+)/tiles/(\d+)/(\d+)/(\d+))",
          [this](const httplib::Request& req, httplib::Response& res) {
            const auto it = slides_.find(req.matches[1].str());
            if (it == slides_.end()) return send_error(res, 404, "unknown slide");
            const SlidePyramid& slide = it->second;
            std::int64_t level = 0, tx = 0, ty = 0;
            try {
              level = std::stoll(req.matches[2].str());
              tx = std::stoll(req.matches[3].str());
              ty = std::stoll(req.matches[4].str());
            } catch (const std::exception&) {
              return send_error(res, 404, "tile out of range");
            }
            if (level >= slide.level_count()) return send_error(res, 404, "unknown level");
            const LevelInfo& info = slide.level(static_cast<int>(level));
            const std::int64_t nx = (info.width + kTileSize - 1) / kTileSize;
            const std::int64_t ny = (info.height + kTileSize - 1) / kTileSize;
            if (tx >= nx || ty >= ny) return send_error(res, 404, "tile out of range");
            try {
              const RasterPatch tile = slide.read_level_region(
                  static_cast<int>(level), tx * kTileSize, ty * kTileSize, kTileSize, kTileSize);
              const auto png = encode_png(tile);
              res.set_content(std::string(png.begin(), png.end()), "image/png");
            } catch (const Error& e) {
              send_error(res, 500, e.what());
            }
          });

  srv.Get("/api/models", [this](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, models_json());
  });

  srv.Post("/api/infer", [this](const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception& e) {
      return send_error(res, 400, std::string("invalid JSON: ") + e.what());
    }
    if (!body.is_object() || !body.contains("slide_id") || !body["slide_id"].is_string() ||
        !body.contains("model_name") || !body["model_name"].is_string()) {
      return send_error(res, 400, "body needs string fields slide_id and model_name");
    }
    const std::string slide_id = body["slide_id"];
    const std::string model_name = body["model_name"];
    if (!slides_.count(slide_id)) return send_error(res, 404, "unknown slide");
    if (!models_.count(model_name)) return send_error(res, 404, "unknown model");

    std::optional<Polygon> region;
    if (body.contains("region") && !body["region"].is_null()) {
      try {
        region = polygon_from_geojson(body["region"]);
      } catch (const Error& e) {
        return send_error(res, 422, e.message());
      }
    }

    std::shared_ptr<Job> job;
    {
      std::lock_guard lock(jobs_mutex_);
      for (const auto& [id, other] : jobs_) {
        if (other->slide_id == slide_id &&
            (other->status == "queued" || other->status == "running")) {
          return send_json(res, 409, {{"error", "a job is already running for this slide"},
                                      {"job_id", id}});
        }
      }
      job = std::make_shared<Job>();
      job->id = "job-" + std::to_string(next_job_++);
      job->slide_id = slide_id;
      job->model_name = model_name;
      jobs_[job->id] = job;
      workers_.emplace_back([this, job, region] { run_job(job, region); });
    }
    send_json(res, 202, {{"job_id", job->id}});
  });

  srv.Get(R"(/api/jobs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(jobs_mutex_);
    const auto it = jobs_.find(req.matches[1].str());
    if (it == jobs_.end()) return send_error(res, 404, "unknown job");
    const Job& job = *it->second;
    json out = {{"job_id", job.id},
                {"slide_id", job.slide_id},
                {"model_name", job.model_name},
                {"status", job.status}};
    if (job.status == "done") {
      out["report"] = job.report;
      out["geojson"] = job.geojson;
    } else if (job.status == "error") {
      out["error"] = job.error;
      out["stage"] = job.stage;
    }
    send_json(res, 200, out);
  });

  if (!config_.ui_dir.empty() && fs::is_directory(config_.ui_dir)) {
    srv.set_mount_point("/", config_.ui_dir.string());
  }
}

void Service::run_job(std::shared_ptr<Job> job, std::optional<Polygon> region) {
  {
    std::lock_guard lock(jobs_mutex_);
    job->status = "running";
  }
  json report;
  json geojson;
  std::string error;
  std::string stage;
  try {
    ModelBundle bundle;
    try {
      bundle = load_bundle(models_.at(job->model_name));
    } catch (const Error& e) {
      throw e.with_stage("resolve");
    }
    RunOptions options = config_.run_options;
    options.region = std::move(region);
    const InferenceRun run = run_inference(slides_.at(job->slide_id), bundle, options);
    report = run.report.to_json();
    geojson = export_geojson(run.plan, run.report.result, run.report);
  } catch (const Error& e) {
    error = e.what();
    stage = e.stage();
  } catch (const std::exception& e) {
    error = e.what();
  }
  std::lock_guard lock(jobs_mutex_);
  if (error.empty()) {
    job->report = std::move(report);
    job->geojson = std::move(geojson);
    job->status = "done";
  } else {
    job->error = std::move(error);
    job->stage = std::move(stage);
    job->status = "error";
  }
}

int Service::start(const std::string& host, int port) {
  const int bound = port == 0 ? server_->bind_to_any_port(host)
                              : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) {
    throw Error(ErrorCode::InvalidArgument, "cannot bind " + host + ":" + std::to_string(port));
  }
  server_thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void Service::listen(const std::string& host, int port) {
  if (!server_->listen(host, port)) {
    throw Error(ErrorCode::InvalidArgument, "cannot listen on " + host + ":" + std::to_string(port));
  }
}

void Service::stop() {
  if (server_->is_running()) server_->stop();
  if (server_thread_.joinable()) server_thread_.join();
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(jobs_mutex_);
    workers.swap(workers_);
  }
  for (auto& w : workers) {
    if (w.joinable()) w.join();
  }
}

}  // namespace slidespin
