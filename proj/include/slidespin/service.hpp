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

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "slidespin/engine.hpp"
#include "slidespin/slide.hpp"

namespace httplib {
class Server;
}

namespace slidespin {

struct ServiceConfig {
  std::filesystem::path models_dir;
  std::filesystem::path slides_dir;
  std::filesystem::path ui_dir;  // optional static files mounted at /
  RunOptions run_options;        // region is set per job
};

inline constexpr int kTileSize = 256;

/// Local HTTP service for the viewer. Slides and bundles are discovered once
/// at construction. Each POST /api/infer spawns a job thread; at most one job
/// per slide is queued or running at a time.
class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds and serves on a background thread. Port 0 picks a free port;
  /// the bound port is returned.
  int start(const std::string& host, int port);
  /// Binds and serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();

  nlohmann::json slides_json() const;
  nlohmann::json models_json() const;

 private:
  struct Job {
    std::string id;
    std::string slide_id;
    std::string model_name;
    std::string status = "queued";
    nlohmann::json report;
    nlohmann::json geojson;
    std::string error;
    std::string stage;
  };

  void discover();
  void install_routes();
  void run_job(std::shared_ptr<Job> job, std::optional<Polygon> region);

  ServiceConfig config_;
  std::map<std::string, SlidePyramid> slides_;
  std::map<std::string, std::filesystem::path> models_;  // model_name -> dir
  std::map<std::string, nlohmann::json> model_info_;

  std::unique_ptr<httplib::Server> server_;
  std::thread server_thread_;

  mutable std::mutex jobs_mutex_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::vector<std::thread> workers_;
  std::uint64_t next_job_ = 1;
};

nlohmann::json slide_to_json(const std::string& id, const SlidePyramid& slide);

}  // namespace slidespin
