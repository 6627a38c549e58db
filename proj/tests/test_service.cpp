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

#include <httplib.h>

#include <chrono>
#include <thread>

#include "slidespin/engine.hpp"
#include "slidespin/fixtures.hpp"
#include "slidespin/service.hpp"
#include "support.hpp"

using namespace slidespin;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Env {
  testing::FixtureSet fx;
  fs::path slides;
  fs::path models;

  Env() : slides(fx.root / "served-slides"), models(fx.root / "models") {
    fs::create_directories(slides);
    fs::copy_file(fx.blob, slides / "blob.tiff");
    fs::copy_file(fx.white, slides / "white.tiff");
    fs::create_directories(models);
    fs::copy(fx.bundle, models / "demo-reference");
    fs::create_directories(fx.root / "ui");
    testing::write_text(fx.root / "ui" / "index.html", "<html>viewer</html>");
  }

  ServiceConfig config() const {
    ServiceConfig c;
    c.models_dir = models;
    c.slides_dir = slides;
    c.ui_dir = fx.root / "ui";
    c.run_options.cache_dir = fx.root / "cache";
    return c;
  }
};

json get_json(httplib::Client& c, const std::string& path, int expected_status = 200) {
  const auto res = c.Get(path);
  REQUIRE(res);
  CHECK(res->status == expected_status);
  return json::parse(res->body);
}

httplib::Result post(httplib::Client& c, const json& body) {
  return c.Post("/api/infer", body.dump(), "application/json");
}

json wait_for(httplib::Client& c, const std::string& job_id) {
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(60);
  while (std::chrono::steady_clock::now() < deadline) {
    const json j = get_json(c, "/api/jobs/" + job_id);
    const std::string status = j["status"];
    if (status == "done" || status == "error") return j;
    CHECK((status == "queued" || status == "running"));
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  FAIL("job did not finish");
  return {};
}

json square(double x0, double y0, double x1, double y1) {
  return {{"type", "Polygon"},
          {"coordinates", {{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}, {x0, y0}}}}};
}

}  // namespace

TEST_CASE("slide and model listings") {
  Env env;
  Service service(env.config());
  const int port = service.start("127.0.0.1", 0);
  httplib::Client c("127.0.0.1", port);

  const json slides = get_json(c, "/api/slides");
  REQUIRE(slides.size() == 2);
  CHECK(slides[0]["id"] == "blob.tiff");
  CHECK(slides[1]["id"] == "white.tiff");
  CHECK(slides[0]["width"] == 4096);
  CHECK(slides[0]["levels"].size() == 3);
  CHECK(slides[0]["levels"][2]["width"] == 1024);
  CHECK(slides[0]["levels"][2]["downsample"] == 4.0);
  CHECK(slides[0]["mpp_x"] == doctest::Approx(0.5));

  const json one = get_json(c, "/api/slides/white.tiff");
  CHECK(one["width"] == 2048);
  get_json(c, "/api/slides/nope.tiff", 404);

  const json models = get_json(c, "/api/models");
  REQUIRE(models.size() == 1);
  CHECK(models[0]["name"] == "demo-reference");
  CHECK(models[0]["verified"] == true);
  CHECK(models[0]["class_names"] == json({"negative", "positive"}));

  const auto ui = c.Get("/index.html");
  REQUIRE(ui);
  CHECK(ui->body == "<html>viewer</html>");
}

TEST_CASE("tiles") {
  Env env;
  Service service(env.config());
  const int port = service.start("127.0.0.1", 0);
  httplib::Client c("127.0.0.1", port);

  // Level 2 of the blob slide is 1024 px wide: tiles 0..3 exist.
  const auto tile = c.Get("/api/slides/blob.tiff/tiles/2/1/1");
  REQUIRE(tile);
  CHECK(tile->status == 200);
  CHECK(tile->get_header_value("Content-Type") == "image/png");
  REQUIRE(tile->body.size() > 24);
  CHECK(tile->body.compare(0, 8, "\x89PNG\r\n\x1a\n") == 0);
  const auto be32 = [&](std::size_t at) {
    const auto* p = reinterpret_cast<const unsigned char*>(tile->body.data() + at);
    return (p[0] << 24) | (p[1] << 16) | (p[2] << 8) | p[3];
  };
  CHECK(be32(16) == kTileSize);
  CHECK(be32(20) == kTileSize);

  CHECK(c.Get("/api/slides/blob.tiff/tiles/2/4/0")->status == 404);
  CHECK(c.Get("/api/slides/blob.tiff/tiles/3/0/0")->status == 404);
  CHECK(c.Get("/api/slides/nope.tiff/tiles/0/0/0")->status == 404);
}

TEST_CASE("inference jobs") {
  Env env;
  Service service(env.config());
  const int port = service.start("127.0.0.1", 0);
  httplib::Client c("127.0.0.1", port);
  c.set_read_timeout(30, 0);

  SUBCASE("request validation") {
    CHECK(c.Post("/api/infer", "{nope", "application/json")->status == 400);
    CHECK(post(c, {{"slide_id", "blob.tiff"}})->status == 400);
    CHECK(post(c, {{"slide_id", "x.tiff"}, {"model_name", "demo-reference"}})->status == 404);
    CHECK(post(c, {{"slide_id", "blob.tiff"}, {"model_name", "other"}})->status == 404);
    const json bowtie = {{"type", "Polygon"},
                         {"coordinates", {{{0, 0}, {10, 10}, {10, 0}, {0, 10}, {0, 0}}}}};
    const auto res = post(c, {{"slide_id", "blob.tiff"},
                              {"model_name", "demo-reference"},
                              {"region", bowtie}});
    REQUIRE(res);
    CHECK(res->status == 422);
    get_json(c, "/api/jobs/job-99", 404);
  }

  SUBCASE("region covering the tissue equals the unrestricted run") {
    const auto res = post(c, {{"slide_id", "blob.tiff"},
                              {"model_name", "demo-reference"},
                              {"region", square(1500, 1500, 2600, 2600)}});
    REQUIRE(res);
    REQUIRE(res->status == 202);
    const std::string job_id = json::parse(res->body)["job_id"];

    // The first job is still in its tissue stage.
    const auto busy = post(c, {{"slide_id", "blob.tiff"}, {"model_name", "demo-reference"}});
    REQUIRE(busy);
    CHECK(busy->status == 409);
    CHECK(json::parse(busy->body)["job_id"] == job_id);

    const json done = wait_for(c, job_id);
    REQUIRE(done["status"] == "done");
    CHECK(done["report"]["parameters"]["region_restricted"] == true);

    RunOptions o;
    o.cache_dir = env.fx.root / "cache";
    const InferenceRun ref =
        run_inference(env.fx.blob, ModelRef::local(env.fx.bundle), o);
    CHECK(done["report"]["n_patches"] == ref.report.n_patches);
    CHECK(done["report"]["predicted_class"] == "positive");
    CHECK(done["report"]["result"]["logits"] == json(ref.report.result.logits));
    CHECK(done["report"]["result"]["attention"] == json(ref.report.result.attention));
    CHECK(done["geojson"] == export_geojson(ref.plan, ref.report.result, ref.report));

    // The slide is free again.
    const auto again = post(c, {{"slide_id", "blob.tiff"}, {"model_name", "demo-reference"}});
    REQUIRE(again);
    CHECK(again->status == 202);
    CHECK(wait_for(c, json::parse(again->body)["job_id"])["status"] == "done");
  }

  SUBCASE("jobs on different slides run side by side") {
    const auto a = post(c, {{"slide_id", "blob.tiff"}, {"model_name", "demo-reference"}});
    const auto b = post(c, {{"slide_id", "white.tiff"}, {"model_name", "demo-reference"}});
    REQUIRE(a);
    REQUIRE(b);
    CHECK(a->status == 202);
    CHECK(b->status == 202);
    const json white = wait_for(c, json::parse(b->body)["job_id"]);
    CHECK(white["report"]["predicted_class"] == kIndeterminate);
    CHECK(white["geojson"]["features"].empty());
    CHECK(wait_for(c, json::parse(a->body)["job_id"])["status"] == "done");
  }
}

TEST_CASE("a tampered bundle fails its job with the stage name") {
  Env env;
  const fs::path agg = env.models / "demo-reference" / "aggregator.json";
  std::string text = testing::read_text(agg);
  text[5] ^= 1;
  testing::write_text(agg, text);

  Service service(env.config());
  const int port = service.start("127.0.0.1", 0);
  httplib::Client c("127.0.0.1", port);
  CHECK(get_json(c, "/api/models")[0]["verified"] == false);
  const auto res = post(c, {{"slide_id", "white.tiff"}, {"model_name", "demo-reference"}});
  REQUIRE(res);
  REQUIRE(res->status == 202);
  const json j = wait_for(c, json::parse(res->body)["job_id"]);
  CHECK(j["status"] == "error");
  CHECK(j["stage"] == "resolve");
  CHECK(j["error"].get<std::string>().find("ChecksumMismatch") != std::string::npos);
}

TEST_CASE("missing directories") {
  ServiceConfig c;
  c.slides_dir = "/nonexistent/slides";
  c.models_dir = "/nonexistent/models";
  try {
    Service s(c);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotFound);
  }
}
