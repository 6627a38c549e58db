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

#include "cli.hpp"

#include <algorithm>
#include <csignal>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "slidespin/engine.hpp"
#include "slidespin/error.hpp"
#include "slidespin/metrics.hpp"
#include "slidespin/service.hpp"
#include "slidespin/tissue.hpp"
#include "slidespin/zoo.hpp"

namespace slidespin::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kInputError = 1;
constexpr int kPipelineError = 2;

struct RunArgs {
  std::string wsi;
  std::string wsi_dir;
  std::string model;
  std::string out;
  std::string summary;
  std::string format = "json";
  std::optional<int> patch_size;
  std::optional<double> tissue_threshold;
  std::size_t batch_size = 32;
  int threads = 1;
  int thumbnail_max_dim = 2048;
  std::string dump_mask;
  std::string cache_dir;
};

RunOptions to_options(const RunArgs& a) {
  RunOptions o;
  o.patch_size = a.patch_size;
  o.tissue_threshold = a.tissue_threshold;
  o.batch_size = a.batch_size;
  o.threads = a.threads;
  o.thumbnail_max_dim = a.thumbnail_max_dim;
  if (!a.cache_dir.empty()) o.cache_dir = a.cache_dir;
  return o;
}

// Writes to `path`, or to `fallback` when the path is empty.
void emit(const std::string& path, const std::string& text, std::ostream& fallback) {
  if (path.empty()) {
    fallback << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw Error(ErrorCode::WriteFailure, "cannot write " + path);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

std::vector<fs::path> list_slides(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const fs::path& p = entry.path();
    const std::string ext = p.extension().string();
    if ((entry.is_directory() && fs::exists(p / "pyramid.json")) ||
        (entry.is_regular_file() && (ext == ".tif" || ext == ".tiff" || ext == ".svs"))) {
      out.push_back(p);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

int run_single(const RunArgs& a, std::ostream& out, std::ostream& err) {
  try {
    const InferenceRun run = run_inference(a.wsi, ModelRef::parse(a.model), to_options(a));
    for (const auto& w : run.report.warnings) err << "warning: " << w << "\n";
    if (!a.dump_mask.empty()) write_pgm(run.mask, a.dump_mask);
    const json doc = a.format == "geojson"
                         ? export_geojson(run.plan, run.report.result, run.report)
                         : run.report.to_json();
    emit(a.out, doc.dump(2) + "\n", out);
    return kOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

int run_batch(const RunArgs& a, std::ostream& out, std::ostream& err) {
  if (!fs::is_directory(a.wsi_dir)) {
    err << "error: not a directory: " << a.wsi_dir << "\n";
    return kInputError;
  }
  const std::vector<fs::path> slides = list_slides(a.wsi_dir);
  if (slides.empty()) {
    err << "error: no slides found in " << a.wsi_dir << "\n";
    return kInputError;
  }

  // Resolve once so a remote bundle is fetched a single time; each slide
  // then re-verifies the local copy in its own resolve stage.
  RunOptions options = to_options(a);
  ModelBundle bundle;
  try {
    const fs::path cache = options.cache_dir.empty() ? default_cache_dir() : options.cache_dir;
    bundle = load_bundle(resolve_model(ModelRef::parse(a.model), cache));
  } catch (const Error& e) {
    err << "error: " << e.with_stage("resolve").what() << "\n";
    return kInputError;
  }

  std::ostringstream jsonl;
  std::ostringstream csv;
  csv << "slide,model_name,status,predicted_class,n_patches";
  for (const auto& c : bundle.manifest.class_names) csv << ",prob_" << csv_field(c);
  for (const auto& s : stage_names()) csv << "," << s << "_ms";
  csv << ",total_ms,error\n";

  int code = kOk;
  for (const fs::path& slide_path : slides) {
    const std::string name = slide_path.filename().string();
    csv << csv_field(name) << "," << csv_field(bundle.manifest.model_name) << ",";
    try {
      const InferenceRun run =
          run_inference(slide_path, ModelRef::local(bundle.dir), options);
      const RunReport& r = run.report;
      json rec = r.to_json();
      rec["slide"] = name;
      rec["status"] = "ok";
      jsonl << rec.dump() << "\n";
      csv << "ok," << csv_field(r.predicted_class) << "," << r.n_patches;
      for (double p : r.result.probs) csv << "," << p;
      for (const auto& s : stage_names()) csv << "," << r.durations_ms.at(s);
      csv << "," << r.durations_ms.at("total") << ",\n";
      for (const auto& w : r.warnings) err << "warning: " << name << ": " << w << "\n";
      if (!a.dump_mask.empty()) {
        fs::create_directories(a.dump_mask);
        write_pgm(run.mask, fs::path(a.dump_mask) / (slide_path.stem().string() + ".pgm"));
      }
    } catch (const Error& e) {
      jsonl << json{{"slide", name}, {"status", "error"}, {"error", e.what()}}.dump()
            << "\n";
      csv << "error,,0";
      for (std::size_t i = 0; i < bundle.manifest.class_names.size(); ++i) csv << ",";
      for (std::size_t i = 0; i <= stage_names().size(); ++i) csv << ",";
      csv << "," << csv_field(e.what()) << "\n";
      err << "error: " << name << ": " << e.what() << "\n";
      code = std::max(code, exit_code_for(e));
    }
  }

  emit(a.out, jsonl.str(), out);
  std::string summary = a.summary;
  if (summary.empty() && !a.out.empty()) summary = a.out + ".summary.csv";
  emit(summary, csv.str(), err);
  return code;
}

// ---- metrics -----------------------------------------------------------------

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

// slide -> label. The label column is the first of `label_columns` present
// in the header.
std::map<std::string, std::string> read_labels(const std::string& path,
                                               const std::vector<std::string>& label_columns) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::NotFound, "cannot read " + path);
  std::string line;
  if (!std::getline(f, line)) throw Error(ErrorCode::EmptyInput, path + " is empty");
  const auto header = split_csv_line(line);
  const auto col = [&](const std::string& name) -> std::optional<std::size_t> {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto slide_col = col("slide");
  std::optional<std::size_t> label_col;
  for (const auto& c : label_columns) {
    if ((label_col = col(c))) break;
  }
  if (!slide_col || !label_col) {
    throw Error(ErrorCode::ParseError, path + " needs a 'slide' column and one of: " +
                                           [&] {
                                             std::string s;
                                             for (const auto& c : label_columns) {
                                               s += (s.empty() ? "" : ", ") + c;
                                             }
                                             return s;
                                           }());
  }
  std::map<std::string, std::string> out;
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() <= std::max(*slide_col, *label_col)) {
      throw Error(ErrorCode::ParseError, path + ":" + std::to_string(lineno) + ": too few fields");
    }
    if (!out.emplace(fields[*slide_col], fields[*label_col]).second) {
      throw Error(ErrorCode::ParseError,
                  path + ":" + std::to_string(lineno) + ": duplicate slide " + fields[*slide_col]);
    }
  }
  return out;
}

int run_metrics(const std::string& pred_path, const std::string& truth_path,
                const std::string& positive, std::ostream& out, std::ostream& err) {
  try {
    const auto pred = read_labels(pred_path, {"predicted_class", "label", "prediction"});
    const auto truth = read_labels(truth_path, {"label", "truth", "class"});
    std::vector<int> p;
    std::vector<int> t;
    std::size_t indeterminate = 0;
    for (const auto& [slide, label] : truth) {
      const auto it = pred.find(slide);
      if (it == pred.end()) {
        throw Error(ErrorCode::LengthMismatch, "no prediction for slide " + slide);
      }
      if (it->second == kIndeterminate || it->second.empty()) ++indeterminate;
      p.push_back(it->second == positive ? 1 : 0);
      t.push_back(label == positive ? 1 : 0);
    }
    if (pred.size() != truth.size()) {
      throw Error(ErrorCode::LengthMismatch,
                  std::to_string(pred.size()) + " predictions but " +
                      std::to_string(truth.size()) + " truth labels");
    }
    if (indeterminate > 0) {
      err << "warning: " << indeterminate
          << " indeterminate prediction(s) counted as not '" << positive << "'\n";
    }
    json doc = compute_metrics(p, t, 1).to_json();
    doc["positive"] = positive;
    doc["n"] = t.size();
    out << doc.dump(2) << "\n";
    return kOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
}

int run_verify(const std::string& model, const std::string& cache_dir, std::ostream& out,
               std::ostream& err) {
  try {
    const fs::path cache = cache_dir.empty() ? default_cache_dir() : fs::path(cache_dir);
    const ModelRef ref = ModelRef::parse(model);
    // Remote bundles are checked after download; resolve itself rejects
    // checksum failures, which is reported the same way.
    const fs::path dir = ref.is_remote() ? resolve_model(ref, cache) : ref.path();
    const VerifyReport report = verify_bundle(dir);
    out << report.to_json().dump(2) << "\n";
    return report.ok() ? kOk : kInputError;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
}

Service* g_service = nullptr;

void handle_signal(int) {
  if (g_service != nullptr) g_service->stop();
}

int run_serve(const ServiceConfig& config, const std::string& host, int port, std::ostream& out,
              std::ostream& err) {
  try {
    Service service(config);
    out << "serving " << service.slides_json().size() << " slide(s) and "
        << service.models_json().size() << " model(s) on http://" << host << ":" << port
        << std::endl;
    g_service = &service;
    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);
    service.listen(host, port);
    g_service = nullptr;
    return kOk;
  } catch (const Error& e) {
    g_service = nullptr;
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
}

}  // namespace

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Specimen-level whole-slide image inference"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run inference on one slide or a directory of slides");
  auto* wsi_opt = run_cmd->add_option("--wsi", run.wsi, "Slide file or pyramid directory");
  auto* dir_opt = run_cmd->add_option("--wsi-dir", run.wsi_dir, "Directory of slides (batch mode)");
  wsi_opt->excludes(dir_opt);
  run_cmd->add_option("--model", run.model, "Bundle directory or http(s) URL")->required();
  run_cmd->add_option("--out", run.out, "Output file (default: stdout)");
  run_cmd->add_option("--summary", run.summary, "Batch CSV summary (default: <out>.summary.csv)");
  run_cmd->add_option("--format", run.format, "Single-slide output format")
      ->check(CLI::IsMember({"json", "geojson"}));
  run_cmd->add_option("--patch-size", run.patch_size, "Override the bundle's patch size")
      ->check(CLI::Range(32, 1 << 16));
  run_cmd->add_option("--tissue-threshold", run.tissue_threshold, "Minimum tissue fraction")
      ->check(CLI::Range(0.0, 1.0));
  run_cmd->add_option("--batch-size", run.batch_size, "Patches per encoder batch")
      ->check(CLI::PositiveNumber);
  run_cmd->add_option("--threads", run.threads, "Embedding workers")->check(CLI::PositiveNumber);
  run_cmd->add_option("--thumbnail-max-dim", run.thumbnail_max_dim, "Tissue thumbnail size")
      ->check(CLI::Range(16, 1 << 16));
  run_cmd->add_option("--dump-mask", run.dump_mask,
                      "Write the tissue mask as PGM (a directory in batch mode)");
  run_cmd->add_option("--cache-dir", run.cache_dir, "Bundle cache directory");

  std::string verify_model;
  std::string verify_cache;
  auto* verify_cmd = app.add_subcommand("verify", "Check a model bundle");
  verify_cmd->add_option("--model", verify_model, "Bundle directory or http(s) URL")->required();
  verify_cmd->add_option("--cache-dir", verify_cache, "Bundle cache directory");

  std::string pred_csv;
  std::string truth_csv;
  std::string positive;
  auto* metrics_cmd = app.add_subcommand("metrics", "Classification metrics from CSV labels");
  metrics_cmd->add_option("--pred", pred_csv, "CSV with slide,predicted_class")->required();
  metrics_cmd->add_option("--truth", truth_csv, "CSV with slide,label")->required();
  metrics_cmd->add_option("--positive", positive, "Positive class name")->required();

  ServiceConfig serve_config;
  std::string host = "127.0.0.1";
  int port = 8000;
  auto* serve_cmd = app.add_subcommand("serve", "Local HTTP service for the viewer");
  serve_cmd->add_option("--models", serve_config.models_dir, "Directory of bundles")->required();
  serve_cmd->add_option("--slides", serve_config.slides_dir, "Directory of slides")->required();
  serve_cmd->add_option("--port", port, "TCP port")->check(CLI::Range(1, 65535));
  serve_cmd->add_option("--host", host, "Bind address");
  serve_cmd->add_option("--ui", serve_config.ui_dir, "Static viewer files to mount at /");
  serve_cmd->add_option("--threads", serve_config.run_options.threads, "Embedding workers")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    if (app.got_subcommand(run_cmd)) err << run_cmd->help();
    return kInputError;
  }

  try {
    if (app.got_subcommand(run_cmd)) {
      if (run.wsi.empty() == run.wsi_dir.empty()) {
        err << "error: exactly one of --wsi and --wsi-dir is required\n";
        return kInputError;
      }
      return run.wsi.empty() ? run_batch(run, out, err) : run_single(run, out, err);
    }
    if (app.got_subcommand(verify_cmd)) return run_verify(verify_model, verify_cache, out, err);
    if (app.got_subcommand(metrics_cmd)) {
      return run_metrics(pred_csv, truth_csv, positive, out, err);
    }
    return run_serve(serve_config, host, port, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kPipelineError;
  }
}

}  // namespace slidespin::cli
