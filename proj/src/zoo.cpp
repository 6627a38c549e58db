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

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "slidespin/zoo.hpp"

namespace slidespin {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- hashing ---------------------------------------------------------------

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr)) {
    throw Error(ErrorCode::InvalidArgument, "sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 15]);
  }
  return out;
}

std::string sha256_hex(std::string_view bytes) {
  return sha256_hex(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::NotFound, "cannot read " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(ErrorCode::WriteFailure, "cannot write " + path.string());
}

bool is_lower_hex64(const std::string& s) {
  return s.size() == 64 && std::all_of(s.begin(), s.end(), [](char c) {
           return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
         });
}

bool is_safe_relative(const std::string& p) {
  if (p.empty() || p.front() == '/' || p.find('\\') != std::string::npos) return false;
  for (const auto& part : fs::path(p)) {
    if (part == ".." || part == ".") return false;
  }
  return true;
}

}  // namespace

std::string sha256_file(const fs::path& path) { return sha256_hex(read_file(path)); }

// ---- manifest --------------------------------------------------------------

ModelManifest parse_manifest(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::ParseError, "manifest must be a JSON object");

  if (!doc.contains("schema_version") || !doc["schema_version"].is_number_integer()) {
    throw Error(ErrorCode::SchemaError, "manifest lacks an integer schema_version");
  }
  ModelManifest m;
  m.schema_version = doc["schema_version"].get<int>();
  if (m.schema_version != kManifestSchemaVersion) {
    throw Error(ErrorCode::SchemaError,
                "unsupported schema_version " + std::to_string(m.schema_version) +
                    " (this build reads " + std::to_string(kManifestSchemaVersion) + ")");
  }

  std::vector<std::string> errs;
  auto bad = [&](const std::string& field, const std::string& why) {
    errs.push_back(field + ": " + why);
  };
  auto positive_int = [&](const json& obj, const char* key, const std::string& field,
                          int minimum) -> std::optional<int> {
    if (!obj.contains(key)) {
      bad(field, "missing");
      return std::nullopt;
    }
    if (!obj[key].is_number_integer() || obj[key].get<long long>() < minimum) {
      bad(field, "must be an integer >= " + std::to_string(minimum));
      return std::nullopt;
    }
    return obj[key].get<int>();
  };
  auto triple = [&](const json& obj, const char* key, const std::string& field,
                    std::array<float, 3>& out, bool positive) {
    if (!obj.contains(key) || obj[key].is_null()) return;
    const json& v = obj[key];
    if (!v.is_array() || v.size() != 3 ||
        !std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_number(); })) {
      bad(field, "must be an array of 3 numbers");
      return;
    }
    for (int c = 0; c < 3; ++c) {
      const double x = v[c].get<double>();
      if (!std::isfinite(x) || (positive && x <= 0.0)) {
        bad(field, positive ? "entries must be > 0" : "entries must be finite");
        return;
      }
      out[c] = static_cast<float>(x);
    }
  };

  if (!doc.contains("model_name") || !doc["model_name"].is_string() ||
      doc["model_name"].get<std::string>().empty()) {
    bad("model_name", "must be a non-empty string");
  } else {
    m.model_name = doc["model_name"].get<std::string>();
  }
  if (doc.contains("description")) {
    if (doc["description"].is_string()) m.description = doc["description"].get<std::string>();
    else bad("description", "must be a string");
  }

  // patch
  if (!doc.contains("patch") || !doc["patch"].is_object()) {
    bad("patch", "missing object");
  } else {
    const json& p = doc["patch"];
    if (auto v = positive_int(p, "patch_size_px", "patch.patch_size_px", 32)) {
      m.patch.patch_size_px = *v;
    }
    if (p.contains("spacing_mpp") && !p["spacing_mpp"].is_null()) {
      if (!p["spacing_mpp"].is_number() || !(p["spacing_mpp"].get<double>() > 0.0)) {
        bad("patch.spacing_mpp", "must be a positive number or null");
      } else {
        m.patch.spacing_mpp = p["spacing_mpp"].get<double>();
      }
    }
    if (p.contains("tissue_threshold") && !p["tissue_threshold"].is_null()) {
      const json& t = p["tissue_threshold"];
      if (!t.is_number() || t.get<double>() < 0.0 || t.get<double>() > 1.0) {
        bad("patch.tissue_threshold", "must be a number in [0, 1]");
      } else {
        m.patch.tissue_threshold = t.get<double>();
      }
    }
    if (p.contains("stride_px") && !p["stride_px"].is_null()) {
      if (auto v = positive_int(p, "stride_px", "patch.stride_px", 1)) m.patch.stride_px = *v;
    }
  }

  // encoder
  if (!doc.contains("encoder") || !doc["encoder"].is_object()) {
    bad("encoder", "missing object");
  } else {
    const json& e = doc["encoder"];
    if (!e.contains("id") || !e["id"].is_string() || e["id"].get<std::string>().empty()) {
      bad("encoder.id", "must be a non-empty string");
    } else {
      m.encoder.encoder_id = e["id"].get<std::string>();
    }
    if (auto v = positive_int(e, "embed_dim", "encoder.embed_dim", 1)) m.encoder.embed_dim = *v;
    m.encoder.input_size = m.patch.patch_size_px;
    if (e.contains("input_size")) {
      if (auto v = positive_int(e, "input_size", "encoder.input_size", 1)) {
        if (*v != m.patch.patch_size_px) {
          bad("encoder.input_size", "must equal patch.patch_size_px (" +
                                        std::to_string(m.patch.patch_size_px) + ")");
        }
      }
    }
    triple(e, "norm_mean", "encoder.norm_mean", m.encoder.norm_mean, false);
    triple(e, "norm_std", "encoder.norm_std", m.encoder.norm_std, true);
  }

  // class names
  if (!doc.contains("class_names") || !doc["class_names"].is_array()) {
    bad("class_names", "missing array");
  } else {
    std::set<std::string> seen;
    for (const auto& c : doc["class_names"]) {
      if (!c.is_string() || c.get<std::string>().empty()) {
        bad("class_names", "entries must be non-empty strings");
        break;
      }
      if (!seen.insert(c.get<std::string>()).second) {
        bad("class_names", "duplicate class '" + c.get<std::string>() + "'");
      }
      m.class_names.push_back(c.get<std::string>());
    }
    if (m.class_names.size() < 2) bad("class_names", "needs at least 2 classes");
  }

  // files
  if (!doc.contains("files") || !doc["files"].is_object()) {
    bad("files", "missing object");
  } else {
    for (const auto& [role, entry] : doc["files"].items()) {
      const std::string field = "files." + role;
      if (!entry.is_object() || !entry.contains("path") || !entry["path"].is_string()) {
        bad(field + ".path", "missing string");
        continue;
      }
      BundleFile f;
      f.path = entry["path"].get<std::string>();
      if (!is_safe_relative(f.path)) bad(field + ".path", "must be a plain relative path");
      if (!entry.contains("sha256") || !entry["sha256"].is_string()) {
        bad(field + ".sha256", "missing string");
      } else {
        f.sha256 = entry["sha256"].get<std::string>();
        if (!is_lower_hex64(f.sha256)) bad(field + ".sha256", "must be 64 lowercase hex characters");
      }
      m.files[role] = f;
    }
    if (!m.files.count("aggregator")) bad("files.aggregator", "required role is missing");
  }

  constexpr std::string_view kOnnx = "onnx:";
  if (m.encoder.encoder_id.rfind(kOnnx, 0) == 0) {
    const std::string file = m.encoder.encoder_id.substr(kOnnx.size());
    const bool listed = std::any_of(m.files.begin(), m.files.end(),
                                    [&](const auto& kv) { return kv.second.path == file; });
    if (!listed) bad("files", "encoder model '" + file + "' is not listed");
  }

  if (!errs.empty()) throw Error(ErrorCode::FieldError, "invalid manifest", errs);
  return m;
}

json manifest_to_json(const ModelManifest& m) {
  json files = json::object();
  for (const auto& [role, f] : m.files) files[role] = {{"path", f.path}, {"sha256", f.sha256}};
  json patch = {{"patch_size_px", m.patch.patch_size_px},
                {"spacing_mpp", m.patch.spacing_mpp ? json(*m.patch.spacing_mpp) : json(nullptr)},
                {"tissue_threshold", m.patch.tissue_threshold}};
  if (m.patch.stride_px) patch["stride_px"] = *m.patch.stride_px;
  return {{"schema_version", m.schema_version},
          {"model_name", m.model_name},
          {"description", m.description},
          {"encoder",
           {{"id", m.encoder.encoder_id},
            {"embed_dim", m.encoder.embed_dim},
            {"input_size", m.encoder.input_size},
            {"norm_mean", m.encoder.norm_mean},
            {"norm_std", m.encoder.norm_std}}},
          {"patch", patch},
          {"class_names", m.class_names},
          {"files", files}};
}

// ---- refs and cache ---------------------------------------------------------

ModelRef ModelRef::parse(const std::string& text) {
  const auto lower = [&] {
    std::string s = text.substr(0, 8);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
  }();
  if (lower.rfind("http://", 0) == 0 || lower.rfind("https://", 0) == 0) return remote(text);
  return local(text);
}

ModelRef ModelRef::local(fs::path dir) {
  ModelRef r;
  r.path_ = std::move(dir);
  return r;
}

ModelRef ModelRef::remote(std::string base_url) {
  ModelRef r;
  r.url_ = std::move(base_url);
  return r;
}

fs::path default_cache_dir() {
  if (const char* env = std::getenv("SLIDESPIN_CACHE"); env && *env) return env;
  if (const char* xdg = std::getenv("XDG_CACHE_HOME"); xdg && *xdg) {
    return fs::path(xdg) / "slidespin";
  }
  if (const char* home = std::getenv("HOME"); home && *home) {
    return fs::path(home) / ".cache" / "slidespin";
  }
  return fs::temp_directory_path() / "slidespin-cache";
}

std::string canonical_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::InvalidArgument, "not a URL: " + url);
  }
  std::string scheme = url.substr(0, scheme_end);
  std::transform(scheme.begin(), scheme.end(), scheme.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  std::string rest = url.substr(scheme_end + 3);
  const auto slash = rest.find('/');
  std::string host = rest.substr(0, slash);
  std::string path = slash == std::string::npos ? "" : rest.substr(slash);
  std::transform(host.begin(), host.end(), host.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if ((scheme == "http" && host.size() > 3 && host.ends_with(":80")) ||
      (scheme == "https" && host.size() > 4 && host.ends_with(":443"))) {
    host.erase(host.rfind(':'));
  }
  while (!path.empty() && path.back() == '/') path.pop_back();
  return scheme + "://" + host + path;
}

namespace {

class FileLock {
 public:
  explicit FileLock(const fs::path& path) {
    fd_ = ::open(path.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
    if (fd_ < 0) throw Error(ErrorCode::WriteFailure, "cannot create lock " + path.string());
    if (::flock(fd_, LOCK_EX) != 0) {
      ::close(fd_);
      throw Error(ErrorCode::WriteFailure, "cannot lock " + path.string());
    }
  }
  ~FileLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_ = -1;
};

fs::path fetch_bundle(const std::string& base, const fs::path& staging) {
  fs::remove_all(staging);
  fs::create_directories(staging);
  const std::string manifest_text = http_get(base + "/manifest.json");
  const std::string digest_text = http_get(base + "/" + kManifestDigestFile);
  if (digest_text != sha256_hex(manifest_text) + "\n") {
    throw Error(ErrorCode::ChecksumMismatch,
                std::string("downloaded manifest.json does not match ") + kManifestDigestFile);
  }
  write_file(staging / "manifest.json", manifest_text);
  write_file(staging / kManifestDigestFile, digest_text);
  const ModelManifest manifest = parse_manifest(manifest_text);
  for (const auto& [role, file] : manifest.files) {
    const std::string body = http_get(base + "/" + file.path);
    const std::string actual = sha256_hex(body);
    if (actual != file.sha256) {
      throw Error(ErrorCode::ChecksumMismatch,
                  "downloaded " + file.path + " (role " + role + "): expected sha256 " +
                      file.sha256 + ", got " + actual);
    }
    const fs::path target = staging / file.path;
    fs::create_directories(target.parent_path());
    write_file(target, body);
  }
  write_file(staging / kCompleteMarker, canonical_url(base) + "\n");
  return staging;
}

}  // namespace

fs::path resolve_model(const ModelRef& ref, const fs::path& cache_dir) {
  if (!ref.is_remote()) {
    std::error_code ec;
    if (!fs::is_directory(ref.path(), ec)) {
      throw Error(ErrorCode::NotFound, "model bundle directory not found: " + ref.path().string());
    }
    const VerifyReport report = verify_bundle(ref.path());
    if (!report.ok()) {
      std::vector<std::string> details;
      for (const auto& i : report.issues) details.push_back(i.message);
      throw Error(report.issues.front().code,
                  "bundle " + ref.path().string() + " failed verification", details);
    }
    return ref.path();
  }

  const std::string canonical = canonical_url(ref.url());
  const std::string key = sha256_hex(canonical);
  fs::create_directories(cache_dir);
  const fs::path dir = cache_dir / key;
  FileLock lock(cache_dir / (key + ".lock"));
  if (fs::exists(dir / kCompleteMarker)) return dir;

  fs::remove_all(dir);
  const fs::path staging = cache_dir / (key + ".partial");
  try {
    fetch_bundle(canonical, staging);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(staging, ec);
    throw;
  }
  fs::rename(staging, dir);
  return dir;
}

// ---- verification ----------------------------------------------------------

json VerifyReport::to_json() const {
  json issues_json = json::array();
  for (const auto& i : issues) {
    issues_json.push_back({{"code", std::string(to_string(i.code))}, {"message", i.message}});
  }
  json out = {{"bundle", dir.string()}, {"ok", ok()}, {"issues", issues_json}};
  if (manifest) {
    out["model_name"] = manifest->model_name;
    out["encoder"] = manifest->encoder.encoder_id;
    out["class_names"] = manifest->class_names;
  }
  return out;
}

namespace {

struct VerifyOutcome {
  VerifyReport report;
  std::optional<AggregatorWeights> aggregator;
};

VerifyOutcome verify_impl(const fs::path& dir) {
  VerifyOutcome out;
  VerifyReport& r = out.report;
  r.dir = dir;
  auto issue = [&](ErrorCode code, std::string msg) { r.issues.push_back({code, std::move(msg)}); };

  std::string text;
  try {
    text = read_file(dir / "manifest.json");
  } catch (const Error&) {
    issue(ErrorCode::IncompleteBundle, "manifest.json is missing");
    return out;
  }
  std::string digest_text;
  try {
    digest_text = read_file(dir / kManifestDigestFile);
  } catch (const Error&) {
    issue(ErrorCode::IncompleteBundle, std::string(kManifestDigestFile) + " is missing");
    return out;
  }
  if (const std::string actual = sha256_hex(text); digest_text != actual + "\n") {
    issue(ErrorCode::ChecksumMismatch,
          std::string("manifest.json: expected ") + kManifestDigestFile + " to hold " + actual);
    return out;
  }
  try {
    r.manifest = parse_manifest(text);
  } catch (const Error& e) {
    if (e.details().empty()) {
      issue(e.code(), e.message());
    } else {
      for (const auto& d : e.details()) issue(e.code(), d);
    }
    return out;
  }
  const ModelManifest& m = *r.manifest;

  for (const auto& [role, file] : m.files) {
    const fs::path p = dir / file.path;
    std::error_code ec;
    if (!fs::is_regular_file(p, ec)) {
      issue(ErrorCode::IncompleteBundle, "file for role '" + role + "' is missing: " + file.path);
      continue;
    }
    const std::string actual = sha256_file(p);
    if (actual != file.sha256) {
      issue(ErrorCode::ChecksumMismatch, file.path + ": expected sha256 " + file.sha256 +
                                             ", got " + actual);
    }
  }
  if (!r.ok()) return out;

  try {
    const json doc = json::parse(read_file(dir / m.files.at("aggregator").path));
    out.aggregator = load_aggregator(doc);
  } catch (const json::exception& e) {
    issue(ErrorCode::ParseError, std::string("aggregator: ") + e.what());
    return out;
  } catch (const Error& e) {
    issue(e.code(), "aggregator: " + e.message());
    return out;
  }
  const AggregatorWeights& agg = *out.aggregator;
  if (m.encoder.embed_dim != agg.dim) {
    issue(ErrorCode::CrossCheckFailed,
          "encoder.embed_dim is " + std::to_string(m.encoder.embed_dim) +
              " but aggregator D is " + std::to_string(agg.dim));
  }
  if (m.class_names.size() != static_cast<std::size_t>(agg.num_classes)) {
    issue(ErrorCode::CrossCheckFailed,
          "manifest lists " + std::to_string(m.class_names.size()) +
              " classes but aggregator C is " + std::to_string(agg.num_classes));
  } else if (m.class_names != agg.class_names) {
    issue(ErrorCode::CrossCheckFailed, "manifest and aggregator class_names differ");
  }
  return out;
}

}  // namespace

VerifyReport verify_bundle(const fs::path& dir) { return verify_impl(dir).report; }

ModelBundle load_bundle(const fs::path& dir) {
  VerifyOutcome v = verify_impl(dir);
  if (!v.report.ok()) {
    std::vector<std::string> details;
    for (const auto& i : v.report.issues) details.push_back(i.message);
    throw Error(v.report.issues.front().code, "bundle " + dir.string() + " failed verification",
                details);
  }
  return {dir, std::move(*v.report.manifest), std::move(*v.aggregator)};
}

void write_bundle(const fs::path& dir, ModelManifest manifest,
                  const std::map<std::string, std::pair<std::string, std::string>>& files) {
  fs::create_directories(dir);
  for (const auto& [role, entry] : files) {
    const auto& [rel, contents] = entry;
    const fs::path target = dir / rel;
    fs::create_directories(target.parent_path());
    write_file(target, contents);
    manifest.files[role] = {rel, sha256_hex(contents)};
  }
  const std::string text = manifest_to_json(manifest).dump(2) + "\n";
  write_file(dir / "manifest.json", text);
  write_file(dir / kManifestDigestFile, sha256_hex(text) + "\n");
}

}  // namespace slidespin
