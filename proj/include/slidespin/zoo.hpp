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

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "slidespin/aggregator.hpp"
#include "slidespin/encoder.hpp"
#include "slidespin/error.hpp"
#include "slidespin/patching.hpp"

namespace slidespin {

inline constexpr int kManifestSchemaVersion = 1;
inline constexpr const char* kCompleteMarker = ".complete";
/// Holds "<sha256 of manifest.json>\n"; compared byte for byte.
inline constexpr const char* kManifestDigestFile = "manifest.sha256";

struct BundleFile {
  std::string path;    // relative to the bundle root
  std::string sha256;  // 64 lowercase hex chars
};

struct ModelManifest {
  int schema_version = kManifestSchemaVersion;
  std::string model_name;
  std::string description;
  EncoderSpec encoder;
  PatchSpec patch;
  std::vector<std::string> class_names;
  std::map<std::string, BundleFile> files;  // role -> file; "aggregator" required
};

/// Parses manifest.json. Every violated field is listed in the FieldError
/// details. Throws ParseError / SchemaError / FieldError.
ModelManifest parse_manifest(std::string_view text);
nlohmann::json manifest_to_json(const ModelManifest& manifest);

/// Either a local bundle directory or an http(s) base URL.
class ModelRef {
 public:
  static ModelRef parse(const std::string& text);
  static ModelRef local(std::filesystem::path dir);
  static ModelRef remote(std::string base_url);

  bool is_remote() const { return !url_.empty(); }
  const std::filesystem::path& path() const { return path_; }
  const std::string& url() const { return url_; }
  std::string display() const { return is_remote() ? url_ : path_.string(); }

 private:
  std::filesystem::path path_;
  std::string url_;
};

/// $SLIDESPIN_CACHE, else $XDG_CACHE_HOME/slidespin, else ~/.cache/slidespin.
std::filesystem::path default_cache_dir();

/// Lowercased scheme and host, default port and trailing slashes removed.
std::string canonical_url(const std::string& url);

/// Local refs are verified and returned as-is. Remote refs are downloaded
/// into cache_dir/<sha256(canonical url)>; a bundle counts as cached only
/// once its completion marker exists, and cached bundles are served without
/// network access. Throws FetchError / ChecksumMismatch / IncompleteBundle.
std::filesystem::path resolve_model(const ModelRef& ref,
                                    const std::filesystem::path& cache_dir);

struct BundleIssue {
  ErrorCode code;
  std::string message;
};

struct VerifyReport {
  std::filesystem::path dir;
  std::optional<ModelManifest> manifest;
  std::vector<BundleIssue> issues;

  bool ok() const { return issues.empty(); }
  nlohmann::json to_json() const;
};

/// Manifest, file presence and checksums, aggregator load, and the
/// encoder/aggregator cross-checks. Never throws for bundle defects.
VerifyReport verify_bundle(const std::filesystem::path& dir);

struct ModelBundle {
  std::filesystem::path dir;
  ModelManifest manifest;
  AggregatorWeights aggregator;
};

/// verify_bundle, then throws the first issue (all issues in details).
ModelBundle load_bundle(const std::filesystem::path& dir);

/// Writes manifest.json plus the given files, filling in sha256 entries.
/// `files` maps role -> (relative path, contents).
void write_bundle(const std::filesystem::path& dir, ModelManifest manifest,
                  const std::map<std::string, std::pair<std::string, std::string>>& files);

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// GET with up to 5 redirects; throws FetchError on transport errors and
/// non-200 responses.
std::string http_get(const std::string& url);

}  // namespace slidespin
