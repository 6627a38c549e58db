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

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace slidespin {

enum class ErrorCode {
  // slide-io
  NotFound,
  UnsupportedFormat,
  CorruptHeader,
  InvalidLevel,
  ReadFailure,
  WriteFailure,
  // tissue
  EmptyHistogram,
  // patching
  BadSpacing,
  EmptyPlan,
  IndexOutOfRange,
  // encoder
  UnknownEncoder,
  ShapeMismatch,
  SizeMismatch,
  UnsupportedOperator,
  NonFiniteEmbedding,
  // aggregator
  MissingTensor,
  NonFiniteWeight,
  EmptyBag,
  DimMismatch,
  NonFiniteInput,
  // zoo
  ParseError,
  SchemaError,
  FieldError,
  FetchError,
  ChecksumMismatch,
  IncompleteBundle,
  CrossCheckFailed,
  // engine
  LengthMismatch,
  EmptyInput,
  InvalidPolygon,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

/// Library-wide exception. `details` carries one entry per violation for
/// errors that aggregate (FieldError, bundle verification); `stage` is set
/// when the engine wraps an upstream failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message,
        std::vector<std::string> details = {})
      : std::runtime_error(format(code, "", message, details)),
        code_(code),
        message_(std::move(message)),
        details_(std::move(details)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& message() const noexcept { return message_; }
  const std::vector<std::string>& details() const noexcept { return details_; }
  const std::string& stage() const noexcept { return stage_; }

  /// Returns a copy tagged with the pipeline stage that raised it.
  Error with_stage(std::string stage) const {
    Error copy = *this;
    copy.stage_ = std::move(stage);
    copy.what_ = format(code_, copy.stage_, message_, details_);
    return copy;
  }

  const char* what() const noexcept override {
    return what_.empty() ? std::runtime_error::what() : what_.c_str();
  }

 private:
  static std::string format(ErrorCode code, const std::string& stage,
                            const std::string& message,
                            const std::vector<std::string>& details);

  ErrorCode code_;
  std::string message_;
  std::vector<std::string> details_;
  std::string stage_;
  std::string what_;
};

}  // namespace slidespin
