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

#include "slidespin/error.hpp"

namespace slidespin {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::CorruptHeader: return "CorruptHeader";
    case ErrorCode::InvalidLevel: return "InvalidLevel";
    case ErrorCode::ReadFailure: return "ReadFailure";
    case ErrorCode::WriteFailure: return "WriteFailure";
    case ErrorCode::EmptyHistogram: return "EmptyHistogram";
    case ErrorCode::BadSpacing: return "BadSpacing";
    case ErrorCode::EmptyPlan: return "EmptyPlan";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::UnknownEncoder: return "UnknownEncoder";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::UnsupportedOperator: return "UnsupportedOperator";
    case ErrorCode::NonFiniteEmbedding: return "NonFiniteEmbedding";
    case ErrorCode::MissingTensor: return "MissingTensor";
    case ErrorCode::NonFiniteWeight: return "NonFiniteWeight";
    case ErrorCode::EmptyBag: return "EmptyBag";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::FieldError: return "FieldError";
    case ErrorCode::FetchError: return "FetchError";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::IncompleteBundle: return "IncompleteBundle";
    case ErrorCode::CrossCheckFailed: return "CrossCheckFailed";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidPolygon: return "InvalidPolygon";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

std::string Error::format(ErrorCode code, const std::string& stage,
                          const std::string& message,
                          const std::vector<std::string>& details) {
  std::string out;
  if (!stage.empty()) out += "[" + stage + "] ";
  out += std::string(to_string(code)) + ": " + message;
  for (const auto& d : details) out += "\n  - " + d;
  return out;
}

}  // namespace slidespin
