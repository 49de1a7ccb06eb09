// Copyright 2026 The RaggedShard Authors. All rights reserved.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "raggedshard/error.hpp"

namespace raggedshard {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonDividingGranularity: return "NonDividingGranularity";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::MixedDtype: return "MixedDtype";
    case ErrorCode::MeshMismatch: return "MeshMismatch";
    case ErrorCode::UnsupportedConversion: return "UnsupportedConversion";
    case ErrorCode::CollectiveMismatch: return "CollectiveMismatch";
    case ErrorCode::PlacementMismatch: return "PlacementMismatch";
    case ErrorCode::NotMatrix: return "NotMatrix";
    case ErrorCode::ZeroMatrix: return "ZeroMatrix";
    case ErrorCode::MisalignedShard: return "MisalignedShard";
    case ErrorCode::LimitExceeded: return "LimitExceeded";
    case ErrorCode::InternalInconsistency: return "InternalInconsistency";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace raggedshard
