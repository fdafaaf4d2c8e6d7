// Copyright 2026 The DGRL Authors
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

#include "dgrl/error.hpp"

namespace dgrl {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kConflictingTargets: return "ConflictingTargets";
    case ErrorCode::kDuplicateEdge: return "DuplicateEdge";
    case ErrorCode::kSelfLoop: return "SelfLoop";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kSchemaError: return "SchemaError";
    case ErrorCode::kSplitError: return "SplitError";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kNotSquare: return "NotSquare";
    case ErrorCode::kNotHermitian: return "NotHermitian";
    case ErrorCode::kConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::kNonScalarRoot: return "NonScalarRoot";
    case ErrorCode::kMissingGrad: return "MissingGrad";
    case ErrorCode::kInvalidPotential: return "InvalidPotential";
    case ErrorCode::kInvalidCombo: return "InvalidCombo";
    case ErrorCode::kNodeCapExceeded: return "NodeCapExceeded";
    case ErrorCode::kDegenerateTarget: return "DegenerateTarget";
    case ErrorCode::kEmptyColumn: return "EmptyColumn";
    case ErrorCode::kAllTrialsFailed: return "AllTrialsFailed";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

int exit_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNodeCapExceeded:
      return 4;
    case ErrorCode::kNotHermitian:
    case ErrorCode::kConvergenceFailure:
    case ErrorCode::kNonScalarRoot:
    case ErrorCode::kMissingGrad:
    case ErrorCode::kDegenerateTarget:
    case ErrorCode::kAllTrialsFailed:
      return 3;
    default:
      return 2;
  }
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace dgrl
