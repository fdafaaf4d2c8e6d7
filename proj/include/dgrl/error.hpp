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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dgrl {

enum class ErrorCode {
  kIndexOutOfRange,
  kShapeMismatch,
  kConflictingTargets,
  kDuplicateEdge,
  kSelfLoop,
  kParseError,
  kSchemaError,
  kSplitError,
  kInvalidSpec,
  kNotSquare,
  kNotHermitian,
  kConvergenceFailure,
  kNonScalarRoot,
  kMissingGrad,
  kInvalidPotential,
  kInvalidCombo,
  kNodeCapExceeded,
  kDegenerateTarget,
  kEmptyColumn,
  kAllTrialsFailed,
  kConfigError,
  kIoError,
};

std::string_view error_code_name(ErrorCode code);

// Process exit status for the CLI: 2 config, 3 numeric, 4 resource cap.
int exit_status_for(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace dgrl
