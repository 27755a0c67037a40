// Copyright 2026 The fundus-eval Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FUNDUS_ERROR_HPP
#define FUNDUS_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace fundus {

enum class ErrorCode {
    UngradableForSystem,
    MissingGrade,
    FatalFormat,
    RangeError,
    EmptyPatient,
    InfeasibleSplit,
    UnassignedRecord,
    NoFundusDetected,
    InvalidBox,
    IoError,
    DegenerateClasses,
    EmptyMatrix,
    EmptyClass,
    DegenerateMarginals,
    DegenerateReplicates,
    Unattainable,
};

std::string_view error_code_name(ErrorCode code) noexcept;

/// Every failure raised by the toolkit carries one of the codes above so callers
/// (and the CLI exit-code mapping) can branch without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace fundus

#endif // FUNDUS_ERROR_HPP
