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

#ifndef FUNDUS_CLI_HPP
#define FUNDUS_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace fundus::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;
inline constexpr int kExitUsage = 64;

/// Runs one `fundus-eval` invocation. `args` excludes the program name.
/// Help text goes to `out`; diagnostics and logs go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace fundus::cli

#endif // FUNDUS_CLI_HPP
