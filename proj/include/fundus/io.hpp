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

#ifndef FUNDUS_IO_HPP
#define FUNDUS_IO_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fundus::io {

/// Whole-file read/write. Failures raise Error(IoError).
[[nodiscard]] std::string read_text_file(const std::filesystem::path& path);
[[nodiscard]] std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);
void write_binary_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

/// Splits text into lines, tolerating CRLF and a missing final newline.
[[nodiscard]] std::vector<std::string_view> split_lines(std::string_view text);
/// Plain comma split (the wire formats never quote cells). Cells are trimmed.
[[nodiscard]] std::vector<std::string_view> split_csv_row(std::string_view line);
[[nodiscard]] std::string_view trim(std::string_view text) noexcept;

[[nodiscard]] std::optional<long long> parse_int(std::string_view text) noexcept;
[[nodiscard]] std::optional<double> parse_double(std::string_view text) noexcept;

} // namespace fundus::io

#endif // FUNDUS_IO_HPP
