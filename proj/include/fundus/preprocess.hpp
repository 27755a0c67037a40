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

#ifndef FUNDUS_PREPROCESS_HPP
#define FUNDUS_PREPROCESS_HPP

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fundus/error.hpp"
#include "fundus/grading.hpp"
#include "fundus/image.hpp"

namespace fundus {

/// Square crop region in source pixel coordinates. It may extend past the
/// image edges; samples outside the image read as black.
struct CropBox {
    int x = 0;
    int y = 0;
    int side = 0;

    bool operator==(const CropBox&) const = default;
};

struct TargetSize {
    int side = 0;

    /// Throws RangeError when side < 16.
    static TargetSize of(int side);
    bool operator==(const TargetSize&) const = default;
    auto operator<=>(const TargetSize&) const = default;
};

inline constexpr std::array<int, 5> kPresetSides{256, 299, 512, 1024, 2095};

/// Parses a comma-separated size list such as "256,299,512".
[[nodiscard]] std::vector<TargetSize> parse_sizes(std::string_view text);

/// Foreground is luminance above 10 on the 0..255 scale.
[[nodiscard]] bool is_foreground(const std::uint8_t* rgb) noexcept;

/// Tight bounding square of the largest 4-connected foreground component,
/// centred on that component's bounding-box centre.
/// Throws NoFundusDetected when the component covers less than 1% of the image.
[[nodiscard]] CropBox detect_fundus_square(const RasterImage& image);

/// Catmull-Rom resample of the box to target.side x target.side.
/// Throws InvalidBox when the box is smaller than 16 px or misses the image entirely.
[[nodiscard]] RasterImage crop_resize(const RasterImage& image, const CropBox& box, TargetSize target);

struct PreprocessFailure {
    std::string image_id;
    ErrorCode code = ErrorCode::IoError;
    std::string message;
};

struct PreprocessReport {
    std::vector<std::string> processed; ///< image ids, ascending
    std::vector<PreprocessFailure> failed; ///< ascending by image id
    std::map<int, std::size_t> per_size_counts;
    std::size_t files_written = 0; ///< new or changed files
    std::size_t rewrites = 0; ///< existing files whose bytes changed
};

struct PreprocessOptions {
    std::filesystem::path images_dir;
    std::vector<TargetSize> sizes;
    std::filesystem::path out_dir;
    unsigned jobs = 1;
};

/// Locates `<images_dir>/<image_id>.{png,jpg,jpeg}`, or nullopt.
[[nodiscard]] std::optional<std::filesystem::path> locate_image(const std::filesystem::path& images_dir,
                                                                const std::string& image_id);

/// Writes `<out_dir>/<side>/<image_id>.png` for every record and size. Per-image
/// failures are collected in the report; the batch always runs to completion.
/// Existing files with identical bytes are left untouched.
[[nodiscard]] PreprocessReport run_preprocess(const std::vector<GradeRecord>& records, const PreprocessOptions& options);

[[nodiscard]] std::string preprocess_report_json(const PreprocessReport& report);

} // namespace fundus

#endif // FUNDUS_PREPROCESS_HPP
