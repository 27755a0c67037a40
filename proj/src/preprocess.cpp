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

#include "fundus/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <system_error>

#include <nlohmann/json.hpp>

#include "fundus/io.hpp"
#include "fundus/parallel.hpp"

namespace fundus {

namespace {

struct Taps {
    int first = 0; ///< unclamped index of the leftmost tap
    std::array<double, 4> weights{};
};

double catmull_rom(double t) {
    constexpr double a = -0.5;
    t = std::abs(t);
    if (t <= 1.0) {
        return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
    }
    if (t < 2.0) {
        return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
    }
    return 0.0;
}

// Pixel-centre mapping from `target` output samples onto `source` input samples.
std::vector<Taps> make_taps(int source, int target) {
    std::vector<Taps> taps(static_cast<std::size_t>(target));
    const double scale = static_cast<double>(source) / static_cast<double>(target);
    for (int d = 0; d < target; ++d) {
        const double u = (d + 0.5) * scale - 0.5;
        const double base = std::floor(u);
        auto& t = taps[static_cast<std::size_t>(d)];
        t.first = static_cast<int>(base) - 1;
        for (int k = 0; k < 4; ++k) {
            t.weights[static_cast<std::size_t>(k)] = catmull_rom(u - (base - 1.0 + k));
        }
    }
    return taps;
}

std::uint8_t to_sample(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
}

bool same_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec) || std::filesystem::file_size(path, ec) != bytes.size()) {
        return false;
    }
    return io::read_binary_file(path) == bytes;
}

} // namespace

TargetSize TargetSize::of(int side) {
    if (side < RasterImage::kMinSide) {
        throw Error(ErrorCode::RangeError, "target size must be at least 16, got " + std::to_string(side));
    }
    return TargetSize{side};
}

std::vector<TargetSize> parse_sizes(std::string_view text) {
    std::vector<TargetSize> sizes;
    for (auto cell : io::split_csv_row(text)) {
        const auto value = io::parse_int(cell);
        if (!value || *value > 1'000'000) {
            throw Error(ErrorCode::RangeError, "invalid size '" + std::string(cell) + "'");
        }
        sizes.push_back(TargetSize::of(static_cast<int>(*value)));
    }
    std::sort(sizes.begin(), sizes.end());
    sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
    if (sizes.empty()) {
        throw Error(ErrorCode::RangeError, "no target sizes given");
    }
    return sizes;
}

bool is_foreground(const std::uint8_t* rgb) noexcept {
    // 0.299R + 0.587G + 0.114B > 10, in integer thousandths.
    return 299 * rgb[0] + 587 * rgb[1] + 114 * rgb[2] > 10'000;
}

CropBox detect_fundus_square(const RasterImage& image) {
    const int w = image.width();
    const int h = image.height();
    const auto n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    std::vector<std::uint8_t> state(n, 0); // 0 background, 1 unvisited foreground, 2 visited
    for (std::size_t i = 0; i < n; ++i) {
        state[i] = is_foreground(image.samples().data() + 3 * i) ? 1 : 0;
    }

    struct Component {
        std::size_t size = 0;
        int min_x = 0, max_x = 0, min_y = 0, max_y = 0;
    };
    Component best;
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < n; ++start) {
        if (state[start] != 1) {
            continue;
        }
        Component c;
        c.min_x = c.max_x = static_cast<int>(start % static_cast<std::size_t>(w));
        c.min_y = c.max_y = static_cast<int>(start / static_cast<std::size_t>(w));
        state[start] = 2;
        stack.push_back(start);
        while (!stack.empty()) {
            const std::size_t i = stack.back();
            stack.pop_back();
            ++c.size;
            const int x = static_cast<int>(i % static_cast<std::size_t>(w));
            const int y = static_cast<int>(i / static_cast<std::size_t>(w));
            c.min_x = std::min(c.min_x, x);
            c.max_x = std::max(c.max_x, x);
            c.min_y = std::min(c.min_y, y);
            c.max_y = std::max(c.max_y, y);
            auto visit = [&](std::size_t j) {
                if (state[j] == 1) {
                    state[j] = 2;
                    stack.push_back(j);
                }
            };
            if (x > 0) visit(i - 1);
            if (x + 1 < w) visit(i + 1);
            if (y > 0) visit(i - static_cast<std::size_t>(w));
            if (y + 1 < h) visit(i + static_cast<std::size_t>(w));
        }
        if (c.size > best.size) {
            best = c;
        }
    }
    if (best.size * 100 < n) {
        throw Error(ErrorCode::NoFundusDetected,
                    "largest foreground region covers " + std::to_string(best.size) + " of " + std::to_string(n) +
                        " pixels (< 1%)");
    }
    const int bw = best.max_x - best.min_x + 1;
    const int bh = best.max_y - best.min_y + 1;
    CropBox box;
    box.side = std::max({bw, bh, RasterImage::kMinSide});
    box.x = best.min_x - (box.side - bw) / 2;
    box.y = best.min_y - (box.side - bh) / 2;
    return box;
}

RasterImage crop_resize(const RasterImage& image, const CropBox& box, TargetSize target) {
    if (box.side < RasterImage::kMinSide) {
        throw Error(ErrorCode::InvalidBox, "crop side must be at least 16, got " + std::to_string(box.side));
    }
    if (box.x >= image.width() || box.y >= image.height() || box.x + box.side <= 0 || box.y + box.side <= 0) {
        throw Error(ErrorCode::InvalidBox, "crop box does not overlap the image");
    }
    const int s = box.side;
    const int t = TargetSize::of(target.side).side;
    const auto taps = make_taps(s, t);
    auto clamp_tap = [s](int i) { return std::clamp(i, 0, s - 1); };

    // Horizontal pass for one box row, evaluated lazily; vertical taps move
    // monotonically so only a few rows are alive at any time.
    std::map<int, std::vector<double>> rows;
    auto horizontal = [&](int row) -> const std::vector<double>& {
        auto it = rows.find(row);
        if (it != rows.end()) {
            return it->second;
        }
        std::vector<double> out(static_cast<std::size_t>(t) * 3, 0.0);
        const int sy = box.y + row;
        if (sy >= 0 && sy < image.height()) {
            for (int d = 0; d < t; ++d) {
                const auto& tap = taps[static_cast<std::size_t>(d)];
                double acc[3] = {0.0, 0.0, 0.0};
                for (int k = 0; k < 4; ++k) {
                    const int sx = box.x + clamp_tap(tap.first + k);
                    if (sx < 0 || sx >= image.width()) {
                        continue;
                    }
                    const auto* p = image.pixel(sx, sy);
                    const double wk = tap.weights[static_cast<std::size_t>(k)];
                    acc[0] += wk * p[0];
                    acc[1] += wk * p[1];
                    acc[2] += wk * p[2];
                }
                std::copy(acc, acc + 3, out.begin() + static_cast<std::ptrdiff_t>(d) * 3);
            }
        }
        return rows.emplace(row, std::move(out)).first->second;
    };

    RasterImage result(t, t);
    for (int d = 0; d < t; ++d) {
        const auto& tap = taps[static_cast<std::size_t>(d)];
        rows.erase(rows.begin(), rows.lower_bound(clamp_tap(tap.first)));
        const std::vector<double>* src[4];
        for (int k = 0; k < 4; ++k) {
            src[k] = &horizontal(clamp_tap(tap.first + k));
        }
        auto* out = result.pixel(0, d);
        for (std::size_t i = 0; i < static_cast<std::size_t>(t) * 3; ++i) {
            double v = 0.0;
            for (int k = 0; k < 4; ++k) {
                v += tap.weights[static_cast<std::size_t>(k)] * (*src[k])[i];
            }
            out[i] = to_sample(v);
        }
    }
    return result;
}

std::optional<std::filesystem::path> locate_image(const std::filesystem::path& images_dir,
                                                  const std::string& image_id) {
    for (const char* ext : {".png", ".jpg", ".jpeg"}) {
        auto candidate = images_dir / (image_id + ext);
        std::error_code ec;
        if (std::filesystem::is_regular_file(candidate, ec)) {
            return candidate;
        }
    }
    return std::nullopt;
}

PreprocessReport run_preprocess(const std::vector<GradeRecord>& records, const PreprocessOptions& options) {
    if (options.sizes.empty()) {
        throw Error(ErrorCode::RangeError, "no target sizes given");
    }
    std::vector<std::string> ids;
    ids.reserve(records.size());
    for (const auto& r : records) {
        ids.push_back(r.image_id);
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    for (const auto& size : options.sizes) {
        std::error_code ec;
        std::filesystem::create_directories(options.out_dir / std::to_string(size.side), ec);
        if (ec) {
            throw Error(ErrorCode::IoError, "cannot create " + (options.out_dir / std::to_string(size.side)).string());
        }
    }

    struct Outcome {
        std::optional<PreprocessFailure> failure;
        std::size_t written = 0;
        std::size_t rewritten = 0;
    };
    std::vector<Outcome> outcomes(ids.size());
    parallel_for(ids.size(), options.jobs, [&](std::size_t i) {
        auto& outcome = outcomes[i];
        try {
            const auto source = locate_image(options.images_dir, ids[i]);
            if (!source) {
                throw Error(ErrorCode::IoError, "no image file for '" + ids[i] + "' in " + options.images_dir.string());
            }
            const auto image = read_image(*source);
            const auto box = detect_fundus_square(image);
            for (const auto& size : options.sizes) {
                const auto bytes = encode_png(crop_resize(image, box, size));
                const auto path = options.out_dir / std::to_string(size.side) / (ids[i] + ".png");
                if (same_bytes(path, bytes)) {
                    continue;
                }
                std::error_code ec;
                if (std::filesystem::exists(path, ec)) {
                    ++outcome.rewritten;
                }
                io::write_binary_file(path, bytes);
                ++outcome.written;
            }
        } catch (const Error& e) {
            outcome.failure = PreprocessFailure{ids[i], e.code(), e.what()};
        }
    });

    PreprocessReport report;
    for (const auto& size : options.sizes) {
        report.per_size_counts[size.side] = 0;
    }
    for (std::size_t i = 0; i < ids.size(); ++i) {
        auto& outcome = outcomes[i];
        report.files_written += outcome.written;
        report.rewrites += outcome.rewritten;
        if (outcome.failure) {
            report.failed.push_back(std::move(*outcome.failure));
            continue;
        }
        report.processed.push_back(ids[i]);
        for (const auto& size : options.sizes) {
            ++report.per_size_counts[size.side];
        }
    }
    return report;
}

std::string preprocess_report_json(const PreprocessReport& report) {
    nlohmann::ordered_json doc;
    doc["processed"] = report.processed;
    doc["failed"] = nlohmann::ordered_json::array();
    for (const auto& f : report.failed) {
        doc["failed"].push_back({{"image_id", f.image_id}, {"error", error_code_name(f.code)}, {"message", f.message}});
    }
    auto& counts = doc["per_size_counts"] = nlohmann::ordered_json::object();
    for (const auto& [side, count] : report.per_size_counts) {
        counts[std::to_string(side)] = count;
    }
    doc["files_written"] = report.files_written;
    doc["rewrites"] = report.rewrites;
    return doc.dump(2) + "\n";
}

} // namespace fundus
