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

#ifndef FUNDUS_IMAGE_HPP
#define FUNDUS_IMAGE_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace fundus {

/// 8-bit RGB raster, row-major, interleaved.
class RasterImage {
public:
    static constexpr int kMinSide = 16;

    /// Black image. Throws RangeError when a side is below kMinSide.
    RasterImage(int width, int height);
    RasterImage(int width, int height, std::vector<std::uint8_t> samples);

    [[nodiscard]] int width() const noexcept { return width_; }
    [[nodiscard]] int height() const noexcept { return height_; }
    [[nodiscard]] const std::vector<std::uint8_t>& samples() const noexcept { return samples_; }

    [[nodiscard]] std::uint8_t* pixel(int x, int y) noexcept { return samples_.data() + offset(x, y); }
    [[nodiscard]] const std::uint8_t* pixel(int x, int y) const noexcept { return samples_.data() + offset(x, y); }
    void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) noexcept {
        auto* p = pixel(x, y);
        p[0] = r;
        p[1] = g;
        p[2] = b;
    }

    bool operator==(const RasterImage&) const = default;

private:
    [[nodiscard]] std::size_t offset(int x, int y) const noexcept {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)) * 3;
    }

    int width_;
    int height_;
    std::vector<std::uint8_t> samples_;
};

/// Codecs. Decoders convert any colour type to RGB8; failures raise IoError.
[[nodiscard]] RasterImage decode_png(std::span<const std::uint8_t> bytes);
[[nodiscard]] std::vector<std::uint8_t> encode_png(const RasterImage& image);
[[nodiscard]] RasterImage decode_jpeg(std::span<const std::uint8_t> bytes);
[[nodiscard]] std::vector<std::uint8_t> encode_jpeg(const RasterImage& image, int quality = 95);

/// Reads a PNG or JPEG file, chosen by signature rather than extension.
[[nodiscard]] RasterImage read_image(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const RasterImage& image);

} // namespace fundus

#endif // FUNDUS_IMAGE_HPP
