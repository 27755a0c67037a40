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

#include "fundus/image.hpp"

#include <algorithm>
#include <csetjmp>
#include <cstdio>
#include <cstdlib>
#include <string>

#include <jpeglib.h>
#include <png.h>

#include "fundus/error.hpp"
#include "fundus/io.hpp"

namespace fundus {

namespace {

void check_dimensions(int width, int height) {
    if (width < RasterImage::kMinSide || height < RasterImage::kMinSide) {
        throw Error(ErrorCode::RangeError, "image must be at least 16x16, got " + std::to_string(width) + "x" +
                                               std::to_string(height));
    }
}

struct JpegErrorManager {
    jpeg_error_mgr base;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

// Recoverable warnings (e.g. a truncated scan) are tolerated silently.
void jpeg_silent(j_common_ptr) {}

} // namespace

RasterImage::RasterImage(int width, int height) : width_(width), height_(height) {
    check_dimensions(width, height);
    samples_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3, 0);
}

RasterImage::RasterImage(int width, int height, std::vector<std::uint8_t> samples)
    : width_(width), height_(height), samples_(std::move(samples)) {
    check_dimensions(width, height);
    if (samples_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3) {
        throw Error(ErrorCode::RangeError, "sample buffer does not match image dimensions");
    }
}

RasterImage decode_png(std::span<const std::uint8_t> bytes) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
        throw Error(ErrorCode::IoError, std::string("PNG decode failed: ") + image.message);
    }
    image.format = PNG_FORMAT_RGB;
    const auto width = static_cast<int>(image.width);
    const auto height = static_cast<int>(image.height);
    std::vector<std::uint8_t> samples(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, samples.data(), 0, nullptr)) {
        png_image_free(&image);
        throw Error(ErrorCode::IoError, std::string("PNG decode failed: ") + image.message);
    }
    return {width, height, std::move(samples)};
}

std::vector<std::uint8_t> encode_png(const RasterImage& raster) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (png == nullptr) {
        throw Error(ErrorCode::IoError, "PNG encode failed: out of memory");
    }
    png_infop info = png_create_info_struct(png);
    std::vector<std::uint8_t> out;
    if (info == nullptr || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorCode::IoError, "PNG encode failed");
    }
    png_set_write_fn(
        png, &out,
        [](png_structp p, png_bytep data, png_size_t length) {
            auto* buffer = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(p));
            buffer->insert(buffer->end(), data, data + length);
        },
        nullptr);
    png_set_IHDR(png, info, static_cast<png_uint_32>(raster.width()), static_cast<png_uint_32>(raster.height()), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    // Fixed filter and a low zlib level; noisy fundus content barely compresses anyway.
    png_set_filter(png, PNG_FILTER_TYPE_BASE, PNG_FILTER_SUB);
    png_set_compression_level(png, 2);
    png_write_info(png, info);
    const auto stride = static_cast<std::size_t>(raster.width()) * 3;
    for (int y = 0; y < raster.height(); ++y) {
        // libpng takes a non-const row pointer but does not modify it.
        png_write_row(png, const_cast<png_bytep>(raster.samples().data() + static_cast<std::size_t>(y) * stride));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

RasterImage decode_jpeg(std::span<const std::uint8_t> bytes) {
    jpeg_decompress_struct cinfo{};
    JpegErrorManager err{};
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    err.base.output_message = jpeg_silent;
    std::vector<std::uint8_t> samples;
    int width = 0;
    int height = 0;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw Error(ErrorCode::IoError, std::string("JPEG decode failed: ") + err.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    width = static_cast<int>(cinfo.output_width);
    height = static_cast<int>(cinfo.output_height);
    samples.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = samples.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return {width, height, std::move(samples)};
}

std::vector<std::uint8_t> encode_jpeg(const RasterImage& raster, int quality) {
    jpeg_compress_struct cinfo{};
    JpegErrorManager err{};
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    err.base.output_message = jpeg_silent;
    unsigned char* buffer = nullptr;
    unsigned long size = 0;
    if (setjmp(err.jump)) {
        jpeg_destroy_compress(&cinfo);
        std::free(buffer);
        throw Error(ErrorCode::IoError, std::string("JPEG encode failed: ") + err.message);
    }
    jpeg_create_compress(&cinfo);
    jpeg_mem_dest(&cinfo, &buffer, &size);
    cinfo.image_width = static_cast<JDIMENSION>(raster.width());
    cinfo.image_height = static_cast<JDIMENSION>(raster.height());
    cinfo.input_components = 3;
    cinfo.in_color_space = JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    while (cinfo.next_scanline < cinfo.image_height) {
        auto* row = const_cast<JSAMPROW>(raster.samples().data() +
                                         static_cast<std::size_t>(cinfo.next_scanline) * raster.width() * 3);
        jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    std::vector<std::uint8_t> out(buffer, buffer + size);
    jpeg_destroy_compress(&cinfo);
    std::free(buffer);
    return out;
}

RasterImage read_image(const std::filesystem::path& path) {
    const auto bytes = io::read_binary_file(path);
    static constexpr std::uint8_t kPngSignature[] = {0x89, 'P', 'N', 'G'};
    if (bytes.size() >= 4 && std::equal(std::begin(kPngSignature), std::end(kPngSignature), bytes.begin())) {
        return decode_png(bytes);
    }
    if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) {
        return decode_jpeg(bytes);
    }
    throw Error(ErrorCode::IoError, "unrecognised image format: " + path.string());
}

void write_png(const std::filesystem::path& path, const RasterImage& image) {
    io::write_binary_file(path, encode_png(image));
}

} // namespace fundus
