#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fundus/error.hpp"
#include "fundus/image.hpp"
#include "fundus/io.hpp"
#include "fundus/preprocess.hpp"
#include "fundus/random.hpp"
#include "fundus/synth.hpp"
#include "support/temp_dir.hpp"

using namespace fundus;

namespace {

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected fundus::Error");
    return ErrorCode::RangeError;
}

bool inside(const CropBox& box, int x, int y) {
    return x >= box.x && x < box.x + box.side && y >= box.y && y < box.y + box.side;
}

std::size_t foreground_count(const RasterImage& image) {
    std::size_t n = 0;
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            n += is_foreground(image.pixel(x, y)) ? 1 : 0;
        }
    }
    return n;
}

RasterImage constant_image(int w, int h, std::uint8_t v) {
    RasterImage image(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            image.set(x, y, v, v, v);
        }
    }
    return image;
}

GradeRecord record(const std::string& id) {
    GradeRecord r;
    r.image_id = id;
    r.patient_id = "P" + id;
    r.gradable = true;
    r.pirc = PircGrade(0);
    r.pimec = PimecGrade(0);
    return r;
}

} // namespace

TEST_CASE("RasterImage invariants") {
    CHECK(code_of([] { (void)RasterImage(15, 100); }) == ErrorCode::RangeError);
    CHECK(code_of([] { (void)RasterImage(16, 16, std::vector<std::uint8_t>(10)); }) == ErrorCode::RangeError);
    RasterImage ok(16, 16);
    CHECK(ok.samples().size() == 16 * 16 * 3);
}

TEST_CASE("PNG and JPEG codecs") {
    const auto image = synth::gen_fundus_image(64, 48, 20, false, 1);
    CHECK(decode_png(encode_png(image)) == image);
    CHECK(encode_png(image) == encode_png(image));
    const auto jpeg = decode_jpeg(encode_jpeg(image, 95));
    CHECK(jpeg.width() == 64);
    CHECK(jpeg.height() == 48);
    double err = 0.0;
    for (std::size_t i = 0; i < image.samples().size(); ++i) {
        err += std::abs(int(image.samples()[i]) - int(jpeg.samples()[i]));
    }
    CHECK(err / static_cast<double>(image.samples().size()) < 8.0);
    CHECK(code_of([] { (void)decode_png(std::vector<std::uint8_t>{1, 2, 3}); }) == ErrorCode::IoError);
    CHECK(code_of([] { (void)decode_jpeg(std::vector<std::uint8_t>{0xFF, 0xD8, 0xFF, 0}); }) == ErrorCode::IoError);
}

TEST_CASE("detect_fundus_square: disk of radius 390 in 1000x800") {
    const auto image = synth::gen_fundus_image(1000, 800, 390, false, 7);
    const auto box = detect_fundus_square(image);
    CHECK(std::abs(box.side - 780) <= 2);
    CHECK(std::abs((2 * box.x + box.side) / 2.0 - 500.0) <= 1.0);
    CHECK(std::abs((2 * box.y + box.side) / 2.0 - 400.0) <= 1.0);
}

TEST_CASE("detect_fundus_square: degenerate and idempotent cases") {
    CHECK(code_of([] { (void)detect_fundus_square(RasterImage(100, 100)); }) == ErrorCode::NoFundusDetected);
    // A speck below 1% of the frame.
    RasterImage speck(100, 100);
    for (int y = 0; y < 9; ++y) {
        for (int x = 0; x < 9; ++x) {
            speck.set(x + 40, y + 40, 200, 200, 200);
        }
    }
    CHECK(code_of([&] { (void)detect_fundus_square(speck); }) == ErrorCode::NoFundusDetected);

    const auto tight = synth::gen_fundus_image(601, 601, 300, false, 2);
    const auto box = detect_fundus_square(tight);
    CHECK(std::abs(box.side - 601) <= 2);
    CHECK(std::abs(box.x) <= 1);
    CHECK(std::abs(box.y) <= 1);
}

TEST_CASE("detect_fundus_square: dim pixels at the threshold are background") {
    // Luminance exactly 10 is not foreground, 11 is.
    const std::uint8_t ten[3] = {10, 10, 10};
    const std::uint8_t eleven[3] = {11, 11, 11};
    CHECK_FALSE(is_foreground(ten));
    CHECK(is_foreground(eleven));
}

TEST_CASE("annotation outside the bounding square contributes nothing to the crop") {
    const auto plain = synth::gen_fundus_image(1000, 800, 390, false, 9);
    const auto annotated = synth::gen_fundus_image(1000, 800, 390, true, 9);
    const auto box = detect_fundus_square(annotated);
    CHECK(box == detect_fundus_square(plain));
    std::size_t annotation_pixels = 0;
    std::size_t inside_crop = 0;
    for (int y = 0; y < 800; ++y) {
        for (int x = 0; x < 1000; ++x) {
            if (!std::equal(plain.pixel(x, y), plain.pixel(x, y) + 3, annotated.pixel(x, y))) {
                ++annotation_pixels;
                inside_crop += inside(box, x, y) ? 1 : 0;
            }
        }
    }
    CHECK(annotation_pixels > 100);
    CHECK(inside_crop == 0);
    CHECK(code_of([] { (void)synth::gen_fundus_image(201, 201, 100, true, 1); }) == ErrorCode::RangeError);
}

TEST_CASE("property: crop side and disk retention across geometries") {
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        const int radius = 40 + static_cast<int>(rng.below(200));
        const int width = 2 * radius + 1 + static_cast<int>(rng.below(300));
        const int height = 2 * radius + 1 + static_cast<int>(rng.below(300));
        const auto image = synth::gen_fundus_image(width, height, radius, rng.below(2) == 1 && width > 2 * radius + 40,
                                                   rng.next_u64());
        const auto box = detect_fundus_square(image);
        CAPTURE(width);
        CAPTURE(height);
        CAPTURE(radius);
        CHECK(std::abs(box.side - 2 * radius) <= 2);
        std::size_t disk = 0;
        std::size_t kept = 0;
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                const int dx = x - width / 2;
                const int dy = y - height / 2;
                if (dx * dx + dy * dy <= radius * radius) {
                    ++disk;
                    kept += inside(box, x, y) ? 1 : 0;
                }
            }
        }
        CHECK(static_cast<double>(kept) >= 0.995 * static_cast<double>(disk));
    }
}

TEST_CASE("crop_resize: shape, constants, identity") {
    const auto gray = constant_image(800, 800, 128);
    const auto out = crop_resize(gray, CropBox{10, 10, 780}, TargetSize::of(512));
    CHECK(out.width() == 512);
    CHECK(out.height() == 512);
    CHECK(std::all_of(out.samples().begin(), out.samples().end(), [](std::uint8_t v) { return v == 128; }));
    const auto up = crop_resize(gray, CropBox{0, 0, 100}, TargetSize::of(299));
    CHECK(std::all_of(up.samples().begin(), up.samples().end(), [](std::uint8_t v) { return v == 128; }));

    const auto image = synth::gen_fundus_image(65, 65, 30, false, 4);
    CHECK(crop_resize(image, CropBox{0, 0, 65}, TargetSize::of(65)) == image);
}

TEST_CASE("crop_resize: invalid boxes") {
    const auto gray = constant_image(100, 100, 50);
    CHECK(code_of([&] { (void)crop_resize(gray, CropBox{0, 0, 15}, TargetSize{32}); }) == ErrorCode::InvalidBox);
    CHECK(code_of([&] { (void)crop_resize(gray, CropBox{100, 0, 20}, TargetSize{32}); }) == ErrorCode::InvalidBox);
    CHECK(code_of([&] { (void)crop_resize(gray, CropBox{-20, 0, 20}, TargetSize{32}); }) == ErrorCode::InvalidBox);
    CHECK(code_of([&] { (void)crop_resize(gray, CropBox{0, 0, 20}, TargetSize{8}); }) == ErrorCode::RangeError);
}

TEST_CASE("crop_resize: disk radius scales with the area ratio") {
    const int radius = 390;
    const auto image = synth::gen_fundus_image(1000, 800, radius, false, 5);
    const auto box = detect_fundus_square(image);
    for (int side : kPresetSides) {
        const auto out = crop_resize(image, box, TargetSize::of(side));
        const double measured = std::sqrt(static_cast<double>(foreground_count(out)) / std::numbers::pi);
        const double expected = radius * static_cast<double>(side) / box.side;
        CAPTURE(side);
        CHECK(std::abs(measured - expected) <= 2.0);
    }
}

TEST_CASE("crop_resize: square past the image edge is padded with black") {
    const auto full = synth::gen_fundus_image(1000, 800, 390, false, 6);
    // Drop the top 100 rows so the disk touches the upper edge.
    std::vector<std::uint8_t> samples(full.samples().begin() + 100 * 1000 * 3, full.samples().end());
    const RasterImage cut(1000, 700, std::move(samples));
    const auto box = detect_fundus_square(cut);
    CHECK(box.y < 0);
    CHECK(std::abs(box.side - 780) <= 2);
    const auto out = crop_resize(cut, box, TargetSize::of(256));
    CHECK(out.width() == 256);
    CHECK(out.height() == 256);
    const auto* corner = out.pixel(128, 0);
    CHECK(corner[0] == 0);
    CHECK(corner[1] == 0);
    CHECK(corner[2] == 0);
}

TEST_CASE("parse_sizes") {
    const auto sizes = parse_sizes("512,256,299,256");
    REQUIRE(sizes.size() == 3);
    CHECK(sizes[0].side == 256);
    CHECK(sizes[2].side == 512);
    CHECK(code_of([] { (void)parse_sizes("256,abc"); }) == ErrorCode::RangeError);
    CHECK(code_of([] { (void)parse_sizes("8"); }) == ErrorCode::RangeError);
}

TEST_CASE("run_preprocess: batch, failures, idempotence, job independence") {
    fixtures::TempDir dir("preprocess");
    const auto images = dir / "images";
    std::vector<GradeRecord> records;
    for (int i = 0; i < 3; ++i) {
        const std::string id = "img" + std::to_string(i);
        records.push_back(record(id));
        const auto image = synth::gen_fundus_image(300 + 20 * i, 260, 120, i == 1, static_cast<std::uint64_t>(i));
        if (i == 2) {
            io::write_binary_file(images / (id + ".jpg"), encode_jpeg(image));
        } else {
            write_png(images / (id + ".png"), image);
        }
    }
    records.push_back(record("black"));
    write_png(images / "black.png", RasterImage(64, 64));
    records.push_back(record("missing"));

    PreprocessOptions options{images, {TargetSize::of(256), TargetSize::of(299)}, dir / "out1", 1};
    const auto first = run_preprocess(records, options);
    CHECK(first.processed == std::vector<std::string>{"img0", "img1", "img2"});
    REQUIRE(first.failed.size() == 2);
    CHECK(first.failed[0].image_id == "black");
    CHECK(first.failed[0].code == ErrorCode::NoFundusDetected);
    CHECK(first.failed[1].image_id == "missing");
    CHECK(first.failed[1].code == ErrorCode::IoError);
    CHECK(first.per_size_counts.at(256) == 3);
    CHECK(first.per_size_counts.at(299) == 3);
    CHECK(first.files_written == 6);
    CHECK(read_image(dir / "out1/299/img1.png").width() == 299);

    const auto second = run_preprocess(records, options);
    CHECK(second.files_written == 0);
    CHECK(second.rewrites == 0);
    CHECK(preprocess_report_json(second).find("\"rewrites\": 0") != std::string::npos);

    options.out_dir = dir / "out3";
    options.jobs = 3;
    const auto parallel = run_preprocess(records, options);
    CHECK(parallel.processed == first.processed);
    for (const char* size : {"256", "299"}) {
        for (const auto& id : first.processed) {
            const auto rel = std::filesystem::path(size) / (id + ".png");
            CHECK(io::read_binary_file(dir / "out1" / rel) == io::read_binary_file(dir / "out3" / rel));
        }
    }

    // A changed output on disk counts as a rewrite.
    io::write_binary_file(dir / "out1/256/img0.png", {1, 2, 3});
    options.out_dir = dir / "out1";
    const auto third = run_preprocess(records, options);
    CHECK(third.rewrites == 1);
    CHECK(third.files_written == 1);
}

TEST_CASE("preprocess report JSON shape") {
    PreprocessReport report;
    report.processed = {"a"};
    report.failed.push_back({"b", ErrorCode::NoFundusDetected, "NoFundusDetected: x"});
    report.per_size_counts[256] = 1;
    const auto json = preprocess_report_json(report);
    CHECK(json.find("\"processed\"") < json.find("\"failed\""));
    CHECK(json.find("\"error\": \"NoFundusDetected\"") != std::string::npos);
    CHECK(json.find("\"256\": 1") != std::string::npos);
}
