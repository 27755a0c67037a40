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

#include <algorithm>
#include <unordered_set>

#include "fundus/error.hpp"
#include "fundus/grading.hpp"
#include "fundus/io.hpp"

namespace fundus {

namespace {

constexpr std::array<std::string_view, 7> kManifestColumns{"image_id", "patient_id", "eye",  "field",
                                                           "gradable", "pirc",       "pimec"};
constexpr std::string_view kDisagreementColumn = "disagreement";

std::string_view strip_bom(std::string_view text) {
    constexpr std::string_view bom = "\xEF\xBB\xBF";
    if (text.substr(0, bom.size()) == bom) {
        text.remove_prefix(bom.size());
    }
    return text;
}

// Returns the first nonblank line index, or lines.size() when there is none.
std::size_t first_content_line(const std::vector<std::string_view>& lines) {
    std::size_t i = 0;
    while (i < lines.size() && io::trim(lines[i]).empty()) {
        ++i;
    }
    return i;
}

std::optional<int> parse_grade_cell(std::string_view cell, std::string& error, std::string_view name, int max) {
    if (cell.empty()) {
        return std::nullopt;
    }
    const auto value = io::parse_int(cell);
    if (!value) {
        error = std::string(name) + " '" + std::string(cell) + "' is not an integer";
        return std::nullopt;
    }
    if (*value < 0 || *value > max) {
        error = std::string(name) + " " + std::to_string(*value) + " outside [0," + std::to_string(max) + "]";
        return std::nullopt;
    }
    return static_cast<int>(*value);
}

} // namespace

ManifestParseResult parse_manifest(std::string_view text, ManifestOptions options) {
    const auto lines = io::split_lines(strip_bom(text));
    const std::size_t header_index = first_content_line(lines);
    if (header_index == lines.size()) {
        throw Error(ErrorCode::FatalFormat, "manifest is empty (header row required)");
    }
    const auto header = io::split_csv_row(lines[header_index]);
    const bool has_disagreement = header.size() == kManifestColumns.size() + 1;
    const bool header_ok =
        (header.size() == kManifestColumns.size() || has_disagreement) &&
        std::equal(kManifestColumns.begin(), kManifestColumns.end(), header.begin()) &&
        (!has_disagreement || header.back() == kDisagreementColumn);
    if (!header_ok) {
        throw Error(ErrorCode::FatalFormat, "manifest header must be "
                                            "'image_id,patient_id,eye,field,gradable,pirc,pimec[,disagreement]', got '" +
                                                std::string(lines[header_index]) + "'");
    }

    ManifestParseResult result;
    std::unordered_set<std::string> seen;
    for (std::size_t i = header_index + 1; i < lines.size(); ++i) {
        const std::size_t line_no = i + 1;
        if (io::trim(lines[i]).empty()) {
            continue;
        }
        const auto cells = io::split_csv_row(lines[i]);
        auto reject = [&](std::string message) { result.diagnostics.push_back({line_no, std::move(message)}); };
        if (cells.size() != header.size()) {
            reject("expected " + std::to_string(header.size()) + " columns, found " + std::to_string(cells.size()));
            continue;
        }

        GradeRecord record;
        record.image_id = std::string(cells[0]);
        record.patient_id = std::string(cells[1]);
        if (record.image_id.empty() || record.patient_id.empty()) {
            reject("image_id and patient_id must be nonempty");
            continue;
        }
        if (cells[2] == "L") {
            record.eye = Eye::Left;
        } else if (cells[2] == "R") {
            record.eye = Eye::Right;
        } else {
            reject("eye must be L or R, got '" + std::string(cells[2]) + "'");
            continue;
        }
        if (cells[3] == "fovea") {
            record.field = Field::Fovea;
        } else if (cells[3] == "optic_disc") {
            record.field = Field::OpticDisc;
        } else {
            reject("field must be fovea or optic_disc, got '" + std::string(cells[3]) + "'");
            continue;
        }
        if (cells[4] == "1") {
            record.gradable = true;
        } else if (cells[4] == "0") {
            record.gradable = false;
        } else {
            reject("gradable must be 0 or 1, got '" + std::string(cells[4]) + "'");
            continue;
        }

        std::string error;
        const auto pirc = parse_grade_cell(cells[5], error, "pirc", PircGrade::kMax);
        if (!error.empty()) {
            reject(error);
            continue;
        }
        const auto pimec = parse_grade_cell(cells[6], error, "pimec", PimecGrade::kMax);
        if (!error.empty()) {
            reject(error);
            continue;
        }
        if (record.gradable && (!pirc || !pimec)) {
            reject("invariant violated: gradable=1 requires both pirc and pimec");
            continue;
        }
        if (!record.gradable && (pirc || pimec)) {
            reject("invariant violated: gradable=0 requires empty pirc and pimec");
            continue;
        }
        if (pirc) {
            record.pirc = PircGrade(*pirc);
        }
        if (pimec) {
            record.pimec = PimecGrade(*pimec);
        }
        if (has_disagreement) {
            record.disagreement = std::string(cells[7]);
        }
        if (!seen.insert(record.image_id).second) {
            reject("duplicate image_id '" + record.image_id + "'");
            continue;
        }
        if (options.drop_flagged && !record.disagreement.empty()) {
            continue;
        }
        result.records.push_back(std::move(record));
    }
    return result;
}

ManifestParseResult read_manifest(const std::string& path, ManifestOptions options) {
    return parse_manifest(io::read_text_file(path), options);
}

std::string serialize_manifest(std::span<const GradeRecord> records) {
    const bool with_flag =
        std::any_of(records.begin(), records.end(), [](const GradeRecord& r) { return !r.disagreement.empty(); });
    std::string out = "image_id,patient_id,eye,field,gradable,pirc,pimec";
    out += with_flag ? ",disagreement\n" : "\n";
    for (const auto& r : records) {
        out += r.image_id;
        out += ',';
        out += r.patient_id;
        out += r.eye == Eye::Left ? ",L" : ",R";
        out += r.field == Field::Fovea ? ",fovea" : ",optic_disc";
        out += r.gradable ? ",1," : ",0,";
        if (r.pirc) {
            out += std::to_string(r.pirc->value());
        }
        out += ',';
        if (r.pimec) {
            out += std::to_string(r.pimec->value());
        }
        if (with_flag) {
            out += ',';
            out += r.disagreement;
        }
        out += '\n';
    }
    return out;
}

MessidorParseResult parse_messidor_labels(std::string_view text) {
    const auto lines = io::split_lines(strip_bom(text));
    const std::size_t header_index = first_content_line(lines);
    if (header_index == lines.size()) {
        throw Error(ErrorCode::FatalFormat, "Messidor label file is empty");
    }
    const auto header = io::split_csv_row(lines[header_index]);
    if (header.size() != 3 || header[0] != "image_id" || header[1] != "retinopathy_grade" ||
        header[2] != "edema_risk") {
        throw Error(ErrorCode::FatalFormat, "Messidor header must be 'image_id,retinopathy_grade,edema_risk'");
    }
    MessidorParseResult result;
    for (std::size_t i = header_index + 1; i < lines.size(); ++i) {
        if (io::trim(lines[i]).empty()) {
            continue;
        }
        const auto cells = io::split_csv_row(lines[i]);
        const auto grade = cells.size() == 3 ? io::parse_int(cells[1]) : std::nullopt;
        const auto risk = cells.size() == 3 ? io::parse_int(cells[2]) : std::nullopt;
        if (cells.size() != 3 || cells[0].empty() || !grade || !risk) {
            result.diagnostics.push_back({i + 1, "malformed Messidor row"});
            continue;
        }
        if (*grade < 0 || *grade > 3 || *risk < 0 || *risk > 2) {
            result.diagnostics.push_back({i + 1, "Messidor grade out of range"});
            continue;
        }
        result.records.push_back({std::string(cells[0]), static_cast<int>(*grade), static_cast<int>(*risk)});
    }
    return result;
}

} // namespace fundus
