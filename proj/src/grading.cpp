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

#include "fundus/grading.hpp"

#include <algorithm>
#include <cctype>

#include "fundus/error.hpp"

namespace fundus {

std::string_view error_code_name(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::UngradableForSystem: return "UngradableForSystem";
    case ErrorCode::MissingGrade: return "MissingGrade";
    case ErrorCode::FatalFormat: return "FatalFormat";
    case ErrorCode::RangeError: return "RangeError";
    case ErrorCode::EmptyPatient: return "EmptyPatient";
    case ErrorCode::InfeasibleSplit: return "InfeasibleSplit";
    case ErrorCode::UnassignedRecord: return "UnassignedRecord";
    case ErrorCode::NoFundusDetected: return "NoFundusDetected";
    case ErrorCode::InvalidBox: return "InvalidBox";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::DegenerateClasses: return "DegenerateClasses";
    case ErrorCode::EmptyMatrix: return "EmptyMatrix";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::DegenerateMarginals: return "DegenerateMarginals";
    case ErrorCode::DegenerateReplicates: return "DegenerateReplicates";
    case ErrorCode::Unattainable: return "Unattainable";
    }
    return "Unknown";
}

PircGrade::PircGrade(int value) : value_(value) {
    if (value < 0 || value > kMax) {
        throw Error(ErrorCode::RangeError, "PIRC grade " + std::to_string(value) + " outside [0,4]");
    }
}

PimecGrade::PimecGrade(int value) : value_(value) {
    if (value < 0 || value > kMax) {
        throw Error(ErrorCode::RangeError, "PIMEC grade " + std::to_string(value) + " outside [0,3]");
    }
}

std::size_t class_count(GradingSystem system) noexcept {
    switch (system) {
    case GradingSystem::PIRC: return 5;
    case GradingSystem::PIMEC: return 4;
    case GradingSystem::RDR: return 2;
    case GradingSystem::RDME: return 2;
    case GradingSystem::QRDR: return 3;
    }
    return 0;
}

std::string_view system_token(GradingSystem system) noexcept {
    switch (system) {
    case GradingSystem::PIRC: return "pirc";
    case GradingSystem::PIMEC: return "pimec";
    case GradingSystem::RDR: return "rdr";
    case GradingSystem::RDME: return "rdme";
    case GradingSystem::QRDR: return "qrdr";
    }
    return "";
}

std::string_view system_display_name(GradingSystem system) noexcept {
    switch (system) {
    case GradingSystem::PIRC: return "PIRC";
    case GradingSystem::PIMEC: return "PIMEC";
    case GradingSystem::RDR: return "NRDR/RDR";
    case GradingSystem::RDME: return "NRDME/RDME";
    case GradingSystem::QRDR: return "Ungradable/NRDR/RDR";
    }
    return "";
}

std::string_view class_name(GradingSystem system, std::size_t index) {
    static constexpr std::array<std::string_view, 5> pirc{"No apparent DR", "Mild NPDR", "Moderate NPDR",
                                                          "Severe NPDR", "PDR"};
    static constexpr std::array<std::string_view, 4> pimec{"No apparent DME", "Mild DME", "Moderate DME",
                                                           "Severe DME"};
    static constexpr std::array<std::string_view, 2> rdr{"NRDR", "RDR"};
    static constexpr std::array<std::string_view, 2> rdme{"NRDME", "RDME"};
    static constexpr std::array<std::string_view, 3> qrdr{"Ungradable", "NRDR", "RDR"};
    if (index >= class_count(system)) {
        throw Error(ErrorCode::RangeError, "class index out of range for " + std::string(system_token(system)));
    }
    switch (system) {
    case GradingSystem::PIRC: return pirc[index];
    case GradingSystem::PIMEC: return pimec[index];
    case GradingSystem::RDR: return rdr[index];
    case GradingSystem::RDME: return rdme[index];
    case GradingSystem::QRDR: return qrdr[index];
    }
    return "";
}

GradingSystem parse_system(std::string_view text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    for (auto system : kAllSystems) {
        if (lower == system_token(system)) {
            return system;
        }
    }
    throw Error(ErrorCode::RangeError, "unknown grading system '" + std::string(text) + "'");
}

bool requires_grades(GradingSystem system) noexcept { return system != GradingSystem::QRDR; }

void validate_record(const GradeRecord& record) {
    if (record.image_id.empty() || record.patient_id.empty()) {
        throw Error(ErrorCode::RangeError, "image_id and patient_id must be nonempty");
    }
    if (record.gradable && (!record.pirc || !record.pimec)) {
        throw Error(ErrorCode::MissingGrade, "gradable image '" + record.image_id + "' requires pirc and pimec");
    }
    if (!record.gradable && (record.pirc || record.pimec)) {
        throw Error(ErrorCode::RangeError, "ungradable image '" + record.image_id + "' must not carry grades");
    }
}

ClassLabel::ClassLabel(GradingSystem system, std::size_t index) : system_(system), index_(index) {
    if (index >= class_count(system)) {
        throw Error(ErrorCode::RangeError, "class index " + std::to_string(index) + " outside system " +
                                               std::string(system_token(system)));
    }
}

ClassLabel derive_class(GradingSystem system, const GradeRecord& record) {
    if (!record.gradable) {
        if (system == GradingSystem::QRDR) {
            return {system, 0};
        }
        throw Error(ErrorCode::UngradableForSystem,
                    "image '" + record.image_id + "' is ungradable; " + std::string(system_token(system)) +
                        " requires grades");
    }
    const auto need_pirc = [&]() -> int {
        if (!record.pirc) {
            throw Error(ErrorCode::MissingGrade, "image '" + record.image_id + "' has no pirc grade");
        }
        return record.pirc->value();
    };
    const auto need_pimec = [&]() -> int {
        if (!record.pimec) {
            throw Error(ErrorCode::MissingGrade, "image '" + record.image_id + "' has no pimec grade");
        }
        return record.pimec->value();
    };
    switch (system) {
    case GradingSystem::PIRC: return {system, static_cast<std::size_t>(need_pirc())};
    case GradingSystem::PIMEC: return {system, static_cast<std::size_t>(need_pimec())};
    case GradingSystem::RDR: return {system, need_pirc() >= 2 ? 1U : 0U};
    case GradingSystem::RDME: return {system, need_pimec() >= 1 ? 1U : 0U};
    case GradingSystem::QRDR: return {system, need_pirc() >= 2 ? 2U : 1U};
    }
    throw Error(ErrorCode::RangeError, "unknown grading system");
}

std::vector<LabeledRecord> records_for_system(std::span<const GradeRecord> records, GradingSystem system) {
    std::vector<LabeledRecord> out;
    out.reserve(records.size());
    for (const auto& record : records) {
        if (!record.gradable && requires_grades(system)) {
            continue;
        }
        out.emplace_back(record, derive_class(system, record));
    }
    return out;
}

MessidorLabels map_messidor(int retinopathy_grade, int edema_risk) {
    if (retinopathy_grade < 0 || retinopathy_grade > 3) {
        throw Error(ErrorCode::RangeError,
                    "Messidor retinopathy grade " + std::to_string(retinopathy_grade) + " outside [0,3]");
    }
    if (edema_risk < 0 || edema_risk > 2) {
        throw Error(ErrorCode::RangeError, "Messidor edema risk " + std::to_string(edema_risk) + " outside [0,2]");
    }
    return {ClassLabel(GradingSystem::RDR, retinopathy_grade >= 2 ? 1 : 0),
            ClassLabel(GradingSystem::RDME, edema_risk >= 1 ? 1 : 0)};
}

} // namespace fundus
