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

#ifndef FUNDUS_GRADING_HPP
#define FUNDUS_GRADING_HPP

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fundus {

/// Clinical diabetic retinopathy grade, 0 = no apparent DR ... 4 = PDR.
class PircGrade {
public:
    static constexpr int kMax = 4;
    explicit PircGrade(int value);
    [[nodiscard]] int value() const noexcept { return value_; }
    friend bool operator==(PircGrade, PircGrade) = default;

private:
    int value_;
};

/// Clinical diabetic macular edema grade, 0 = no apparent DME ... 3 = severe DME.
class PimecGrade {
public:
    static constexpr int kMax = 3;
    explicit PimecGrade(int value);
    [[nodiscard]] int value() const noexcept { return value_; }
    friend bool operator==(PimecGrade, PimecGrade) = default;

private:
    int value_;
};

enum class GradingSystem { PIRC, PIMEC, RDR, RDME, QRDR };

inline constexpr std::array<GradingSystem, 5> kAllSystems{
    GradingSystem::PIRC, GradingSystem::PIMEC, GradingSystem::RDR, GradingSystem::RDME,
    GradingSystem::QRDR};

[[nodiscard]] std::size_t class_count(GradingSystem system) noexcept;
/// Lower-case CLI/file token, e.g. "rdr".
[[nodiscard]] std::string_view system_token(GradingSystem system) noexcept;
/// Display name, e.g. "NRDR/RDR".
[[nodiscard]] std::string_view system_display_name(GradingSystem system) noexcept;
[[nodiscard]] std::string_view class_name(GradingSystem system, std::size_t index);
/// Accepts the token in any case; throws RangeError for unknown names.
[[nodiscard]] GradingSystem parse_system(std::string_view text);
/// True when the system is defined only on gradable images.
[[nodiscard]] bool requires_grades(GradingSystem system) noexcept;

enum class Eye { Left, Right };
enum class Field { Fovea, OpticDisc };

struct GradeRecord {
    std::string image_id;
    std::string patient_id;
    Eye eye = Eye::Left;
    Field field = Field::Fovea;
    bool gradable = false;
    std::optional<PircGrade> pirc;
    std::optional<PimecGrade> pimec;
    /// Free-text grader disagreement flag carried through from the manifest.
    std::string disagreement;

    friend bool operator==(const GradeRecord&, const GradeRecord&) = default;
};

/// Throws RangeError when gradable records lack grades or ungradable ones carry them.
void validate_record(const GradeRecord& record);

class ClassLabel {
public:
    ClassLabel(GradingSystem system, std::size_t index);
    [[nodiscard]] GradingSystem system() const noexcept { return system_; }
    [[nodiscard]] std::size_t index() const noexcept { return index_; }
    friend bool operator==(const ClassLabel&, const ClassLabel&) = default;

private:
    GradingSystem system_;
    std::size_t index_;
};

[[nodiscard]] ClassLabel derive_class(GradingSystem system, const GradeRecord& record);

using LabeledRecord = std::pair<GradeRecord, ClassLabel>;

/// Drops ungradable images unless the system has an ungradable class (QRDR).
[[nodiscard]] std::vector<LabeledRecord> records_for_system(std::span<const GradeRecord> records,
                                                            GradingSystem system);

// Manifest CSV

struct Diagnostic {
    std::size_t line = 0; ///< 1-based line number in the source text
    std::string message;
};

struct ManifestParseResult {
    std::vector<GradeRecord> records;
    std::vector<Diagnostic> diagnostics;
};

struct ManifestOptions {
    /// Drop rows with a nonempty `disagreement` cell.
    bool drop_flagged = false;
};

[[nodiscard]] ManifestParseResult parse_manifest(std::string_view text, ManifestOptions options = {});
[[nodiscard]] ManifestParseResult read_manifest(const std::string& path, ManifestOptions options = {});
[[nodiscard]] std::string serialize_manifest(std::span<const GradeRecord> records);

// Messidor

struct MessidorLabels {
    ClassLabel rdr;
    ClassLabel rdme;
};

[[nodiscard]] MessidorLabels map_messidor(int retinopathy_grade, int edema_risk);

struct MessidorRecord {
    std::string image_id;
    int retinopathy_grade = 0;
    int edema_risk = 0;
    [[nodiscard]] MessidorLabels labels() const { return map_messidor(retinopathy_grade, edema_risk); }
};

struct MessidorParseResult {
    std::vector<MessidorRecord> records;
    std::vector<Diagnostic> diagnostics;
};

[[nodiscard]] MessidorParseResult parse_messidor_labels(std::string_view text);

} // namespace fundus

#endif // FUNDUS_GRADING_HPP
