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

#ifndef FUNDUS_EVALUATION_HPP
#define FUNDUS_EVALUATION_HPP

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "fundus/grading.hpp"
#include "fundus/metrics.hpp"
#include "fundus/splitter.hpp"

namespace fundus {

enum class Criterion { TargetSensitivity, TargetSpecificity };

[[nodiscard]] std::string_view criterion_token(Criterion criterion) noexcept;
[[nodiscard]] Criterion parse_criterion(std::string_view text);

struct OperatingPoint {
    /// Items with positive-class probability >= threshold are called positive.
    double threshold = 0.0;
    Criterion criterion = Criterion::TargetSensitivity;
    double target = 0.9;
    double tuning_sensitivity = 0.0;
    double tuning_specificity = 0.0;
    /// The chosen point calls every tuning item positive.
    bool trivial = false;
};

/// Target sensitivity: the point with the smallest tuning sensitivity >= target,
/// ties resolved toward higher specificity. Target specificity: symmetric.
/// Throws RangeError for a target outside [0, 1].
[[nodiscard]] OperatingPoint select_operating_point(const RocCurve& tuning, Criterion criterion, double target);

/// Items of one split set with their labels and probability vectors.
struct EvalSet {
    std::vector<std::string> ids;
    std::vector<std::size_t> labels;
    std::vector<std::vector<double>> probabilities;
    /// Dense patient index per item, for cluster resampling.
    std::vector<std::size_t> clusters;

    [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
    void add(std::string id, std::size_t label, std::vector<double> probs, std::size_t cluster);
};

/// Gathers the records assigned to `set` (or all records when nullopt), in image id order.
/// Throws RangeError when an image has no score row.
[[nodiscard]] EvalSet collect_set(std::span<const LabeledRecord> records, const SplitAssignment* split,
                                  const ScoreSet& scores, std::optional<SplitSet> set);

struct Estimate {
    double value = 0.0;
    Interval ci;
};

struct BinaryCounts {
    long long tp = 0;
    long long fn = 0;
    long long tn = 0;
    long long fp = 0;

    [[nodiscard]] long long n_pos() const noexcept { return tp + fn; }
    [[nodiscard]] long long n_neg() const noexcept { return tn + fp; }
    [[nodiscard]] long long n() const noexcept { return tp + fn + tn + fp; }
};

struct BinaryOptions {
    Criterion criterion = Criterion::TargetSensitivity;
    double target = 0.9;
    CiMethod auc_ci = CiMethod::ClopperPearson;
    BootstrapOptions bootstrap;
    double level = 0.95;
};

struct BinaryReport {
    GradingSystem system = GradingSystem::RDR;
    std::string input_size = "na";
    std::string dataset = "validation";
    Estimate auc;
    Estimate sensitivity;
    Estimate specificity;
    Estimate accuracy;
    OperatingPoint operating_point;
    BinaryCounts counts;
    std::vector<CurvePoint> roc;
};

/// Validation metrics at a fixed operating point. Sensitivity, specificity and
/// accuracy carry Clopper-Pearson intervals over n_pos, n_neg and n. The AUC
/// interval is Clopper-Pearson on round(auc * n) of n, or a patient-cluster
/// bootstrap. Every interval is widened, if needed, to contain its estimate.
[[nodiscard]] BinaryReport apply_operating_point(const OperatingPoint& point, const EvalSet& validation,
                                                 GradingSystem system, const BinaryOptions& options);

/// Operating point from the tuning set only, then applied to the validation set.
[[nodiscard]] BinaryReport evaluate_binary(const EvalSet& tuning, const EvalSet& validation, GradingSystem system,
                                           const BinaryOptions& options);

struct MulticlassReport {
    GradingSystem system = GradingSystem::PIRC;
    std::string input_size = "na";
    std::string dataset = "validation";
    std::size_t n = 0;
    double macro_auc = 0.0;
    std::vector<double> class_auc;
    double accuracy = 0.0;
    double kappa = 0.0;
    ConfusionMatrix matrix = ConfusionMatrix(2);
    std::vector<std::vector<CurvePoint>> class_curves;
    std::vector<CurvePoint> macro_curve;
};

/// Argmax predictions (ties to the lower class), macro-averaged one-vs-all ROC,
/// confusion matrix, accuracy and quadratic-weighted kappa.
[[nodiscard]] MulticlassReport evaluate_multiclass(const EvalSet& validation, GradingSystem system);

using Report = std::variant<BinaryReport, MulticlassReport>;

/// File stem `<system>_<size>`, with `_<dataset>` appended for non-validation data.
[[nodiscard]] std::string report_stem(const Report& report);

[[nodiscard]] std::string render_json(const Report& report);
[[nodiscard]] std::string render_csv(const Report& report);
[[nodiscard]] std::string render_text(const Report& report);
[[nodiscard]] std::string render_svg(const Report& report);
/// Multiclass only; empty for binary reports.
[[nodiscard]] std::string render_confusion_csv(const Report& report);

/// Relative output path and content for every artefact of a report:
/// report/<stem>.{csv,json,txt}, roc/<stem>.svg and, for multiclass, confusion/<stem>.csv.
[[nodiscard]] std::vector<std::pair<std::string, std::string>> render_files(const Report& report);

/// Inverse of render_json. Throws FatalFormat on malformed documents.
[[nodiscard]] Report parse_report_json(std::string_view text);

} // namespace fundus

#endif // FUNDUS_EVALUATION_HPP
