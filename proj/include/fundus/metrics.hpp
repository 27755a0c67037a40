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

#ifndef FUNDUS_METRICS_HPP
#define FUNDUS_METRICS_HPP

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace fundus {

// ROC

struct RocPoint {
    /// Items with score >= threshold are called positive. +inf for the (0,0) point.
    double threshold = 0.0;
    double fpr = 0.0;
    double tpr = 0.0;
    std::size_t false_positives = 0;
    std::size_t true_positives = 0;
};

struct RocCurve {
    std::vector<RocPoint> points;
    std::size_t n_pos = 0;
    std::size_t n_neg = 0;
};

/// One point per distinct score (tied scores form a single step) plus the (0,0) origin.
/// Labels are 0/1; throws DegenerateClasses if either class is empty.
[[nodiscard]] RocCurve roc_curve(std::span<const int> labels, std::span<const double> scores);

/// Trapezoidal area, evaluated exactly from the integer counts on each step.
[[nodiscard]] double auc(const RocCurve& curve);

struct CurvePoint {
    double fpr = 0.0;
    double tpr = 0.0;
};

struct OneVsAll {
    std::vector<int> labels;
    std::vector<double> scores;
};

struct MacroRoc {
    std::vector<RocCurve> class_curves;
    std::vector<double> class_auc;
    /// Vertically averaged curve; a vertical jump in any class curve appears as two points at one FPR.
    std::vector<CurvePoint> points;
    double auc = 0.0;
};

/// Macro-average of one-vs-all ROC curves by vertical averaging on the union of FPR breakpoints.
[[nodiscard]] MacroRoc macro_roc(std::span<const OneVsAll> per_class);

// Confusion matrices

class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t k);
    /// Rows are ground truth, columns predictions.
    ConfusionMatrix(std::initializer_list<std::initializer_list<long long>> rows);

    [[nodiscard]] std::size_t k() const noexcept { return k_; }
    [[nodiscard]] long long at(std::size_t truth, std::size_t predicted) const;
    void add(std::size_t truth, std::size_t predicted, long long count = 1);
    [[nodiscard]] long long total() const noexcept;
    [[nodiscard]] long long trace() const noexcept;
    [[nodiscard]] long long row_total(std::size_t truth) const;
    [[nodiscard]] long long column_total(std::size_t predicted) const;

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
    std::size_t k_;
    std::vector<long long> counts_;
};

[[nodiscard]] ConfusionMatrix confusion(std::span<const std::size_t> labels, std::span<const std::size_t> predictions,
                                        std::size_t k);

/// trace / total; EmptyMatrix when total is 0.
[[nodiscard]] double accuracy(const ConfusionMatrix& cm);

struct BinaryRates {
    double sensitivity = 0.0;
    double specificity = 0.0;
    double accuracy = 0.0;
};

/// 2x2 matrix with class 1 positive; EmptyClass if a truth row sums to 0.
[[nodiscard]] BinaryRates binary_rates(const ConfusionMatrix& cm);

/// Cohen's kappa with weights (i-j)^2/(K-1)^2.
[[nodiscard]] double quadratic_weighted_kappa(const ConfusionMatrix& cm);

// Confidence intervals

enum class CiMethod { ClopperPearson, ClusterBootstrap };

[[nodiscard]] std::string_view ci_method_token(CiMethod method) noexcept;

struct Interval {
    double lo = 0.0;
    double hi = 1.0;
    double level = 0.95;
    CiMethod method = CiMethod::ClopperPearson;

    [[nodiscard]] bool contains(double value) const noexcept { return lo <= value && value <= hi; }
};

/// Exact binomial interval for k successes in n trials.
[[nodiscard]] Interval clopper_pearson(long long k, long long n, double level = 0.95);

struct ClusteredItem {
    std::size_t cluster = 0; ///< patient index
    int label = 0;
    double score = 0.0;
};

struct BootstrapOptions {
    std::size_t replicates = 2000;
    std::uint64_t seed = 0;
    double level = 0.95;
    unsigned jobs = 1;
};

/// BCa interval for the AUC, resampling whole clusters; replicate r draws from Rng::substream(seed, r).
[[nodiscard]] Interval cluster_bootstrap_auc(std::span<const ClusteredItem> items, const BootstrapOptions& options);

/// AUC as the Mann-Whitney statistic with mid-ranks for ties. Used on the bootstrap hot path.
[[nodiscard]] double rank_auc(std::span<const int> labels, std::span<const double> scores);

// Score sets

/// Per-image probability vectors over a grading system's K classes, in file order.
class ScoreSet {
public:
    explicit ScoreSet(std::size_t k) : k_(k) {}

    [[nodiscard]] std::size_t k() const noexcept { return k_; }
    [[nodiscard]] std::size_t size() const noexcept { return ids_.size(); }
    [[nodiscard]] const std::vector<std::string>& ids() const noexcept { return ids_; }
    [[nodiscard]] std::span<const double> row(std::size_t i) const;
    /// Index of the image, or SIZE_MAX.
    [[nodiscard]] std::size_t find(const std::string& image_id) const;

    /// Validates length K, entries >= 0, and sum within 1e-6 of 1 (RangeError otherwise).
    void add(std::string image_id, std::span<const double> probabilities);

private:
    std::size_t k_;
    std::vector<std::string> ids_;
    std::vector<double> values_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Header `image_id,p0,...,p{K-1}`. FatalFormat on a header mismatch; row errors carry line numbers.
[[nodiscard]] ScoreSet parse_scores_csv(std::string_view text, std::size_t k);
[[nodiscard]] std::string format_scores_csv(const ScoreSet& scores);

/// argmax with ties toward the lower class index.
[[nodiscard]] std::size_t argmax_class(std::span<const double> probabilities);

} // namespace fundus

#endif // FUNDUS_METRICS_HPP
