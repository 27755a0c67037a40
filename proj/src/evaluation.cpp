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

#include "fundus/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "fundus/error.hpp"

namespace fundus {

namespace {

template <typename Fn>
auto with_provenance(std::string_view where, Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        throw Error(e.code(), std::string(where) + ": " + e.what());
    }
}

void widen_to_contain(Estimate& e) {
    e.ci.lo = std::min(e.ci.lo, e.value);
    e.ci.hi = std::max(e.ci.hi, e.value);
}

Estimate proportion(long long k, long long n, double level) {
    Estimate e;
    e.value = static_cast<double>(k) / static_cast<double>(n);
    e.ci = clopper_pearson(k, n, level);
    return e;
}

std::vector<CurvePoint> plot_points(const RocCurve& curve) {
    std::vector<CurvePoint> out;
    out.reserve(curve.points.size());
    for (const auto& p : curve.points) {
        out.push_back({p.fpr, p.tpr});
    }
    return out;
}

} // namespace

std::string_view criterion_token(Criterion criterion) noexcept {
    switch (criterion) {
    case Criterion::TargetSensitivity: return "target_sensitivity";
    case Criterion::TargetSpecificity: return "target_specificity";
    }
    return "";
}

Criterion parse_criterion(std::string_view text) {
    if (text == "target_sensitivity") {
        return Criterion::TargetSensitivity;
    }
    if (text == "target_specificity") {
        return Criterion::TargetSpecificity;
    }
    throw Error(ErrorCode::RangeError, "unknown criterion '" + std::string(text) + "'");
}

OperatingPoint select_operating_point(const RocCurve& tuning, Criterion criterion, double target) {
    if (!(target >= 0.0 && target <= 1.0)) {
        throw Error(ErrorCode::RangeError, "operating-point target must lie in [0, 1]");
    }
    if (tuning.points.empty() || tuning.n_pos == 0 || tuning.n_neg == 0) {
        throw Error(ErrorCode::DegenerateClasses, "tuning curve needs both classes");
    }
    const auto n_pos = static_cast<double>(tuning.n_pos);
    const auto n_neg = static_cast<double>(tuning.n_neg);
    auto sensitivity = [&](const RocPoint& p) { return static_cast<double>(p.true_positives) / n_pos; };
    auto specificity = [&](const RocPoint& p) {
        return static_cast<double>(tuning.n_neg - p.false_positives) / n_neg;
    };

    // Points run from the strictest threshold to the most lenient; sensitivity
    // never decreases and specificity never increases along the way.
    const RocPoint* chosen = nullptr;
    if (criterion == Criterion::TargetSensitivity) {
        for (const auto& p : tuning.points) {
            if (sensitivity(p) >= target) {
                chosen = &p;
                break;
            }
        }
    } else {
        for (const auto& p : tuning.points) {
            if (specificity(p) >= target) {
                chosen = &p;
            }
        }
    }
    if (chosen == nullptr) {
        // Unreachable for targets in [0, 1]: the last point has sensitivity 1, the first specificity 1.
        throw Error(ErrorCode::Unattainable, "no tuning threshold reaches the target");
    }
    OperatingPoint op;
    op.threshold = chosen->threshold;
    op.criterion = criterion;
    op.target = target;
    op.tuning_sensitivity = sensitivity(*chosen);
    op.tuning_specificity = specificity(*chosen);
    op.trivial = chosen->true_positives == tuning.n_pos && chosen->false_positives == tuning.n_neg;
    return op;
}

void EvalSet::add(std::string id, std::size_t label, std::vector<double> probs, std::size_t cluster) {
    ids.push_back(std::move(id));
    labels.push_back(label);
    probabilities.push_back(std::move(probs));
    clusters.push_back(cluster);
}

EvalSet collect_set(std::span<const LabeledRecord> records, const SplitAssignment* split, const ScoreSet& scores,
                    std::optional<SplitSet> set) {
    std::vector<const LabeledRecord*> chosen;
    for (const auto& r : records) {
        if (set && split != nullptr && split->set_of(r.first.image_id) != *set) {
            continue;
        }
        chosen.push_back(&r);
    }
    std::sort(chosen.begin(), chosen.end(),
              [](const LabeledRecord* a, const LabeledRecord* b) { return a->first.image_id < b->first.image_id; });
    EvalSet out;
    std::map<std::string, std::size_t> patients;
    for (const auto* r : chosen) {
        const auto row = scores.find(r->first.image_id);
        if (row == SIZE_MAX) {
            throw Error(ErrorCode::RangeError, "no scores for image '" + r->first.image_id + "'");
        }
        const auto probs = scores.row(row);
        const auto cluster = patients.emplace(r->first.patient_id, patients.size()).first->second;
        out.add(r->first.image_id, r->second.index(), std::vector<double>(probs.begin(), probs.end()), cluster);
    }
    return out;
}

BinaryReport apply_operating_point(const OperatingPoint& point, const EvalSet& validation, GradingSystem system,
                                   const BinaryOptions& options) {
    if (class_count(system) != 2) {
        throw Error(ErrorCode::RangeError, "binary evaluation needs a two-class system");
    }
    std::vector<int> labels(validation.size());
    std::vector<double> scores(validation.size());
    for (std::size_t i = 0; i < validation.size(); ++i) {
        if (validation.probabilities[i].size() != 2) {
            throw Error(ErrorCode::RangeError, "binary evaluation needs two-entry probability vectors");
        }
        labels[i] = static_cast<int>(validation.labels[i]);
        scores[i] = validation.probabilities[i][1];
    }
    const auto curve = with_provenance("validation set", [&] { return roc_curve(labels, scores); });

    BinaryReport report;
    report.system = system;
    report.operating_point = point;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool called = scores[i] >= point.threshold;
        if (labels[i] == 1) {
            ++(called ? report.counts.tp : report.counts.fn);
        } else {
            ++(called ? report.counts.fp : report.counts.tn);
        }
    }
    const auto& c = report.counts;
    report.sensitivity = proportion(c.tp, c.n_pos(), options.level);
    report.specificity = proportion(c.tn, c.n_neg(), options.level);
    report.accuracy = proportion(c.tp + c.tn, c.n(), options.level);

    report.auc.value = auc(curve);
    if (options.auc_ci == CiMethod::ClopperPearson) {
        const auto k = std::llround(report.auc.value * static_cast<double>(c.n()));
        report.auc.ci = clopper_pearson(k, c.n(), options.level);
    } else {
        std::vector<ClusteredItem> items(labels.size());
        for (std::size_t i = 0; i < labels.size(); ++i) {
            items[i] = {validation.clusters[i], labels[i], scores[i]};
        }
        auto bootstrap = options.bootstrap;
        bootstrap.level = options.level;
        report.auc.ci = with_provenance("validation set", [&] { return cluster_bootstrap_auc(items, bootstrap); });
    }
    for (auto* e : {&report.auc, &report.sensitivity, &report.specificity, &report.accuracy}) {
        widen_to_contain(*e);
    }
    report.roc = plot_points(curve);
    return report;
}

BinaryReport evaluate_binary(const EvalSet& tuning, const EvalSet& validation, GradingSystem system,
                             const BinaryOptions& options) {
    std::vector<int> labels(tuning.size());
    std::vector<double> scores(tuning.size());
    for (std::size_t i = 0; i < tuning.size(); ++i) {
        if (tuning.probabilities[i].size() != 2) {
            throw Error(ErrorCode::RangeError, "binary evaluation needs two-entry probability vectors");
        }
        labels[i] = static_cast<int>(tuning.labels[i]);
        scores[i] = tuning.probabilities[i][1];
    }
    const auto point = with_provenance("tuning set", [&] {
        return select_operating_point(roc_curve(labels, scores), options.criterion, options.target);
    });
    return apply_operating_point(point, validation, system, options);
}

MulticlassReport evaluate_multiclass(const EvalSet& validation, GradingSystem system) {
    const std::size_t k = class_count(system);
    std::vector<std::size_t> predictions(validation.size());
    std::vector<OneVsAll> per_class(k);
    for (std::size_t i = 0; i < validation.size(); ++i) {
        const auto& p = validation.probabilities[i];
        if (p.size() != k) {
            throw Error(ErrorCode::RangeError, "probability vectors must have one entry per class");
        }
        predictions[i] = argmax_class(p);
        for (std::size_t c = 0; c < k; ++c) {
            per_class[c].labels.push_back(validation.labels[i] == c ? 1 : 0);
            per_class[c].scores.push_back(p[c]);
        }
    }
    const auto macro = with_provenance("validation set", [&] { return macro_roc(per_class); });
    MulticlassReport report;
    report.system = system;
    report.n = validation.size();
    report.macro_auc = macro.auc;
    report.class_auc = macro.class_auc;
    report.matrix = confusion(validation.labels, predictions, k);
    report.accuracy = accuracy(report.matrix);
    report.kappa = quadratic_weighted_kappa(report.matrix);
    for (const auto& curve : macro.class_curves) {
        report.class_curves.push_back(plot_points(curve));
    }
    report.macro_curve = macro.points;
    return report;
}

} // namespace fundus
