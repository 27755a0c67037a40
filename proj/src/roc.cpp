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
#include <cmath>
#include <limits>
#include <numeric>

#include "fundus/error.hpp"
#include "fundus/metrics.hpp"

namespace fundus {

namespace {

void check_inputs(std::span<const int> labels, std::span<const double> scores) {
    if (labels.size() != scores.size()) {
        throw Error(ErrorCode::RangeError, "labels and scores differ in length");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1) {
            throw Error(ErrorCode::RangeError, "binary labels must be 0 or 1");
        }
        if (!std::isfinite(scores[i])) {
            throw Error(ErrorCode::RangeError, "scores must be finite");
        }
    }
}

} // namespace

RocCurve roc_curve(std::span<const int> labels, std::span<const double> scores) {
    check_inputs(labels, scores);
    RocCurve curve;
    curve.n_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    curve.n_neg = labels.size() - curve.n_pos;
    if (curve.n_pos == 0 || curve.n_neg == 0) {
        throw Error(ErrorCode::DegenerateClasses, "ROC needs at least one positive and one negative item");
    }

    std::vector<std::size_t> order(labels.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    const auto pos = static_cast<double>(curve.n_pos);
    const auto neg = static_cast<double>(curve.n_neg);
    curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0, 0, 0});
    std::size_t tp = 0;
    std::size_t fp = 0;
    for (std::size_t i = 0; i < order.size();) {
        const double threshold = scores[order[i]];
        while (i < order.size() && scores[order[i]] == threshold) {
            if (labels[order[i]] == 1) {
                ++tp;
            } else {
                ++fp;
            }
            ++i;
        }
        curve.points.push_back({threshold, static_cast<double>(fp) / neg, static_cast<double>(tp) / pos, fp, tp});
    }
    return curve;
}

double auc(const RocCurve& curve) {
    if (curve.points.size() < 2 || curve.n_pos == 0 || curve.n_neg == 0) {
        throw Error(ErrorCode::DegenerateClasses, "AUC of an empty curve");
    }
    // Twice the area in units of (1/n_neg) x (1/n_pos) cells.
    unsigned long long twice_area = 0;
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        const auto& a = curve.points[i - 1];
        const auto& b = curve.points[i];
        twice_area += static_cast<unsigned long long>(b.false_positives - a.false_positives) *
                      static_cast<unsigned long long>(b.true_positives + a.true_positives);
    }
    return static_cast<double>(twice_area) /
           (2.0 * static_cast<double>(curve.n_pos) * static_cast<double>(curve.n_neg));
}

double rank_auc(std::span<const int> labels, std::span<const double> scores) {
    check_inputs(labels, scores);
    std::vector<std::pair<double, int>> items(labels.size());
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        items[i] = {scores[i], labels[i]};
        n_pos += static_cast<std::size_t>(labels[i]);
    }
    const std::size_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        throw Error(ErrorCode::DegenerateClasses, "AUC needs both classes");
    }
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    // Twice the positive rank sum keeps mid-ranks integral.
    unsigned long long twice_rank_sum = 0;
    for (std::size_t i = 0; i < items.size();) {
        std::size_t j = i;
        std::size_t pos_in_block = 0;
        while (j < items.size() && items[j].first == items[i].first) {
            pos_in_block += static_cast<std::size_t>(items[j].second);
            ++j;
        }
        // ranks i+1 .. j share the mid-rank (i+1+j)/2
        twice_rank_sum += static_cast<unsigned long long>(pos_in_block) * (i + 1 + j);
        i = j;
    }
    const auto twice_u = static_cast<double>(twice_rank_sum - n_pos * (n_pos + 1));
    return twice_u / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

namespace {

// Lower and upper TPR of a curve at `x`: they differ only on a vertical segment.
std::pair<double, double> tpr_at(const RocCurve& curve, double x) {
    const auto& pts = curve.points;
    const auto first = std::lower_bound(pts.begin(), pts.end(), x,
                                        [](const RocPoint& p, double v) { return p.fpr < v; });
    if (first != pts.end() && first->fpr == x) {
        auto last = first;
        while (last + 1 != pts.end() && (last + 1)->fpr == x) {
            ++last;
        }
        return {first->tpr, last->tpr};
    }
    // Strictly between two breakpoints; both exist because the curve spans [0,1].
    const auto& right = *first;
    const auto& left = *(first - 1);
    const double t = (x - left.fpr) / (right.fpr - left.fpr);
    const double y = left.tpr + t * (right.tpr - left.tpr);
    return {y, y};
}

} // namespace

MacroRoc macro_roc(std::span<const OneVsAll> per_class) {
    if (per_class.size() < 2) {
        throw Error(ErrorCode::RangeError, "macro ROC needs at least two classes");
    }
    MacroRoc result;
    for (std::size_t c = 0; c < per_class.size(); ++c) {
        try {
            result.class_curves.push_back(roc_curve(per_class[c].labels, per_class[c].scores));
        } catch (const Error& e) {
            if (e.code() == ErrorCode::DegenerateClasses) {
                throw Error(ErrorCode::DegenerateClasses,
                            "class " + std::to_string(c) + " has no positive or no negative items");
            }
            throw;
        }
        result.class_auc.push_back(auc(result.class_curves.back()));
    }

    std::vector<double> grid;
    for (const auto& curve : result.class_curves) {
        for (const auto& p : curve.points) {
            grid.push_back(p.fpr);
        }
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    const auto k = static_cast<long double>(per_class.size());
    for (double x : grid) {
        long double low = 0.0L;
        long double high = 0.0L;
        for (const auto& curve : result.class_curves) {
            const auto [l, h] = tpr_at(curve, x);
            low += l;
            high += h;
        }
        result.points.push_back({x, static_cast<double>(low / k)});
        if (high != low) {
            result.points.push_back({x, static_cast<double>(high / k)});
        }
    }

    // The averaged curve is piecewise linear on the union grid, so its trapezoid
    // area is the mean of the class areas; summing exact class areas avoids
    // re-accumulating rounding from the averaged points.
    long double area = 0.0L;
    for (double a : result.class_auc) {
        area += a;
    }
    result.auc = static_cast<double>(area / k);
    return result;
}

} // namespace fundus
