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

#include "fundus/error.hpp"
#include "fundus/metrics.hpp"
#include "fundus/special.hpp"

namespace fundus {

ConfusionMatrix::ConfusionMatrix(std::size_t k) : k_(k), counts_(k * k, 0) {
    if (k == 0) {
        throw Error(ErrorCode::RangeError, "confusion matrix needs K >= 1");
    }
}

ConfusionMatrix::ConfusionMatrix(std::initializer_list<std::initializer_list<long long>> rows)
    : ConfusionMatrix(rows.size()) {
    std::size_t i = 0;
    for (const auto& row : rows) {
        if (row.size() != k_) {
            throw Error(ErrorCode::RangeError, "confusion matrix rows must have K entries");
        }
        std::size_t j = 0;
        for (long long v : row) {
            add(i, j++, v);
        }
        ++i;
    }
}

long long ConfusionMatrix::at(std::size_t truth, std::size_t predicted) const {
    if (truth >= k_ || predicted >= k_) {
        throw Error(ErrorCode::RangeError, "confusion matrix index out of range");
    }
    return counts_[truth * k_ + predicted];
}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, long long count) {
    if (truth >= k_ || predicted >= k_) {
        throw Error(ErrorCode::RangeError, "class index out of range for a " + std::to_string(k_) + "-class matrix");
    }
    if (count < 0 || counts_[truth * k_ + predicted] + count < 0) {
        throw Error(ErrorCode::RangeError, "confusion counts must be nonnegative");
    }
    counts_[truth * k_ + predicted] += count;
}

long long ConfusionMatrix::total() const noexcept {
    long long sum = 0;
    for (long long v : counts_) {
        sum += v;
    }
    return sum;
}

long long ConfusionMatrix::trace() const noexcept {
    long long sum = 0;
    for (std::size_t i = 0; i < k_; ++i) {
        sum += counts_[i * k_ + i];
    }
    return sum;
}

long long ConfusionMatrix::row_total(std::size_t truth) const {
    long long sum = 0;
    for (std::size_t j = 0; j < k_; ++j) {
        sum += at(truth, j);
    }
    return sum;
}

long long ConfusionMatrix::column_total(std::size_t predicted) const {
    long long sum = 0;
    for (std::size_t i = 0; i < k_; ++i) {
        sum += at(i, predicted);
    }
    return sum;
}

ConfusionMatrix confusion(std::span<const std::size_t> labels, std::span<const std::size_t> predictions,
                          std::size_t k) {
    if (labels.size() != predictions.size()) {
        throw Error(ErrorCode::RangeError, "labels and predictions differ in length");
    }
    ConfusionMatrix cm(k);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        cm.add(labels[i], predictions[i]);
    }
    return cm;
}

double accuracy(const ConfusionMatrix& cm) {
    const long long total = cm.total();
    if (total == 0) {
        throw Error(ErrorCode::EmptyMatrix, "accuracy of an empty confusion matrix");
    }
    return static_cast<double>(cm.trace()) / static_cast<double>(total);
}

BinaryRates binary_rates(const ConfusionMatrix& cm) {
    if (cm.k() != 2) {
        throw Error(ErrorCode::RangeError, "binary rates need a 2x2 matrix");
    }
    const long long tn = cm.at(0, 0);
    const long long fp = cm.at(0, 1);
    const long long fn = cm.at(1, 0);
    const long long tp = cm.at(1, 1);
    if (tp + fn == 0) {
        throw Error(ErrorCode::EmptyClass, "no positive ground-truth items");
    }
    if (tn + fp == 0) {
        throw Error(ErrorCode::EmptyClass, "no negative ground-truth items");
    }
    return {static_cast<double>(tp) / static_cast<double>(tp + fn),
            static_cast<double>(tn) / static_cast<double>(tn + fp),
            static_cast<double>(tp + tn) / static_cast<double>(cm.total())};
}

double quadratic_weighted_kappa(const ConfusionMatrix& cm) {
    const std::size_t k = cm.k();
    if (k < 2) {
        throw Error(ErrorCode::RangeError, "kappa needs K >= 2");
    }
    const long long total = cm.total();
    if (total == 0) {
        throw Error(ErrorCode::EmptyMatrix, "kappa of an empty confusion matrix");
    }
    const auto scale = static_cast<long double>((k - 1) * (k - 1));
    long double observed = 0.0L;
    long double expected = 0.0L;
    bool diagonal = true;
    for (std::size_t i = 0; i < k; ++i) {
        const auto row = static_cast<long double>(cm.row_total(i));
        for (std::size_t j = 0; j < k; ++j) {
            const auto d = static_cast<long double>(i > j ? i - j : j - i);
            const long double w = d * d / scale;
            observed += w * static_cast<long double>(cm.at(i, j));
            expected += w * row * static_cast<long double>(cm.column_total(j)) / static_cast<long double>(total);
            if (i != j && cm.at(i, j) != 0) {
                diagonal = false;
            }
        }
    }
    if (expected == 0.0L) {
        if (diagonal) {
            return 1.0;
        }
        throw Error(ErrorCode::DegenerateMarginals, "kappa undefined: expected weighted disagreement is zero");
    }
    return static_cast<double>(1.0L - observed / expected);
}

std::string_view ci_method_token(CiMethod method) noexcept {
    switch (method) {
    case CiMethod::ClopperPearson: return "clopper_pearson";
    case CiMethod::ClusterBootstrap: return "cluster_bootstrap";
    }
    return "";
}

Interval clopper_pearson(long long k, long long n, double level) {
    if (n < 1 || k < 0 || k > n) {
        throw Error(ErrorCode::RangeError,
                    "Clopper-Pearson needs 0 <= k <= n and n >= 1 (k=" + std::to_string(k) + ", n=" + std::to_string(n) +
                        ")");
    }
    if (!(level > 0.0 && level < 1.0)) {
        throw Error(ErrorCode::RangeError, "confidence level must lie in (0,1)");
    }
    const double alpha = 1.0 - level;
    const auto kd = static_cast<double>(k);
    const auto nd = static_cast<double>(n);
    Interval interval;
    interval.level = level;
    interval.method = CiMethod::ClopperPearson;
    interval.lo = k == 0 ? 0.0 : special::beta_quantile(alpha / 2.0, kd, nd - kd + 1.0);
    interval.hi = k == n ? 1.0 : special::beta_quantile(1.0 - alpha / 2.0, kd + 1.0, nd - kd);
    return interval;
}

} // namespace fundus
