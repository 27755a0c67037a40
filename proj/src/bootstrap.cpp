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
#include <map>

#include "fundus/error.hpp"
#include "fundus/metrics.hpp"
#include "fundus/parallel.hpp"
#include "fundus/random.hpp"
#include "fundus/special.hpp"

namespace fundus {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Cluster {
    std::vector<int> labels;
    std::vector<double> scores;
};

// AUC of the concatenation of the listed clusters, or NaN when a class is missing.
double pooled_auc(const std::vector<Cluster>& clusters, std::span<const std::size_t> picks, std::vector<int>& labels,
                  std::vector<double>& scores) {
    labels.clear();
    scores.clear();
    for (std::size_t c : picks) {
        labels.insert(labels.end(), clusters[c].labels.begin(), clusters[c].labels.end());
        scores.insert(scores.end(), clusters[c].scores.begin(), clusters[c].scores.end());
    }
    const auto pos = std::count(labels.begin(), labels.end(), 1);
    if (pos == 0 || pos == static_cast<std::ptrdiff_t>(labels.size())) {
        return kNaN;
    }
    return rank_auc(labels, scores);
}

// Linear interpolation between order statistics (type 7).
double quantile_sorted(const std::vector<double>& sorted, double p) {
    const double h = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

} // namespace

Interval cluster_bootstrap_auc(std::span<const ClusteredItem> items, const BootstrapOptions& options) {
    if (options.replicates < 2) {
        throw Error(ErrorCode::RangeError, "bootstrap needs at least 2 replicates");
    }
    if (!(options.level > 0.0 && options.level < 1.0)) {
        throw Error(ErrorCode::RangeError, "confidence level must lie in (0,1)");
    }
    // Clusters in ascending id order so the result does not depend on item order within the input.
    std::map<std::size_t, Cluster> by_id;
    for (const auto& item : items) {
        auto& cluster = by_id[item.cluster];
        cluster.labels.push_back(item.label);
        cluster.scores.push_back(item.score);
    }
    std::vector<Cluster> clusters;
    clusters.reserve(by_id.size());
    for (auto& [id, cluster] : by_id) {
        clusters.push_back(std::move(cluster));
    }
    const std::size_t n = clusters.size();
    if (n < 2) {
        throw Error(ErrorCode::RangeError, "cluster bootstrap needs at least 2 patients");
    }

    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) {
        all[i] = i;
    }
    std::vector<int> label_buf;
    std::vector<double> score_buf;
    const double estimate = pooled_auc(clusters, all, label_buf, score_buf);
    if (std::isnan(estimate)) {
        throw Error(ErrorCode::DegenerateClasses, "bootstrap AUC needs both classes in the sample");
    }

    std::vector<double> replicates(options.replicates, kNaN);
    parallel_for(options.replicates, options.jobs, [&](std::size_t r) {
        Rng rng = Rng::substream(options.seed, r);
        std::vector<std::size_t> picks(n);
        for (auto& p : picks) {
            p = static_cast<std::size_t>(rng.below(n));
        }
        std::vector<int> labels;
        std::vector<double> scores;
        replicates[r] = pooled_auc(clusters, picks, labels, scores);
    });
    std::vector<double> valid;
    valid.reserve(replicates.size());
    for (double v : replicates) {
        if (!std::isnan(v)) {
            valid.push_back(v);
        }
    }
    if (2 * valid.size() < replicates.size()) {
        throw Error(ErrorCode::DegenerateReplicates, "more than half of the bootstrap replicates lack a class");
    }
    std::sort(valid.begin(), valid.end());
    const auto b = static_cast<double>(valid.size());

    // Bias correction from the mid-rank of the estimate among the replicates.
    const auto below = static_cast<double>(std::lower_bound(valid.begin(), valid.end(), estimate) - valid.begin());
    const auto equal = static_cast<double>(std::upper_bound(valid.begin(), valid.end(), estimate) - valid.begin()) -
                       below;
    const double share = std::clamp((below + 0.5 * equal) / b, 0.5 / b, 1.0 - 0.5 / b);
    const double z0 = special::normal_quantile(share);

    // Acceleration from the leave-one-patient-out jackknife.
    std::vector<double> jack(n, kNaN);
    parallel_for(n, options.jobs, [&](std::size_t left_out) {
        std::vector<std::size_t> keep;
        keep.reserve(n - 1);
        for (std::size_t i = 0; i < n; ++i) {
            if (i != left_out) {
                keep.push_back(i);
            }
        }
        std::vector<int> labels;
        std::vector<double> scores;
        jack[left_out] = pooled_auc(clusters, keep, labels, scores);
    });
    long double mean = 0.0L;
    std::size_t used = 0;
    for (double v : jack) {
        if (!std::isnan(v)) {
            mean += v;
            ++used;
        }
    }
    double acceleration = 0.0;
    if (used > 1) {
        mean /= static_cast<long double>(used);
        long double num = 0.0L;
        long double den = 0.0L;
        for (double v : jack) {
            if (!std::isnan(v)) {
                const long double d = mean - v;
                num += d * d * d;
                den += d * d;
            }
        }
        if (den > 0.0L) {
            acceleration = static_cast<double>(num / (6.0L * std::pow(den, 1.5L)));
        }
    }

    const double alpha = 1.0 - options.level;
    auto adjusted = [&](double tail) {
        const double z = special::normal_quantile(tail);
        const double shifted = z0 + z;
        return special::normal_cdf(z0 + shifted / (1.0 - acceleration * shifted));
    };
    Interval interval;
    interval.level = options.level;
    interval.method = CiMethod::ClusterBootstrap;
    interval.lo = std::clamp(quantile_sorted(valid, adjusted(alpha / 2.0)), 0.0, 1.0);
    interval.hi = std::clamp(quantile_sorted(valid, adjusted(1.0 - alpha / 2.0)), 0.0, 1.0);
    return interval;
}

} // namespace fundus
