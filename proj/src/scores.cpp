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

#include <cmath>

#include <fmt/format.h>

#include "fundus/error.hpp"
#include "fundus/io.hpp"
#include "fundus/metrics.hpp"

namespace fundus {

std::span<const double> ScoreSet::row(std::size_t i) const {
    if (i >= ids_.size()) {
        throw Error(ErrorCode::RangeError, "score row out of range");
    }
    return {values_.data() + i * k_, k_};
}

std::size_t ScoreSet::find(const std::string& image_id) const {
    const auto it = index_.find(image_id);
    return it == index_.end() ? SIZE_MAX : it->second;
}

void ScoreSet::add(std::string image_id, std::span<const double> probabilities) {
    if (probabilities.size() != k_) {
        throw Error(ErrorCode::RangeError, "probability vector for '" + image_id + "' has " +
                                               std::to_string(probabilities.size()) + " entries, expected " +
                                               std::to_string(k_));
    }
    double sum = 0.0;
    for (double p : probabilities) {
        if (!(p >= 0.0) || !std::isfinite(p)) {
            throw Error(ErrorCode::RangeError, "negative or non-finite probability for '" + image_id + "'");
        }
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
        throw Error(ErrorCode::RangeError, fmt::format("probabilities for '{}' sum to {:.9f}", image_id, sum));
    }
    if (!index_.emplace(image_id, ids_.size()).second) {
        throw Error(ErrorCode::RangeError, "duplicate image_id '" + image_id + "' in scores");
    }
    ids_.push_back(std::move(image_id));
    values_.insert(values_.end(), probabilities.begin(), probabilities.end());
}

ScoreSet parse_scores_csv(std::string_view text, std::size_t k) {
    const auto lines = io::split_lines(text);
    std::size_t i = 0;
    while (i < lines.size() && io::trim(lines[i]).empty()) {
        ++i;
    }
    if (i == lines.size()) {
        throw Error(ErrorCode::FatalFormat, "scores file is empty");
    }
    const auto header = io::split_csv_row(lines[i]);
    bool header_ok = header.size() == k + 1 && header[0] == "image_id";
    for (std::size_t c = 0; header_ok && c < k; ++c) {
        header_ok = header[c + 1] == "p" + std::to_string(c);
    }
    if (!header_ok) {
        throw Error(ErrorCode::FatalFormat,
                    "scores header must be 'image_id,p0,...,p" + std::to_string(k - 1) + "' for K=" + std::to_string(k));
    }
    ScoreSet scores(k);
    std::vector<double> row(k);
    for (++i; i < lines.size(); ++i) {
        if (io::trim(lines[i]).empty()) {
            continue;
        }
        const auto cells = io::split_csv_row(lines[i]);
        const auto where = " at line " + std::to_string(i + 1);
        if (cells.size() != k + 1 || cells[0].empty()) {
            throw Error(ErrorCode::FatalFormat, "malformed scores row" + where);
        }
        for (std::size_t c = 0; c < k; ++c) {
            const auto value = io::parse_double(cells[c + 1]);
            if (!value) {
                throw Error(ErrorCode::FatalFormat, "non-numeric probability" + where);
            }
            row[c] = *value;
        }
        try {
            scores.add(std::string(cells[0]), row);
        } catch (const Error& e) {
            throw Error(e.code(), std::string(e.what()) + where);
        }
    }
    return scores;
}

std::string format_scores_csv(const ScoreSet& scores) {
    std::string out = "image_id";
    for (std::size_t c = 0; c < scores.k(); ++c) {
        out += fmt::format(",p{}", c);
    }
    out += '\n';
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out += scores.ids()[i];
        for (double p : scores.row(i)) {
            // Shortest representation that round-trips exactly.
            out += fmt::format(",{}", p);
        }
        out += '\n';
    }
    return out;
}

std::size_t argmax_class(std::span<const double> probabilities) {
    if (probabilities.empty()) {
        throw Error(ErrorCode::RangeError, "argmax of an empty vector");
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < probabilities.size(); ++c) {
        if (probabilities[c] > probabilities[best]) {
            best = c;
        }
    }
    return best;
}

} // namespace fundus
