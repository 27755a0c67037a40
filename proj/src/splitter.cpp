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

#include "fundus/splitter.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_set>

#include <fmt/format.h>

#include "fundus/error.hpp"
#include "fundus/io.hpp"
#include "fundus/random.hpp"

namespace fundus {

std::string_view set_token(SplitSet set) noexcept {
    switch (set) {
    case SplitSet::Train: return "train";
    case SplitSet::Tune: return "tune";
    case SplitSet::Validation: return "validation";
    }
    return "";
}

SplitSet parse_set(std::string_view text) {
    for (auto set : kAllSets) {
        if (text == set_token(set)) {
            return set;
        }
    }
    throw Error(ErrorCode::RangeError, "unknown set '" + std::string(text) + "'");
}

void SplitSpec::validate() const {
    double sum = 0.0;
    for (double f : fractions) {
        if (!(f > 0.0 && f < 1.0)) {
            throw Error(ErrorCode::RangeError, "split fractions must lie in (0,1)");
        }
        sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw Error(ErrorCode::RangeError, "split fractions must sum to 1");
    }
    if (!(tolerance > 0.0 && tolerance <= 0.1)) {
        throw Error(ErrorCode::RangeError, "split tolerance must lie in (0, 0.1]");
    }
    if (max_repair_moves < 0) {
        throw Error(ErrorCode::RangeError, "repair budget must be nonnegative");
    }
}

long long percent_tenths_half_up(std::size_t count, std::size_t total) noexcept {
    if (total == 0) {
        return 0;
    }
    // round(1000 * count / total) with ties upward, in exact integer arithmetic
    const auto num = static_cast<unsigned long long>(count) * 2000ULL + total;
    return static_cast<long long>(num / (2ULL * total));
}

std::size_t DistributionTable::total_images() const noexcept {
    return sets[0].images + sets[1].images + sets[2].images;
}

long long DistributionTable::set_share_tenths(SplitSet set) const {
    return percent_tenths_half_up(sets[static_cast<int>(set)].images, total_images());
}

long long DistributionTable::class_percent_tenths(SplitSet set, std::size_t cls) const {
    const auto& s = sets[static_cast<int>(set)];
    return percent_tenths_half_up(s.class_images.at(cls), s.images);
}

double DistributionTable::class_proportion(SplitSet set, std::size_t cls) const {
    const auto& s = sets[static_cast<int>(set)];
    return s.images == 0 ? 0.0 : static_cast<double>(s.class_images.at(cls)) / static_cast<double>(s.images);
}

double max_pairwise_deviation(const DistributionTable& table, std::span<const std::size_t> classes) {
    double worst = 0.0;
    for (std::size_t c : classes) {
        for (int a = 0; a < 3; ++a) {
            for (int b = a + 1; b < 3; ++b) {
                if (table.sets[a].images == 0 || table.sets[b].images == 0) {
                    continue;
                }
                const double d = std::abs(table.class_proportion(static_cast<SplitSet>(a), c) -
                                          table.class_proportion(static_cast<SplitSet>(b), c));
                worst = std::max(worst, d);
            }
        }
    }
    return worst;
}

SplitSet SplitAssignment::set_of(const std::string& image_id) const {
    const auto it = sets.find(image_id);
    if (it == sets.end()) {
        throw Error(ErrorCode::UnassignedRecord, "image '" + image_id + "' has no set assignment");
    }
    return it->second;
}

std::size_t patient_stratum(std::span<const LabeledRecord> records_of_one_patient) {
    if (records_of_one_patient.empty()) {
        throw Error(ErrorCode::EmptyPatient, "patient has no labeled images");
    }
    const auto& patient = records_of_one_patient.front().first.patient_id;
    std::size_t stratum = 0;
    for (const auto& [record, label] : records_of_one_patient) {
        if (record.patient_id != patient) {
            throw Error(ErrorCode::RangeError, "records of several patients passed to patient_stratum");
        }
        stratum = std::max(stratum, label.index());
    }
    return stratum;
}

namespace {

struct Patient {
    std::size_t first = 0; ///< offset into the canonical record order
    std::size_t count = 0;
    std::size_t stratum = 0;
    std::vector<long long> class_images;
};

using Counts = std::array<std::vector<long long>, 3>; // set -> class -> images

// State the repair pass optimizes: image counts per set and per (set, class).
struct Balance {
    Counts class_counts;
    std::array<long long, 3> totals{};
    long long all = 0;

    double fraction_excess(const std::array<double, 3>& fractions, double slack) const {
        double worst = 0.0;
        for (int s = 0; s < 3; ++s) {
            const double f = all == 0 ? 0.0 : static_cast<double>(totals[s]) / static_cast<double>(all);
            worst = std::max(worst, std::abs(f - fractions[s]) - slack);
        }
        return std::max(worst, 0.0);
    }

    double deviation(std::span<const std::size_t> classes) const {
        double worst = 0.0;
        for (std::size_t c : classes) {
            for (int a = 0; a < 3; ++a) {
                if (totals[a] == 0) {
                    continue;
                }
                const double pa = static_cast<double>(class_counts[a][c]) / static_cast<double>(totals[a]);
                for (int b = a + 1; b < 3; ++b) {
                    if (totals[b] == 0) {
                        continue;
                    }
                    const double pb = static_cast<double>(class_counts[b][c]) / static_cast<double>(totals[b]);
                    worst = std::max(worst, std::abs(pa - pb));
                }
            }
        }
        return worst;
    }

    void apply(const Patient& p, int from, int to) {
        for (std::size_t c = 0; c < p.class_images.size(); ++c) {
            class_counts[from][c] -= p.class_images[c];
            class_counts[to][c] += p.class_images[c];
        }
        totals[from] -= static_cast<long long>(p.count);
        totals[to] += static_cast<long long>(p.count);
    }
};

// Image fractions may drift this far from the targets before the repair objective penalizes it.
constexpr double kFractionSlack = 0.005;
constexpr double kFractionPenalty = 1000.0;

double objective(const Balance& balance, const std::array<double, 3>& fractions,
                 std::span<const std::size_t> classes) {
    return balance.deviation(classes) + kFractionPenalty * balance.fraction_excess(fractions, kFractionSlack);
}

} // namespace

SplitAssignment split(std::span<const LabeledRecord> records, const SplitSpec& spec) {
    spec.validate();
    SplitAssignment assignment;
    assignment.seed = spec.seed;
    if (records.empty()) {
        assignment.distribution.sets.fill(SetStats{});
        return assignment;
    }
    const GradingSystem system = records.front().second.system();
    const std::size_t k = class_count(system);
    assignment.system = system;

    // Canonical order makes the result independent of the input order.
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& ra = records[a].first;
        const auto& rb = records[b].first;
        return std::tie(ra.patient_id, ra.image_id) < std::tie(rb.patient_id, rb.image_id);
    });
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (records[order[i]].second.system() != system) {
            throw Error(ErrorCode::RangeError, "records labeled under different grading systems");
        }
        if (i > 0 && records[order[i]].first.image_id == records[order[i - 1]].first.image_id) {
            throw Error(ErrorCode::RangeError, "duplicate image_id '" + records[order[i]].first.image_id + "'");
        }
    }

    std::vector<Patient> patients;
    for (std::size_t i = 0; i < order.size();) {
        Patient p;
        p.first = i;
        p.class_images.assign(k, 0);
        const auto& pid = records[order[i]].first.patient_id;
        while (i < order.size() && records[order[i]].first.patient_id == pid) {
            const std::size_t cls = records[order[i]].second.index();
            ++p.class_images[cls];
            p.stratum = std::max(p.stratum, cls);
            ++p.count;
            ++i;
        }
        patients.push_back(std::move(p));
    }

    std::vector<std::vector<std::size_t>> strata(k);
    for (std::size_t i = 0; i < patients.size(); ++i) {
        strata[patients[i].stratum].push_back(i);
    }
    for (std::size_t c = 0; c < k; ++c) {
        if (strata[c].size() >= kMinStratumPatients) {
            assignment.checked_classes.push_back(c);
        }
    }

    // Greedy: within each stratum, hand the next shuffled patient to the set
    // furthest below its share of the stratum's images so far.
    Rng rng(spec.seed);
    std::vector<int> set_of_patient(patients.size(), 0);
    Balance balance;
    for (auto& counts : balance.class_counts) {
        counts.assign(k, 0);
    }
    for (auto& stratum : strata) {
        rng.shuffle(std::span<std::size_t>(stratum));
        std::array<long long, 3> assigned{};
        long long stratum_total = 0;
        for (std::size_t pi : stratum) {
            const Patient& p = patients[pi];
            stratum_total += static_cast<long long>(p.count);
            int best = 0;
            double best_deficit = -1e300;
            for (int s = 0; s < 3; ++s) {
                const double deficit = spec.fractions[s] * static_cast<double>(stratum_total) -
                                       static_cast<double>(assigned[s]);
                if (deficit > best_deficit) {
                    best_deficit = deficit;
                    best = s;
                }
            }
            set_of_patient[pi] = best;
            assigned[best] += static_cast<long long>(p.count);
            for (std::size_t c = 0; c < k; ++c) {
                balance.class_counts[best][c] += p.class_images[c];
            }
            balance.totals[best] += static_cast<long long>(p.count);
        }
    }
    balance.all = static_cast<long long>(records.size());

    // Repair: move or swap one representative patient per (set, composition)
    // group, taking the single best improving change each round.
    if (!assignment.checked_classes.empty()) {
        using Signature = std::vector<long long>;
        std::array<std::map<Signature, std::set<std::size_t>>, 3> groups;
        for (std::size_t i = 0; i < patients.size(); ++i) {
            groups[set_of_patient[i]][patients[i].class_images].insert(i);
        }
        const auto& classes = assignment.checked_classes;
        double current = objective(balance, spec.fractions, classes);
        for (int move = 0; move < spec.max_repair_moves && current > 0.0; ++move) {
            double best = current;
            std::size_t best_x = SIZE_MAX;
            std::size_t best_y = SIZE_MAX; // SIZE_MAX: plain move
            int best_from = 0;
            int best_to = 0;
            for (int a = 0; a < 3; ++a) {
                for (int b = 0; b < 3; ++b) {
                    if (a == b) {
                        continue;
                    }
                    for (const auto& [sig_a, members_a] : groups[a]) {
                        const std::size_t x = *members_a.begin();
                        balance.apply(patients[x], a, b);
                        const double moved = objective(balance, spec.fractions, classes);
                        if (moved < best - 1e-15) {
                            best = moved;
                            best_x = x;
                            best_y = SIZE_MAX;
                            best_from = a;
                            best_to = b;
                        }
                        if (a < b) { // swaps are symmetric
                            for (const auto& [sig_b, members_b] : groups[b]) {
                                if (sig_a == sig_b) {
                                    continue;
                                }
                                const std::size_t y = *members_b.begin();
                                balance.apply(patients[y], b, a);
                                const double value = objective(balance, spec.fractions, classes);
                                balance.apply(patients[y], a, b);
                                if (value < best - 1e-15) {
                                    best = value;
                                    best_x = x;
                                    best_y = y;
                                    best_from = a;
                                    best_to = b;
                                }
                            }
                        }
                        balance.apply(patients[x], b, a);
                    }
                }
            }
            if (best_x == SIZE_MAX) {
                break;
            }
            auto relocate = [&](std::size_t idx, int from, int to) {
                auto& from_group = groups[from][patients[idx].class_images];
                from_group.erase(idx);
                if (from_group.empty()) {
                    groups[from].erase(patients[idx].class_images);
                }
                groups[to][patients[idx].class_images].insert(idx);
                balance.apply(patients[idx], from, to);
                set_of_patient[idx] = to;
            };
            relocate(best_x, best_from, best_to);
            if (best_y != SIZE_MAX) {
                relocate(best_y, best_to, best_from);
            }
            current = best;
        }
    }

    for (std::size_t pi = 0; pi < patients.size(); ++pi) {
        const Patient& p = patients[pi];
        for (std::size_t j = p.first; j < p.first + p.count; ++j) {
            assignment.sets.emplace(records[order[j]].first.image_id, static_cast<SplitSet>(set_of_patient[pi]));
        }
    }
    assignment.distribution = split_table(assignment, records);
    assignment.achieved_deviation = max_pairwise_deviation(assignment.distribution, assignment.checked_classes);
    if (assignment.achieved_deviation > spec.tolerance) {
        throw Error(ErrorCode::InfeasibleSplit,
                    fmt::format("best achieved per-class deviation {:.4f} exceeds tolerance {:.4f}",
                                assignment.achieved_deviation, spec.tolerance));
    }
    return assignment;
}

DistributionTable split_table(const SplitAssignment& assignment, std::span<const LabeledRecord> records) {
    DistributionTable table;
    table.system = records.empty() ? assignment.system : records.front().second.system();
    const std::size_t k = class_count(table.system);
    for (auto& s : table.sets) {
        s.class_images.assign(k, 0);
    }
    std::array<std::unordered_set<std::string>, 3> patients;
    for (const auto& [record, label] : records) {
        const int s = static_cast<int>(assignment.set_of(record.image_id));
        ++table.sets[s].images;
        ++table.sets[s].class_images[label.index()];
        patients[s].insert(record.patient_id);
    }
    for (int s = 0; s < 3; ++s) {
        table.sets[s].patients = patients[s].size();
    }
    return table;
}

std::string format_split_csv(const SplitAssignment& assignment) {
    std::string out = "image_id,set\n";
    for (const auto& [image_id, set] : assignment.sets) {
        out += image_id;
        out += ',';
        out += set_token(set);
        out += '\n';
    }
    return out;
}

std::map<std::string, SplitSet> parse_split_csv(std::string_view text) {
    const auto lines = io::split_lines(text);
    std::size_t i = 0;
    while (i < lines.size() && io::trim(lines[i]).empty()) {
        ++i;
    }
    if (i == lines.size() || io::split_csv_row(lines[i]) != std::vector<std::string_view>{"image_id", "set"}) {
        throw Error(ErrorCode::FatalFormat, "split CSV header must be 'image_id,set'");
    }
    std::map<std::string, SplitSet> sets;
    for (++i; i < lines.size(); ++i) {
        if (io::trim(lines[i]).empty()) {
            continue;
        }
        const auto cells = io::split_csv_row(lines[i]);
        if (cells.size() != 2 || cells[0].empty()) {
            throw Error(ErrorCode::FatalFormat, "malformed split row at line " + std::to_string(i + 1));
        }
        if (!sets.emplace(std::string(cells[0]), parse_set(cells[1])).second) {
            throw Error(ErrorCode::RangeError, "duplicate image_id '" + std::string(cells[0]) + "' in split");
        }
    }
    return sets;
}

namespace {

std::string tenths(long long value) { return fmt::format("{}.{}", value / 10, value % 10); }

} // namespace

std::string distribution_csv(const DistributionTable& table) {
    std::string out = "system,row,train,train_pct,tune,tune_pct,validation,validation_pct\n";
    const auto sys = system_token(table.system);
    out += fmt::format("{},patients,{},,{},,{},\n", sys, table.sets[0].patients, table.sets[1].patients,
                       table.sets[2].patients);
    out += fmt::format("{},images_total", sys);
    for (auto set : kAllSets) {
        out += fmt::format(",{},{}", table.sets[static_cast<int>(set)].images, tenths(table.set_share_tenths(set)));
    }
    out += '\n';
    for (std::size_t c = 0; c < class_count(table.system); ++c) {
        out += fmt::format("{},grade_{}", sys, c);
        for (auto set : kAllSets) {
            out += fmt::format(",{},{}", table.sets[static_cast<int>(set)].class_images[c],
                               tenths(table.class_percent_tenths(set, c)));
        }
        out += '\n';
    }
    return out;
}

std::string distribution_text(const DistributionTable& table) {
    constexpr int w0 = 16;
    constexpr int w1 = 26;
    constexpr int w = 20;
    std::string out = fmt::format("{:<{}}{:<{}}{:<{}}{:<{}}{}\n", "Grading system", w0, "Patients / Label", w1,
                                  "Training", w, "Tuning", w, "Primary validation");
    const auto name = std::string(system_token(table.system));
    std::string upper = name;
    std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return std::toupper(c); });
    out += fmt::format("{:<{}}{:<{}}{:<{}}{:<{}}{}\n", upper, w0, "Patients, No.", w1, table.sets[0].patients, w,
                       table.sets[1].patients, w, table.sets[2].patients);
    auto cell = [](std::size_t n, long long pct) { return fmt::format("{} ({})", n, tenths(pct)); };
    out += fmt::format("{:<{}}{:<{}}{:<{}}{:<{}}{}\n", "", w0, "Images Total, No. (%)", w1,
                       cell(table.sets[0].images, table.set_share_tenths(SplitSet::Train)), w,
                       cell(table.sets[1].images, table.set_share_tenths(SplitSet::Tune)), w,
                       cell(table.sets[2].images, table.set_share_tenths(SplitSet::Validation)));
    for (std::size_t c = 0; c < class_count(table.system); ++c) {
        out += fmt::format("{:<{}}{:<{}}{:<{}}{:<{}}{}\n", "", w0, fmt::format("Images Grade {}, No. (%)", c), w1,
                           cell(table.sets[0].class_images[c], table.class_percent_tenths(SplitSet::Train, c)), w,
                           cell(table.sets[1].class_images[c], table.class_percent_tenths(SplitSet::Tune, c)), w,
                           cell(table.sets[2].class_images[c], table.class_percent_tenths(SplitSet::Validation, c)));
    }
    return out;
}

} // namespace fundus
