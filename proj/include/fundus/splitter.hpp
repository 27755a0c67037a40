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

#ifndef FUNDUS_SPLITTER_HPP
#define FUNDUS_SPLITTER_HPP

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fundus/grading.hpp"

namespace fundus {

enum class SplitSet { Train = 0, Tune = 1, Validation = 2 };

inline constexpr std::array<SplitSet, 3> kAllSets{SplitSet::Train, SplitSet::Tune, SplitSet::Validation};

[[nodiscard]] std::string_view set_token(SplitSet set) noexcept;
[[nodiscard]] SplitSet parse_set(std::string_view text);

struct SplitSpec {
    std::array<double, 3> fractions{0.70, 0.10, 0.20};
    std::uint64_t seed = 0;
    /// Max pairwise difference of a class's image proportion between two sets.
    double tolerance = 0.015;
    /// Repair budget (patient moves/swaps) after the greedy pass.
    int max_repair_moves = 1000;

    /// Throws RangeError on fractions outside (0,1), a sum away from 1, or tolerance outside (0, 0.1].
    void validate() const;
};

struct SetStats {
    std::size_t patients = 0;
    std::size_t images = 0;
    std::vector<std::size_t> class_images;
};

/// Table-1 style summary of one assignment.
struct DistributionTable {
    GradingSystem system = GradingSystem::RDR;
    std::array<SetStats, 3> sets;

    [[nodiscard]] std::size_t total_images() const noexcept;
    /// Share of all images held by the set, in tenths of a percent (half-up).
    [[nodiscard]] long long set_share_tenths(SplitSet set) const;
    /// Class proportion within the set, in tenths of a percent (half-up).
    [[nodiscard]] long long class_percent_tenths(SplitSet set, std::size_t cls) const;
    /// Class proportion within the set as an exact ratio (0 for empty sets).
    [[nodiscard]] double class_proportion(SplitSet set, std::size_t cls) const;
};

/// count/total as a percentage rounded half-up to one decimal, returned in tenths.
[[nodiscard]] long long percent_tenths_half_up(std::size_t count, std::size_t total) noexcept;

/// Largest |p_a(c) - p_b(c)| over classes in `classes` and pairs of nonempty sets.
[[nodiscard]] double max_pairwise_deviation(const DistributionTable& table, std::span<const std::size_t> classes);

struct SplitAssignment {
    GradingSystem system = GradingSystem::RDR;
    std::uint64_t seed = 0;
    std::map<std::string, SplitSet> sets; ///< image_id -> set
    DistributionTable distribution;
    /// Classes whose stratum holds enough patients for the tolerance to be enforced.
    std::vector<std::size_t> checked_classes;
    /// max_pairwise_deviation over checked_classes after repair.
    double achieved_deviation = 0.0;

    [[nodiscard]] SplitSet set_of(const std::string& image_id) const;
};

/// Minimum number of patients in stratum c before the per-class tolerance applies to c.
inline constexpr std::size_t kMinStratumPatients = 20;

/// Highest class index among one patient's images.
[[nodiscard]] std::size_t patient_stratum(std::span<const LabeledRecord> records_of_one_patient);

/// Patient-exclusive, stratum-balanced split. Deterministic in (records as a set, spec).
[[nodiscard]] SplitAssignment split(std::span<const LabeledRecord> records, const SplitSpec& spec);

[[nodiscard]] DistributionTable split_table(const SplitAssignment& assignment,
                                            std::span<const LabeledRecord> records);

// Wire formats

[[nodiscard]] std::string format_split_csv(const SplitAssignment& assignment);
/// image_id -> set; FatalFormat on a bad header, RangeError on unknown set names or duplicates.
[[nodiscard]] std::map<std::string, SplitSet> parse_split_csv(std::string_view text);

[[nodiscard]] std::string distribution_csv(const DistributionTable& table);
[[nodiscard]] std::string distribution_text(const DistributionTable& table);

} // namespace fundus

#endif // FUNDUS_SPLITTER_HPP
