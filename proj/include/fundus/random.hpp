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

#ifndef FUNDUS_RANDOM_HPP
#define FUNDUS_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <utility>

namespace fundus {

/// Seeded generator whose derived draws are identical on every platform.
///
/// std::mt19937_64 output is fully specified by the standard, but the
/// std::*_distribution adaptors are not, so uniform/normal/bounded draws are
/// derived here directly from the raw 64-bit stream.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Child stream for item `index` of a parallel batch; independent of scheduling.
    [[nodiscard]] static Rng substream(std::uint64_t seed, std::uint64_t index) {
        return Rng(mix(seed ^ mix(index + 0x9E3779B97F4A7C15ULL)));
    }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Unbiased integer in [0, bound) by rejection.
    std::uint64_t below(std::uint64_t bound) {
        if (bound <= 1) {
            return 0;
        }
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t x = engine_();
        while (x >= limit) {
            x = engine_();
        }
        return x % bound;
    }

    /// Standard normal via Box-Muller (one variate per call, the pair's sibling is cached).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) {
            u1 = uniform();
        }
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    /// Index drawn from a discrete distribution (weights need not be normalized).
    std::size_t categorical(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) {
            total += w;
        }
        double u = uniform() * total;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (u < weights[i]) {
                return i;
            }
            u -= weights[i];
        }
        // Rounding can leave u marginally above the last bucket.
        for (std::size_t i = weights.size(); i-- > 0;) {
            if (weights[i] > 0.0) {
                return i;
            }
        }
        return 0;
    }

    /// Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        // splitmix64 finalizer
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace fundus

#endif // FUNDUS_RANDOM_HPP
