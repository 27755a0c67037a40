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

#include "fundus/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "fundus/error.hpp"
#include "fundus/random.hpp"
#include "fundus/special.hpp"

namespace fundus::synth {

namespace {

// Pooled image counts over all three sets of the reference division.
constexpr std::array<double, 5> kPircImages{15962, 4043, 13130, 2087, 408};
constexpr std::array<double, 4> kPimecImages{30094, 2233, 2226, 1077};
constexpr double kUngradableImages = 5492;
constexpr double kAllImages = 41122;

void check_distribution(std::span<const double> p, std::string_view what) {
    double sum = 0.0;
    for (double v : p) {
        if (!(v >= 0.0)) {
            throw Error(ErrorCode::RangeError, fmt::format("{} probabilities must be nonnegative", what));
        }
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw Error(ErrorCode::RangeError, fmt::format("{} probabilities sum to {}, expected 1", what, sum));
    }
}

double binomial_pmf(int m, int n, double p) {
    double c = 1.0;
    for (int i = 0; i < m; ++i) {
        c = c * (n - i) / (i + 1);
    }
    return c * std::pow(p, m) * std::pow(1.0 - p, n - m);
}

// Expected per-patient count of images with grade c for stratum s (matrix [c][s]).
std::vector<std::vector<double>> expected_counts(std::size_t k, double q, double g) {
    std::vector<std::vector<double>> a(k, std::vector<double>(k, 0.0));
    for (std::size_t s = 0; s < k; ++s) {
        const double sd = static_cast<double>(s);
        const double p_top = q + (1.0 - q) / (sd + 1.0);
        for (int m = 1; m <= kImagesPerPatient; ++m) {
            const double w = binomial_pmf(m, kImagesPerPatient, g);
            // When no image reaches the stratum, one lower-grade image is promoted.
            const double promote = std::pow(1.0 - p_top, m);
            a[s][s] += w * (m * p_top + promote);
            for (std::size_t c = 0; c < s; ++c) {
                a[c][s] += w * (m * (1.0 - q) / (sd + 1.0) - promote / sd);
            }
        }
    }
    return a;
}

std::vector<double> normalized(std::span<const double> counts) {
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    std::vector<double> out(counts.begin(), counts.end());
    for (auto& v : out) {
        v /= total;
    }
    return out;
}

std::size_t draw_grade(Rng& rng, std::size_t stratum, double q) {
    if (rng.uniform() < q) {
        return stratum;
    }
    return static_cast<std::size_t>(rng.below(stratum + 1));
}

} // namespace

double binormal_mu(double target_auc) {
    if (!(target_auc >= 0.5 && target_auc < 1.0)) {
        throw Error(ErrorCode::RangeError, fmt::format("target AUC must lie in [0.5, 1), got {}", target_auc));
    }
    if (target_auc == 0.5) {
        return 0.0;
    }
    return std::sqrt(2.0) * special::normal_quantile(target_auc);
}

double logistic(double x) noexcept {
    return 1.0 / (1.0 + std::exp(-x));
}

BinaryScores gen_binary_scores(const BinormalSpec& spec) {
    const double mu = binormal_mu(spec.target_auc);
    Rng rng(spec.seed);
    BinaryScores out;
    out.labels.reserve(spec.n_neg + spec.n_pos);
    out.scores.reserve(spec.n_neg + spec.n_pos);
    for (std::size_t i = 0; i < spec.n_neg; ++i) {
        out.labels.push_back(0);
        out.scores.push_back(logistic(rng.normal()));
    }
    for (std::size_t i = 0; i < spec.n_pos; ++i) {
        out.labels.push_back(1);
        out.scores.push_back(logistic(mu + rng.normal()));
    }
    return out;
}

std::vector<double> binormal_scores_for(std::span<const int> labels, double target_auc, std::uint64_t seed) {
    const double mu = binormal_mu(target_auc);
    std::vector<double> scores(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1) {
            throw Error(ErrorCode::RangeError, "binary labels must be 0 or 1");
        }
        Rng rng = Rng::substream(seed, i);
        scores[i] = logistic((labels[i] == 1 ? mu : 0.0) + rng.normal());
    }
    return scores;
}

std::vector<std::vector<double>> gen_ordinal_scores(std::span<const std::size_t> labels, std::size_t k, double quality,
                                                    std::uint64_t seed) {
    if (k < 2) {
        throw Error(ErrorCode::RangeError, "ordinal scores need K >= 2");
    }
    if (!(quality >= 0.0) || !std::isfinite(quality)) {
        throw Error(ErrorCode::RangeError, "quality must be a finite value >= 0");
    }
    std::vector<std::vector<double>> out;
    out.reserve(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= k) {
            throw Error(ErrorCode::RangeError, "label out of range for K classes");
        }
        std::vector<double> p(k, 1.0 / static_cast<double>(k));
        if (quality > 0.0) {
            Rng rng = Rng::substream(seed, i);
            const double latent = static_cast<double>(labels[i]) + rng.normal() / quality;
            double best = -INFINITY;
            for (std::size_t j = 0; j < k; ++j) {
                const double d = latent - static_cast<double>(j);
                p[j] = -d * d;
                best = std::max(best, p[j]);
            }
            double sum = 0.0;
            for (auto& v : p) {
                v = std::exp(v - best);
                sum += v;
            }
            for (auto& v : p) {
                v /= sum;
            }
        }
        out.push_back(std::move(p));
    }
    return out;
}

void PopulationSpec::validate() const {
    if (n_patients < 1) {
        throw Error(ErrorCode::RangeError, "population needs at least one patient");
    }
    if (pirc_strata.size() != PircGrade::kMax + 1 || pimec_strata.size() != PimecGrade::kMax + 1) {
        throw Error(ErrorCode::RangeError, "stratum vectors must have 5 (PIRC) and 4 (PIMEC) entries");
    }
    check_distribution(pirc_strata, "PIRC stratum");
    check_distribution(pimec_strata, "PIMEC stratum");
    if (!(gradable_rate >= 0.0 && gradable_rate <= 1.0) || !(concordance >= 0.0 && concordance <= 1.0)) {
        throw Error(ErrorCode::RangeError, "gradable rate and concordance must lie in [0,1]");
    }
}

std::vector<double> expected_image_marginal(std::span<const double> strata, double concordance, double gradable_rate) {
    const auto a = expected_counts(strata.size(), concordance, gradable_rate);
    std::vector<double> counts(strata.size(), 0.0);
    for (std::size_t c = 0; c < strata.size(); ++c) {
        for (std::size_t s = 0; s < strata.size(); ++s) {
            counts[c] += a[c][s] * strata[s];
        }
    }
    return normalized(counts);
}

std::vector<double> calibrate_strata(std::span<const double> image_marginal, double concordance,
                                     double gradable_rate) {
    if (!(gradable_rate > 0.0)) {
        throw Error(ErrorCode::RangeError, "calibration needs a positive gradable rate");
    }
    const std::size_t k = image_marginal.size();
    const auto a = expected_counts(k, concordance, gradable_rate);
    const auto target = normalized(image_marginal);
    const double per_patient = kImagesPerPatient * gradable_rate;
    // Grade c receives mass only from strata >= c, so solve from the top grade down.
    std::vector<double> pi(k, 0.0);
    for (std::size_t c = k; c-- > 0;) {
        double rest = target[c] * per_patient;
        for (std::size_t s = c + 1; s < k; ++s) {
            rest -= a[c][s] * pi[s];
        }
        pi[c] = std::max(0.0, rest / a[c][c]);
    }
    return normalized(pi);
}

std::vector<std::string> preset_names() {
    return {"table1-rdr", "table1-rdme", "table1-pirc", "table1-pimec", "table1-qrdr"};
}

PopulationSpec population_preset(std::string_view name, std::size_t n_patients, std::uint64_t seed) {
    PopulationSpec spec;
    if (name == "table1-rdr") {
        spec.system = GradingSystem::RDR;
    } else if (name == "table1-rdme") {
        spec.system = GradingSystem::RDME;
    } else if (name == "table1-pirc") {
        spec.system = GradingSystem::PIRC;
    } else if (name == "table1-pimec") {
        spec.system = GradingSystem::PIMEC;
    } else if (name == "table1-qrdr") {
        spec.system = GradingSystem::QRDR;
    } else {
        throw Error(ErrorCode::RangeError, "unknown preset '" + std::string(name) + "'");
    }
    spec.n_patients = n_patients;
    spec.seed = seed;
    spec.concordance = 0.8;
    spec.gradable_rate = 1.0 - kUngradableImages / kAllImages;
    spec.pirc_strata = calibrate_strata(kPircImages, spec.concordance, spec.gradable_rate);
    spec.pimec_strata = calibrate_strata(kPimecImages, spec.concordance, spec.gradable_rate);
    spec.validate();
    return spec;
}

std::vector<GradeRecord> gen_population(const PopulationSpec& spec) {
    spec.validate();
    static constexpr Eye kEyes[] = {Eye::Left, Eye::Right};
    static constexpr Field kFields[] = {Field::Fovea, Field::OpticDisc};
    const int digits = std::max(5, static_cast<int>(std::to_string(spec.n_patients).size()));
    std::vector<GradeRecord> records;
    records.reserve(spec.n_patients * kImagesPerPatient);
    for (std::size_t p = 0; p < spec.n_patients; ++p) {
        Rng rng = Rng::substream(spec.seed, p);
        const std::size_t pirc_stratum = rng.categorical(spec.pirc_strata);
        const std::size_t pimec_stratum = rng.categorical(spec.pimec_strata);
        const std::string patient = fmt::format("P{:0{}}", p + 1, digits);

        std::array<GradeRecord, kImagesPerPatient> images;
        std::array<std::size_t, kImagesPerPatient> pirc{};
        std::array<std::size_t, kImagesPerPatient> pimec{};
        int first_gradable = -1;
        bool pirc_reached = false;
        bool pimec_reached = false;
        for (int i = 0; i < kImagesPerPatient; ++i) {
            auto& r = images[static_cast<std::size_t>(i)];
            r.patient_id = patient;
            r.eye = kEyes[i / 2];
            r.field = kFields[i % 2];
            r.image_id = fmt::format("{}_{}_{}", patient, r.eye == Eye::Left ? "L" : "R",
                                     r.field == Field::Fovea ? "fovea" : "disc");
            r.gradable = rng.uniform() < spec.gradable_rate;
            pirc[static_cast<std::size_t>(i)] = draw_grade(rng, pirc_stratum, spec.concordance);
            pimec[static_cast<std::size_t>(i)] = draw_grade(rng, pimec_stratum, spec.concordance);
            if (r.gradable) {
                if (first_gradable < 0) {
                    first_gradable = i;
                }
                pirc_reached |= pirc[static_cast<std::size_t>(i)] == pirc_stratum;
                pimec_reached |= pimec[static_cast<std::size_t>(i)] == pimec_stratum;
            }
        }
        if (first_gradable >= 0) {
            if (!pirc_reached) {
                pirc[static_cast<std::size_t>(first_gradable)] = pirc_stratum;
            }
            if (!pimec_reached) {
                pimec[static_cast<std::size_t>(first_gradable)] = pimec_stratum;
            }
        }
        for (std::size_t i = 0; i < images.size(); ++i) {
            auto& r = images[i];
            if (r.gradable) {
                r.pirc = PircGrade(static_cast<int>(pirc[i]));
                r.pimec = PimecGrade(static_cast<int>(pimec[i]));
            }
            records.push_back(std::move(r));
        }
    }
    return records;
}

RasterImage gen_fundus_image(int width, int height, int radius, bool annotation, std::uint64_t seed) {
    if (radius < 8) {
        throw Error(ErrorCode::RangeError, "disk radius must be at least 8");
    }
    RasterImage image(width, height);
    const int cx = width / 2;
    const int cy = height / 2;
    if (cx - radius < 0 || cx + radius >= width || cy - radius < 0 || cy + radius >= height) {
        throw Error(ErrorCode::RangeError, fmt::format("disk of radius {} does not fit in {}x{}", radius, width, height));
    }

    int block_x = 0;
    int block_y = 0;
    int block_w = 0;
    int block_h = 0;
    if (annotation) {
        // Keep a gap of 3 px from the frame edge and from the disk's bounding square.
        const int left_room = cx - radius - 6;
        const int top_room = cy - radius - 6;
        if (left_room >= 12) {
            block_w = std::min(60, left_room);
            block_h = std::min(16, height - 6);
        } else if (top_room >= 12) {
            block_w = std::min(60, width - 6);
            block_h = std::min(16, top_room);
        } else {
            throw Error(ErrorCode::RangeError, "no room outside the disk's bounding square for an annotation");
        }
        block_x = 3;
        block_y = 3;
    }

    Rng rng(seed);
    const double r2 = static_cast<double>(radius) * radius;
    const double disc_x = cx + 0.35 * radius;
    const double disc_r2 = 0.0144 * r2;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double dx = x - cx;
            const double dy = y - cy;
            const double d2 = dx * dx + dy * dy;
            if (d2 > r2) {
                continue;
            }
            const double fall = d2 / r2;
            const double noise = (rng.uniform() - 0.5) * 24.0;
            double r = 200.0 - 80.0 * fall + noise;
            double g = 95.0 - 40.0 * fall + 0.5 * noise;
            double b = 45.0 - 20.0 * fall + 0.25 * noise;
            const double ox = x - disc_x;
            if (ox * ox + dy * dy <= disc_r2) {
                r = 250.0;
                g = 220.0 + 0.5 * noise;
                b = 150.0;
            }
            image.set(x, y, static_cast<std::uint8_t>(std::lround(r)), static_cast<std::uint8_t>(std::lround(g)),
                      static_cast<std::uint8_t>(std::lround(b)));
        }
    }
    for (int y = block_y; y < block_y + block_h; ++y) {
        for (int x = block_x; x < block_x + block_w; ++x) {
            // Glyph-like cells separated by dark gutters.
            if ((x - block_x) % 6 < 4 && (y - block_y) % 8 < 6) {
                image.set(x, y, 255, 255, 255);
            }
        }
    }
    return image;
}

} // namespace fundus::synth
