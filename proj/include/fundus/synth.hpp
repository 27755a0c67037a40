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

#ifndef FUNDUS_SYNTH_HPP
#define FUNDUS_SYNTH_HPP

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fundus/grading.hpp"
#include "fundus/image.hpp"

namespace fundus::synth {

/// Binormal separation giving the requested AUC: sqrt(2) * inverse-Phi(auc).
/// Throws RangeError outside [0.5, 1).
[[nodiscard]] double binormal_mu(double target_auc);

/// Monotone map of the real line onto (0, 1).
[[nodiscard]] double logistic(double x) noexcept;

struct BinormalSpec {
    std::size_t n_pos = 0;
    std::size_t n_neg = 0;
    double target_auc = 0.5;
    std::uint64_t seed = 0;
};

struct BinaryScores {
    std::vector<int> labels;
    std::vector<double> scores;
};

/// Negatives N(0,1), positives N(mu,1), squashed by the logistic. Negatives come first.
[[nodiscard]] BinaryScores gen_binary_scores(const BinormalSpec& spec);

/// Binormal scores for given 0/1 labels; item i uses its own substream so the
/// score of an item does not depend on the others.
[[nodiscard]] std::vector<double> binormal_scores_for(std::span<const int> labels, double target_auc,
                                                      std::uint64_t seed);

/// Probability vectors from a latent ordinal model: latent = class + noise / quality,
/// p_j proportional to exp(-(latent - j)^2). Quality 0 gives uniform vectors.
[[nodiscard]] std::vector<std::vector<double>> gen_ordinal_scores(std::span<const std::size_t> labels, std::size_t k,
                                                                  double quality, std::uint64_t seed);

struct PopulationSpec {
    std::size_t n_patients = 1;
    /// Patient-level maximum PIRC grade (5 entries) and PIMEC grade (4 entries).
    std::vector<double> pirc_strata{1.0, 0.0, 0.0, 0.0, 0.0};
    std::vector<double> pimec_strata{1.0, 0.0, 0.0, 0.0};
    double gradable_rate = 1.0;
    /// Probability that an image shows the patient's stratum grade; the rest are
    /// uniform over grades up to the stratum.
    double concordance = 0.8;
    std::uint64_t seed = 0;
    /// Grading system the preset targets; used for default scores and splits.
    GradingSystem system = GradingSystem::RDR;

    /// Throws RangeError on malformed probabilities or rates.
    void validate() const;
};

inline constexpr int kImagesPerPatient = 4;

/// Stratum probabilities whose expected image-level grade distribution equals
/// `image_marginal` under the generator's concordance and gradability model.
[[nodiscard]] std::vector<double> calibrate_strata(std::span<const double> image_marginal, double concordance,
                                                   double gradable_rate);

/// Expected image-level grade distribution for given stratum probabilities.
[[nodiscard]] std::vector<double> expected_image_marginal(std::span<const double> strata, double concordance,
                                                          double gradable_rate);

/// Presets "table1-rdr", "table1-pirc", "table1-pimec", "table1-qrdr", "table1-rdme",
/// calibrated to the reference dataset's pooled image distribution.
[[nodiscard]] PopulationSpec population_preset(std::string_view name, std::size_t n_patients, std::uint64_t seed);
[[nodiscard]] std::vector<std::string> preset_names();

/// Four images per patient (both eyes, fovea- and disc-centred). Image ids are
/// `<patient>_<L|R>_<fovea|disc>`. Pure function of `spec`.
[[nodiscard]] std::vector<GradeRecord> gen_population(const PopulationSpec& spec);

/// Black frame with a textured bright disk centred at (width/2, height/2). With
/// `annotation`, a bright text-like block is drawn in a corner outside the disk's
/// bounding square. Throws RangeError if the disk or the block does not fit.
[[nodiscard]] RasterImage gen_fundus_image(int width, int height, int radius, bool annotation, std::uint64_t seed);

} // namespace fundus::synth

#endif // FUNDUS_SYNTH_HPP
