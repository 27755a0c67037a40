#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "fundus/error.hpp"
#include "fundus/metrics.hpp"
#include "fundus/random.hpp"
#include "fundus/special.hpp"
#include "support/reference_tables.hpp"

using namespace fundus;

namespace {

// Oracle: pairwise Mann-Whitney count with half credit for ties.
double brute_force_auc(const std::vector<int>& labels, const std::vector<double>& scores) {
    long long twice = 0;
    long long pairs = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 1) {
            continue;
        }
        for (std::size_t j = 0; j < labels.size(); ++j) {
            if (labels[j] != 0) {
                continue;
            }
            ++pairs;
            twice += scores[i] > scores[j] ? 2 : (scores[i] == scores[j] ? 1 : 0);
        }
    }
    return static_cast<double>(twice) / (2.0 * static_cast<double>(pairs));
}

struct Instance {
    std::vector<int> labels;
    std::vector<double> scores;
};

// Random instance with coarse scores so ties are common; both classes present.
Instance random_instance(Rng& rng, std::size_t max_n) {
    Instance inst;
    const std::size_t n = 2 + rng.below(max_n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        inst.labels.push_back(static_cast<int>(rng.below(2)));
        inst.scores.push_back(static_cast<double>(rng.below(12)) / 11.0);
    }
    inst.labels[0] = 0;
    inst.labels[1] = 1;
    return inst;
}

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected fundus::Error");
    return ErrorCode::RangeError;
}

// Oracle: ROC TPR at an FPR strictly inside a segment, from thresholds enumerated directly.
double brute_tpr(const std::vector<int>& labels, const std::vector<double>& scores, double x) {
    std::vector<double> thresholds(scores);
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    const double pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
    const double neg = static_cast<double>(labels.size()) - pos;
    std::vector<std::pair<double, double>> pts{{0.0, 0.0}};
    for (double t : thresholds) {
        double tp = 0;
        double fp = 0;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (scores[i] >= t) {
                (labels[i] ? tp : fp) += 1;
            }
        }
        pts.emplace_back(fp / neg, tp / pos);
    }
    for (std::size_t i = 1; i < pts.size(); ++i) {
        if (pts[i - 1].first < x && x < pts[i].first) {
            const double t = (x - pts[i - 1].first) / (pts[i].first - pts[i - 1].first);
            return pts[i - 1].second + t * (pts[i].second - pts[i - 1].second);
        }
    }
    FAIL("x is not interior to a sloped segment");
    return 0.0;
}

} // namespace

TEST_CASE("roc_curve: hand-enumerated example") {
    const std::vector<int> labels{1, 1, 0, 0};
    const std::vector<double> scores{0.9, 0.4, 0.5, 0.1};
    const auto curve = roc_curve(labels, scores);
    const std::vector<std::pair<double, double>> expected{{0, 0}, {0, 0.5}, {0.5, 0.5}, {0.5, 1}, {1, 1}};
    REQUIRE(curve.points.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
        CHECK(curve.points[i].fpr == expected[i].first);
        CHECK(curve.points[i].tpr == expected[i].second);
    }
    CHECK(std::isinf(curve.points[0].threshold));
    CHECK(curve.points[1].threshold == 0.9);
    CHECK(auc(curve) == 0.75);
}

TEST_CASE("roc_curve: separated and tied extremes") {
    const std::vector<int> labels{0, 0, 1, 1};
    const auto perfect = roc_curve(labels, std::vector<double>{0.1, 0.2, 0.8, 0.9});
    CHECK(std::any_of(perfect.points.begin(), perfect.points.end(),
                      [](const RocPoint& p) { return p.fpr == 0.0 && p.tpr == 1.0; }));
    CHECK(auc(perfect) == 1.0);

    const auto tied = roc_curve(labels, std::vector<double>{0.3, 0.3, 0.3, 0.3});
    REQUIRE(tied.points.size() == 2);
    CHECK(tied.points[0].fpr == 0.0);
    CHECK(tied.points[1].tpr == 1.0);
    CHECK(auc(tied) == 0.5);
}

TEST_CASE("roc_curve: degenerate inputs") {
    CHECK(code_of([] { (void)roc_curve(std::vector<int>{1, 1}, std::vector<double>{0.1, 0.2}); }) ==
          ErrorCode::DegenerateClasses);
    CHECK(code_of([] { (void)roc_curve(std::vector<int>{0, 2}, std::vector<double>{0.1, 0.2}); }) ==
          ErrorCode::RangeError);
    CHECK(code_of([] { (void)roc_curve(std::vector<int>{0, 1}, std::vector<double>{0.1}); }) ==
          ErrorCode::RangeError);
}

TEST_CASE("property: curve invariants, Mann-Whitney equivalence, monotone-transform invariance") {
    Rng rng(2024);
    for (int trial = 0; trial < 300; ++trial) {
        const auto inst = random_instance(rng, 200);
        const auto curve = roc_curve(inst.labels, inst.scores);
        CHECK(curve.points.front().fpr == 0.0);
        CHECK(curve.points.front().tpr == 0.0);
        CHECK(curve.points.back().fpr == 1.0);
        CHECK(curve.points.back().tpr == 1.0);
        for (std::size_t i = 1; i < curve.points.size(); ++i) {
            CHECK(curve.points[i].fpr >= curve.points[i - 1].fpr);
            CHECK(curve.points[i].tpr >= curve.points[i - 1].tpr);
            CHECK(curve.points[i].threshold < curve.points[i - 1].threshold);
        }
        const double a = auc(curve);
        CHECK(std::abs(a - brute_force_auc(inst.labels, inst.scores)) <= 1e-12);
        CHECK(std::abs(rank_auc(inst.labels, inst.scores) - a) <= 1e-12);

        std::vector<double> transformed(inst.scores.size());
        std::transform(inst.scores.begin(), inst.scores.end(), transformed.begin(),
                       [](double s) { return std::exp(3.0 * s) - 7.0; });
        CHECK(auc(roc_curve(inst.labels, transformed)) == a);
    }
}

TEST_CASE("macro_roc: identical class curves give the common AUC exactly") {
    const OneVsAll c{{1, 0, 1, 0, 0, 1, 0}, {0.9, 0.1, 0.4, 0.5, 0.3, 0.7, 0.8}};
    const double single = auc(roc_curve(c.labels, c.scores));
    for (std::size_t k : {2U, 3U, 5U}) {
        const std::vector<OneVsAll> classes(k, c);
        CHECK(macro_roc(classes).auc == single);
    }
}

TEST_CASE("macro_roc: perfect plus all-tied classes average to 0.75") {
    const std::vector<OneVsAll> classes{{{1, 1, 0, 0}, {0.9, 0.8, 0.2, 0.1}}, {{1, 0, 1, 0}, {0.5, 0.5, 0.5, 0.5}}};
    const auto macro = macro_roc(classes);
    CHECK(macro.class_auc[0] == 1.0);
    CHECK(macro.class_auc[1] == 0.5);
    CHECK(macro.auc == doctest::Approx(0.75).epsilon(1e-15));
    // The vertical jump of the perfect curve shows up as two points at FPR 0.
    REQUIRE(macro.points.size() >= 3);
    CHECK(macro.points[0].fpr == 0.0);
    CHECK(macro.points[0].tpr == 0.0);
    CHECK(macro.points[1].fpr == 0.0);
    CHECK(macro.points[1].tpr == 0.5);
    CHECK(macro.points.back().tpr == 1.0);
}

TEST_CASE("macro_roc: matches a dense-grid midpoint integration of the vertical average") {
    Rng rng(99);
    for (int trial = 0; trial < 5; ++trial) {
        // Three classes with negatives counts dividing 120, so all breakpoints lie on the 1/120 grid.
        const std::size_t n = 24;
        std::vector<OneVsAll> classes(3);
        std::vector<std::size_t> truth(n);
        for (std::size_t i = 0; i < n; ++i) {
            truth[i] = i % 3;
        }
        for (std::size_t c = 0; c < 3; ++c) {
            for (std::size_t i = 0; i < n; ++i) {
                classes[c].labels.push_back(truth[i] == c ? 1 : 0);
                classes[c].scores.push_back(static_cast<double>(rng.below(7)) + (truth[i] == c ? 2.0 : 0.0));
            }
        }
        const auto macro = macro_roc(classes);

        constexpr int kGrid = 16 * 120;
        double area = 0.0;
        for (int g = 0; g < kGrid; ++g) {
            const double mid = (g + 0.5) / kGrid;
            double sum = 0.0;
            for (const auto& c : classes) {
                sum += brute_tpr(c.labels, c.scores, mid);
            }
            area += (sum / 3.0) / kGrid;
        }
        CHECK(std::abs(macro.auc - area) <= 1e-9);

        // Trapezoid over the averaged points agrees with the reported area.
        double trapezoid = 0.0;
        for (std::size_t i = 1; i < macro.points.size(); ++i) {
            trapezoid += (macro.points[i].fpr - macro.points[i - 1].fpr) *
                         (macro.points[i].tpr + macro.points[i - 1].tpr) / 2.0;
        }
        CHECK(std::abs(trapezoid - macro.auc) <= 1e-12);
    }
}

TEST_CASE("macro_roc: degenerate class is named") {
    const std::vector<OneVsAll> classes{{{1, 0}, {0.9, 0.1}}, {{0, 0}, {0.2, 0.3}}};
    try {
        (void)macro_roc(classes);
        FAIL("expected DegenerateClasses");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DegenerateClasses);
        CHECK(std::string(e.what()).find("class 1") != std::string::npos);
    }
}

TEST_CASE("confusion matrix construction") {
    const std::vector<std::size_t> labels{0, 1, 2, 1, 0};
    const auto diag = confusion(labels, labels, 3);
    CHECK(diag.trace() == 5);
    CHECK(diag.at(1, 1) == 2);

    const auto single = confusion(std::vector<std::size_t>{2}, std::vector<std::size_t>{0}, 3);
    CHECK(single.at(2, 0) == 1);
    CHECK(single.total() == 1);

    std::vector<std::size_t> truth{0, 1, 2, 2, 1, 0, 1};
    std::vector<std::size_t> pred{0, 2, 2, 1, 1, 0, 0};
    const auto cm = confusion(truth, pred, 3);
    std::vector<std::size_t> idx{6, 2, 4, 0, 1, 5, 3};
    std::vector<std::size_t> t2;
    std::vector<std::size_t> p2;
    for (auto i : idx) {
        t2.push_back(truth[i]);
        p2.push_back(pred[i]);
    }
    CHECK(confusion(t2, p2, 3) == cm);
    CHECK(code_of([] { (void)confusion(std::vector<std::size_t>{3}, std::vector<std::size_t>{0}, 3); }) ==
          ErrorCode::RangeError);
}

TEST_CASE("accuracy") {
    CHECK(accuracy(ConfusionMatrix{{1, 0}, {0, 1}}) == 1.0);
    CHECK(code_of([] { (void)accuracy(ConfusionMatrix(3)); }) == ErrorCode::EmptyMatrix);
    for (const auto& ref : fixtures::multiclass_references()) {
        CAPTURE(ref.input_size);
        CHECK(std::abs(accuracy(ref.matrix) - ref.accuracy) <= 0.0005);
    }
    const auto refs = fixtures::multiclass_references();
    CHECK(refs[4].matrix.trace() == 6198);
    CHECK(refs[4].matrix.total() == 7129);
    CHECK(refs[14].matrix.trace() == 7607);
    CHECK(refs[14].matrix.total() == 8226);
}

TEST_CASE("binary_rates") {
    const auto r = binary_rates(ConfusionMatrix{{95, 5}, {10, 90}});
    CHECK(r.sensitivity == doctest::Approx(0.90));
    CHECK(r.specificity == doctest::Approx(0.95));
    CHECK(r.accuracy == doctest::Approx(0.925));
    const auto perfect = binary_rates(ConfusionMatrix{{4, 0}, {0, 6}});
    CHECK(perfect.sensitivity == 1.0);
    CHECK(perfect.specificity == 1.0);
    CHECK(perfect.accuracy == 1.0);

    using namespace fixtures;
    const ConfusionMatrix screening{{kRdrTrueNegatives, kRdrNegatives - kRdrTrueNegatives},
                                    {kRdrPositives - kRdrTruePositives, kRdrTruePositives}};
    const auto s = binary_rates(screening);
    CHECK(std::round(s.sensitivity * 1000) == 896);
    CHECK(std::round(s.specificity * 1000) == 974);
    CHECK(code_of([] { (void)binary_rates(ConfusionMatrix{{3, 1}, {0, 0}}); }) == ErrorCode::EmptyClass);
    CHECK(code_of([] { (void)binary_rates(ConfusionMatrix(3)); }) == ErrorCode::RangeError);
}

TEST_CASE("binary_rates: [[90,10],[5,95]] with class 1 positive") {
    // Rows: truth 0 = {TN 90, FP 10}; truth 1 = {FN 5, TP 95}.
    const auto r = binary_rates(ConfusionMatrix{{90, 10}, {5, 95}});
    CHECK(r.sensitivity == doctest::Approx(0.95));
    CHECK(r.specificity == doctest::Approx(0.90));
    CHECK(r.accuracy == doctest::Approx(0.925));
}

TEST_CASE("quadratic_weighted_kappa") {
    CHECK(quadratic_weighted_kappa(ConfusionMatrix{{5, 0, 0}, {0, 3, 0}, {0, 0, 9}}) == doctest::Approx(1.0));
    CHECK(quadratic_weighted_kappa(ConfusionMatrix{{25, 25}, {25, 25}}) == doctest::Approx(0.0));
    for (const auto& ref : fixtures::multiclass_references()) {
        CAPTURE(ref.input_size);
        CHECK(std::abs(quadratic_weighted_kappa(ref.matrix) - ref.kappa) <= 0.005);
    }
    // Degenerate: all mass in one cell.
    CHECK(quadratic_weighted_kappa(ConfusionMatrix{{0, 0}, {0, 7}}) == 1.0);
    // Off-diagonal mass always yields nonzero expected disagreement.
    CHECK(quadratic_weighted_kappa(ConfusionMatrix{{0, 7}, {0, 0}}) == doctest::Approx(0.0));
    CHECK(code_of([] { (void)quadratic_weighted_kappa(ConfusionMatrix(1)); }) == ErrorCode::RangeError);
}

TEST_CASE("property: kappa invariant under reversing class order") {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t k = 2 + rng.below(4);
        ConfusionMatrix cm(k);
        ConfusionMatrix reversed(k);
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = 0; j < k; ++j) {
                const auto v = static_cast<long long>(rng.below(50)) + 1;
                cm.add(i, j, v);
                reversed.add(k - 1 - i, k - 1 - j, v);
            }
        }
        CHECK(quadratic_weighted_kappa(cm) == doctest::Approx(quadratic_weighted_kappa(reversed)).epsilon(1e-12));
        const double kappa = quadratic_weighted_kappa(cm);
        CHECK(kappa >= -1.0);
        CHECK(kappa <= 1.0);
    }
}

TEST_CASE("special functions against closed forms and Boost.Math") {
    for (double p : {1e-12, 1e-6, 0.001, 0.025, 0.3, 0.5, 0.841, 0.975, 0.999999}) {
        CHECK(std::abs(special::normal_cdf(special::normal_quantile(p)) - p) <= 1e-9 * std::max(p, 1e-3));
    }
    CHECK(special::normal_quantile(0.5) == doctest::Approx(0.0));
    Rng rng(1);
    for (int i = 0; i < 200; ++i) {
        const double a = 0.5 + rng.uniform() * 300.0;
        const double b = 0.5 + rng.uniform() * 300.0;
        const double x = rng.uniform();
        CHECK(special::incomplete_beta(a, b, x) == doctest::Approx(boost::math::ibeta(a, b, x)).epsilon(1e-9));
    }
}

TEST_CASE("clopper_pearson closed forms") {
    const auto zero = clopper_pearson(0, 10);
    CHECK(zero.lo == 0.0);
    CHECK(std::abs(zero.hi - (1.0 - std::pow(0.025, 0.1))) <= 1e-9);
    CHECK(std::abs(zero.hi - 0.3085) <= 0.0005);
    const auto full = clopper_pearson(10, 10);
    CHECK(full.hi == 1.0);
    CHECK(std::abs(full.lo - 0.6915) <= 0.0005);
    CHECK(std::abs(full.lo - std::pow(0.025, 0.1)) <= 1e-9);
}

TEST_CASE("clopper_pearson reproduces the screening intervals at 3 d.p.") {
    auto r3 = [](double v) { return std::round(v * 1000.0) / 1000.0; };
    const auto sens = clopper_pearson(2766, 3087);
    CHECK(r3(sens.lo) == 0.885);
    CHECK(r3(sens.hi) == 0.907);
    const auto spec = clopper_pearson(3926, 4031);
    CHECK(r3(spec.lo) == 0.969);
    CHECK(r3(spec.hi) == 0.979);
    const auto acc = clopper_pearson(2766 + 3926, 7118);
    CHECK(r3(acc.lo) == 0.935);
    CHECK(r3(acc.hi) == 0.946);
}

TEST_CASE("property: clopper_pearson matches Boost beta quantiles, duality, containment, shrinkage") {
    Rng rng(77);
    for (int trial = 0; trial < 500; ++trial) {
        const auto n = static_cast<long long>(1 + rng.below(2000));
        const auto k = static_cast<long long>(rng.below(static_cast<std::uint64_t>(n) + 1));
        const auto ci = clopper_pearson(k, n);
        const double lo = k == 0 ? 0.0 : boost::math::ibeta_inv(double(k), double(n - k + 1), 0.025);
        const double hi = k == n ? 1.0 : boost::math::ibeta_inv(double(k + 1), double(n - k), 0.975);
        CHECK(std::abs(ci.lo - lo) <= 2e-10);
        CHECK(std::abs(ci.hi - hi) <= 2e-10);
        const auto mirror = clopper_pearson(n - k, n);
        CHECK(std::abs(ci.lo - (1.0 - mirror.hi)) <= 2e-10);
        CHECK(std::abs(ci.hi - (1.0 - mirror.lo)) <= 2e-10);
        const double p = static_cast<double>(k) / static_cast<double>(n);
        CHECK(ci.lo <= p);
        CHECK(p <= ci.hi);
        const auto doubled = clopper_pearson(2 * k, 2 * n);
        CHECK(doubled.hi - doubled.lo < ci.hi - ci.lo);
    }
    CHECK(code_of([] { (void)clopper_pearson(5, 4); }) == ErrorCode::RangeError);
    CHECK(code_of([] { (void)clopper_pearson(0, 0); }) == ErrorCode::RangeError);
}

TEST_CASE("scores CSV parsing and validation") {
    const auto scores = parse_scores_csv("image_id,p0,p1\na,0.25,0.75\nb,1,0\n", 2);
    REQUIRE(scores.size() == 2);
    CHECK(scores.row(0)[1] == 0.75);
    CHECK(scores.find("b") == 1);
    CHECK(scores.find("zz") == SIZE_MAX);
    CHECK(parse_scores_csv(format_scores_csv(scores), 2).row(0)[0] == 0.25);

    CHECK(code_of([] { (void)parse_scores_csv("image_id,p0,p1\n", 3); }) == ErrorCode::FatalFormat);
    CHECK(code_of([] { (void)parse_scores_csv("image_id,p0,p1\na,0.5,0.6\n", 2); }) == ErrorCode::RangeError);
    CHECK(code_of([] { (void)parse_scores_csv("image_id,p0,p1\na,-0.5,1.5\n", 2); }) == ErrorCode::RangeError);
    CHECK(code_of([] { (void)parse_scores_csv("image_id,p0,p1\na,x,1\n", 2); }) == ErrorCode::FatalFormat);
    CHECK(code_of([] { (void)parse_scores_csv("image_id,p0,p1\na,0.5,0.5\na,0.5,0.5\n", 2); }) ==
          ErrorCode::RangeError);
}

TEST_CASE("property: scores CSV round-trips bit-exactly") {
    Rng rng(8);
    ScoreSet scores(3);
    for (int i = 0; i < 200; ++i) {
        const double a = rng.uniform();
        const double b = rng.uniform() * (1.0 - a);
        const std::vector<double> row{a, b, 1.0 - a - b};
        scores.add("img" + std::to_string(i), row);
    }
    const auto parsed = parse_scores_csv(format_scores_csv(scores), 3);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        for (std::size_t c = 0; c < 3; ++c) {
            CHECK(parsed.row(i)[c] == scores.row(i)[c]);
        }
    }
}

TEST_CASE("argmax ties go to the lower index") {
    CHECK(argmax_class(std::vector<double>{0.2, 0.4, 0.4}) == 1);
    CHECK(argmax_class(std::vector<double>{0.5, 0.5}) == 0);
    CHECK(argmax_class(std::vector<double>{0.1, 0.2, 0.7}) == 2);
}
