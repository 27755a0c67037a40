#include <doctest.h>

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "fundus/error.hpp"
#include "fundus/evaluation.hpp"
#include "fundus/random.hpp"
#include "fundus/synth.hpp"
#include "support/reference_tables.hpp"

using namespace fundus;

namespace {

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected fundus::Error");
    return ErrorCode::RangeError;
}

EvalSet binary_set(const std::vector<int>& labels, const std::vector<double>& scores) {
    EvalSet set;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        set.add("img" + std::to_string(i), static_cast<std::size_t>(labels[i]), {1.0 - scores[i], scores[i]}, i / 2);
    }
    return set;
}

std::size_t count_of(const std::string& text, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) {
        ++n;
    }
    return n;
}

double round3(double v) {
    return std::round(v * 1000.0) / 1000.0;
}

} // namespace

TEST_CASE("select_operating_point: exact attainment") {
    // Ten positives with distinct scores; nine of them at or above 0.5.
    std::vector<int> labels;
    std::vector<double> scores;
    for (int i = 0; i < 10; ++i) {
        labels.push_back(1);
        scores.push_back(i == 0 ? 0.05 : 0.5 + 0.04 * i);
        labels.push_back(0);
        scores.push_back(0.02 * i);
    }
    const auto op = select_operating_point(roc_curve(labels, scores), Criterion::TargetSensitivity, 0.9);
    CHECK(op.tuning_sensitivity == 0.9);
    CHECK(op.threshold == doctest::Approx(0.54));
    CHECK(op.tuning_specificity == 1.0);
    CHECK_FALSE(op.trivial);
}

TEST_CASE("select_operating_point: steps straddling the target") {
    // 25 positives give sensitivity steps of 0.04: 0.88 then 0.92.
    std::vector<int> labels;
    std::vector<double> scores;
    for (int i = 0; i < 25; ++i) {
        labels.push_back(1);
        scores.push_back(1.0 - 0.01 * i);
    }
    for (int i = 0; i < 25; ++i) {
        labels.push_back(0);
        scores.push_back(0.5 - 0.01 * i);
    }
    const auto op = select_operating_point(roc_curve(labels, scores), Criterion::TargetSensitivity, 0.9);
    CHECK(op.tuning_sensitivity == doctest::Approx(0.92));
    CHECK(op.threshold == doctest::Approx(0.78));
}

TEST_CASE("select_operating_point: ties go to higher specificity") {
    // Negatives scored between the last needed positive and the next positive do not change sensitivity.
    const std::vector<int> labels{1, 1, 0, 0, 1, 0};
    const std::vector<double> scores{0.9, 0.8, 0.7, 0.6, 0.3, 0.1};
    const auto op = select_operating_point(roc_curve(labels, scores), Criterion::TargetSensitivity, 0.6);
    CHECK(op.threshold == 0.8);
    CHECK(op.tuning_specificity == 1.0);

    const auto spec = select_operating_point(roc_curve(labels, scores), Criterion::TargetSpecificity, 0.6);
    // Specificity 2/3 is the smallest value >= 0.6; of its points the one with higher sensitivity wins.
    CHECK(spec.tuning_specificity == doctest::Approx(2.0 / 3.0));
    CHECK(spec.threshold == 0.7);
}

TEST_CASE("select_operating_point: extremes and errors") {
    const auto perfect = roc_curve(std::vector<int>{0, 0, 1, 1}, std::vector<double>{0.1, 0.2, 0.8, 0.9});
    const auto op = select_operating_point(perfect, Criterion::TargetSpecificity, 0.98);
    CHECK(op.tuning_sensitivity == 1.0);
    CHECK(op.tuning_specificity == 1.0);

    const auto low_positive = roc_curve(std::vector<int>{1, 0, 1}, std::vector<double>{0.1, 0.5, 0.9});
    const auto all = select_operating_point(low_positive, Criterion::TargetSensitivity, 1.0);
    CHECK(all.trivial);
    CHECK(all.threshold == 0.1);

    const auto none = select_operating_point(low_positive, Criterion::TargetSensitivity, 0.0);
    CHECK(std::isinf(none.threshold));

    CHECK(code_of([&] { (void)select_operating_point(perfect, Criterion::TargetSensitivity, 1.1); }) ==
          ErrorCode::RangeError);
    CHECK(code_of([&] { (void)select_operating_point(perfect, Criterion::TargetSpecificity, -0.1); }) ==
          ErrorCode::RangeError);
}

TEST_CASE("property: chosen threshold is the strictest one meeting the target") {
    Rng rng(404);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 4 + rng.below(60);
        std::vector<int> labels(n);
        std::vector<double> scores(n);
        for (std::size_t i = 0; i < n; ++i) {
            labels[i] = static_cast<int>(rng.below(2));
            scores[i] = static_cast<double>(rng.below(15)) / 14.0;
        }
        labels[0] = 0;
        labels[1] = 1;
        const double target = rng.uniform();
        const auto op = select_operating_point(roc_curve(labels, scores), Criterion::TargetSensitivity, target);

        auto sensitivity_at = [&](double t) {
            double tp = 0;
            double pos = 0;
            for (std::size_t i = 0; i < n; ++i) {
                pos += labels[i];
                tp += labels[i] == 1 && scores[i] >= t ? 1 : 0;
            }
            return tp / pos;
        };
        CHECK(sensitivity_at(op.threshold) >= target);
        CHECK(op.tuning_sensitivity == sensitivity_at(op.threshold));
        for (double s : scores) {
            if (s > op.threshold) {
                CHECK(sensitivity_at(s) < target);
            }
        }
    }
}

TEST_CASE("evaluate_binary: operating point depends on the tuning set only") {
    Rng rng(8);
    const auto tuning = synth::gen_binary_scores({300, 400, 0.9, 1});
    const auto v1 = synth::gen_binary_scores({200, 250, 0.9, 2});
    const auto v2 = synth::gen_binary_scores({50, 900, 0.7, 3});
    const auto a = evaluate_binary(binary_set(tuning.labels, tuning.scores), binary_set(v1.labels, v1.scores),
                                   GradingSystem::RDR, {});
    const auto b = evaluate_binary(binary_set(tuning.labels, tuning.scores), binary_set(v2.labels, v2.scores),
                                   GradingSystem::RDR, {});
    CHECK(a.operating_point.threshold == b.operating_point.threshold);
    CHECK(a.operating_point.tuning_sensitivity >= 0.9);
    CHECK(a.counts.n() == 450);
    CHECK(b.counts.n_pos() == 50);
}

TEST_CASE("evaluate_binary: reference screening counts") {
    using namespace fixtures;
    // Scores 0.9 for called-positive items, 0.1 otherwise, threshold 0.5.
    std::vector<int> labels;
    std::vector<double> scores;
    auto push = [&](int label, double score, int count) {
        for (int i = 0; i < count; ++i) {
            labels.push_back(label);
            scores.push_back(score);
        }
    };
    push(1, 0.9, kRdrTruePositives);
    push(1, 0.1, kRdrPositives - kRdrTruePositives);
    push(0, 0.1, kRdrTrueNegatives);
    push(0, 0.9, kRdrNegatives - kRdrTrueNegatives);
    OperatingPoint op;
    op.threshold = 0.5;
    const auto r = apply_operating_point(op, binary_set(labels, scores), GradingSystem::RDR, {});
    CHECK(r.counts.tp == 2766);
    CHECK(r.counts.fn == 321);
    CHECK(r.counts.tn == 3926);
    CHECK(r.counts.fp == 105);
    CHECK(r.counts.n() == 7118);
    CHECK(round3(r.sensitivity.value) == 0.896);
    CHECK(round3(r.sensitivity.ci.lo) == 0.885);
    CHECK(round3(r.sensitivity.ci.hi) == 0.907);
    CHECK(round3(r.specificity.value) == 0.974);
    CHECK(round3(r.specificity.ci.lo) == 0.969);
    CHECK(round3(r.specificity.ci.hi) == 0.979);
    CHECK(round3(r.accuracy.value) == 0.940);
    const auto acc = clopper_pearson(6692, 7118);
    CHECK(r.accuracy.ci.lo == acc.lo);
    CHECK(r.accuracy.ci.hi == acc.hi);
}

TEST_CASE("evaluate_binary: perfect separation") {
    const std::vector<int> labels{0, 1, 0, 1, 1, 0};
    const std::vector<double> scores{0.1, 0.9, 0.2, 0.8, 0.7, 0.3};
    const auto set = binary_set(labels, scores);
    const auto r = evaluate_binary(set, set, GradingSystem::RDME, {});
    for (const auto* e : {&r.sensitivity, &r.specificity, &r.accuracy, &r.auc}) {
        CHECK(e->value == 1.0);
        CHECK(e->ci.hi == 1.0);
        CHECK(e->ci.contains(e->value));
    }
}

TEST_CASE("evaluate_binary: binormal AUC at reference class sizes") {
    const auto tuning = synth::gen_binary_scores({1627, 2079, 0.987, 10});
    const auto validation = synth::gen_binary_scores({3087, 4031, 0.987, 11});
    const auto r = evaluate_binary(binary_set(tuning.labels, tuning.scores),
                                   binary_set(validation.labels, validation.scores), GradingSystem::RDR, {});
    CHECK(std::abs(r.auc.value - 0.987) <= 0.01);
    CHECK(r.operating_point.tuning_sensitivity >= 0.9);
    CHECK(r.auc.ci.contains(r.auc.value));
    CHECK(r.auc.ci.method == CiMethod::ClopperPearson);

    BinaryOptions boot;
    boot.auc_ci = CiMethod::ClusterBootstrap;
    boot.bootstrap.replicates = 300;
    const auto b = evaluate_binary(binary_set(tuning.labels, tuning.scores),
                                   binary_set(validation.labels, validation.scores), GradingSystem::RDR, boot);
    CHECK(b.auc.ci.method == CiMethod::ClusterBootstrap);
    CHECK(b.auc.ci.contains(b.auc.value));
    CHECK(b.auc.value == r.auc.value);
}

TEST_CASE("evaluate_binary: errors carry the set name") {
    const auto good = binary_set({0, 1}, {0.2, 0.8});
    const auto one_class = binary_set({1, 1}, {0.2, 0.8});
    try {
        (void)evaluate_binary(one_class, good, GradingSystem::RDR, {});
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DegenerateClasses);
        CHECK(std::string(e.what()).find("tuning set") != std::string::npos);
    }
    CHECK(code_of([&] { (void)evaluate_binary(good, one_class, GradingSystem::RDR, {}); }) ==
          ErrorCode::DegenerateClasses);
    CHECK(code_of([&] { (void)evaluate_binary(good, good, GradingSystem::PIRC, {}); }) == ErrorCode::RangeError);
}

TEST_CASE("evaluate_multiclass: perfect predictions") {
    EvalSet set;
    for (std::size_t i = 0; i < 30; ++i) {
        std::vector<double> p(3, 0.1);
        p[i % 3] = 0.8;
        set.add("i" + std::to_string(i), i % 3, p, i);
    }
    const auto r = evaluate_multiclass(set, GradingSystem::QRDR);
    CHECK(r.accuracy == 1.0);
    CHECK(r.kappa == doctest::Approx(1.0));
    CHECK(r.macro_auc == 1.0);
    CHECK(r.accuracy == accuracy(r.matrix));
}

TEST_CASE("evaluate_multiclass: reference confusion matrices via injected predictions") {
    for (const auto& ref : fixtures::multiclass_references()) {
        const std::size_t k = ref.matrix.k();
        EvalSet set;
        std::size_t id = 0;
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = 0; j < k; ++j) {
                for (long long c = 0; c < ref.matrix.at(i, j); ++c) {
                    std::vector<double> p(k, 0.5 / static_cast<double>(k));
                    p[j] += 0.5;
                    set.add(std::to_string(id), i, p, id);
                    ++id;
                }
            }
        }
        const auto r = evaluate_multiclass(set, ref.system);
        CAPTURE(ref.input_size);
        CHECK(r.matrix == ref.matrix);
        CHECK(std::abs(r.accuracy - ref.accuracy) <= 0.0005);
        CHECK(std::abs(r.kappa - ref.kappa) <= 0.005);
    }
}

TEST_CASE("evaluate_multiclass: uninformative scores give chance macro-AUC") {
    Rng rng(12);
    EvalSet set;
    for (std::size_t i = 0; i < 10000; ++i) {
        std::vector<double> p(4);
        double sum = 0.0;
        for (auto& v : p) {
            v = rng.uniform();
            sum += v;
        }
        for (auto& v : p) {
            v /= sum;
        }
        set.add(std::to_string(i), rng.below(4), p, i);
    }
    const auto r = evaluate_multiclass(set, GradingSystem::PIMEC);
    CHECK(std::abs(r.macro_auc - 0.5) <= 0.02);
    CHECK(r.accuracy == accuracy(r.matrix));
}

TEST_CASE("collect_set") {
    std::vector<LabeledRecord> records;
    for (const char* id : {"c", "a", "b", "d"}) {
        GradeRecord r;
        r.image_id = id;
        r.patient_id = std::string(id) == "d" ? "P2" : "P1";
        r.gradable = true;
        r.pirc = PircGrade(std::string(id) == "a" ? 3 : 0);
        r.pimec = PimecGrade(0);
        records.emplace_back(r, derive_class(GradingSystem::RDR, r));
    }
    ScoreSet scores(2);
    for (const char* id : {"a", "b", "c", "d"}) {
        scores.add(id, std::vector<double>{0.25, 0.75});
    }
    const auto all = collect_set(records, nullptr, scores, std::nullopt);
    CHECK(all.ids == std::vector<std::string>{"a", "b", "c", "d"});
    CHECK(all.labels == std::vector<std::size_t>{1, 0, 0, 0});
    CHECK(all.clusters == std::vector<std::size_t>{0, 0, 0, 1});

    ScoreSet partial(2);
    partial.add("a", std::vector<double>{0.5, 0.5});
    CHECK(code_of([&] { (void)collect_set(records, nullptr, partial, std::nullopt); }) == ErrorCode::RangeError);
}

TEST_CASE("rendering: structure, determinism and JSON round trip") {
    const auto tuning = synth::gen_binary_scores({200, 300, 0.95, 4});
    const auto validation = synth::gen_binary_scores({150, 250, 0.95, 5});
    auto binary = evaluate_binary(binary_set(tuning.labels, tuning.scores),
                                  binary_set(validation.labels, validation.scores), GradingSystem::RDR, {});
    binary.input_size = "512";
    const Report b = binary;
    const auto svg = render_svg(b);
    CHECK(count_of(svg, "<path") == 1);
    CHECK(count_of(svg, "<line x1=\"80\" y1=\"720\" x2=\"780\" y2=\"20\"") == 1);
    CHECK(svg.find("viewBox=\"0 0 800 800\"") != std::string::npos);
    CHECK(svg.find(fmt::format("NRDR/RDR ({:.3f})", binary.auc.value)) != std::string::npos);
    CHECK(render_svg(b) == svg);
    CHECK(report_stem(b) == "rdr_512");

    const auto json = render_json(b);
    for (const char* key : {"\"auc\"", "\"auc_ci\"", "\"sensitivity\"", "\"sensitivity_ci\"", "\"specificity\"",
                            "\"accuracy\"", "\"operating_point\"", "\"roc\""}) {
        CHECK(json.find(key) != std::string::npos);
    }
    CHECK(render_files(parse_report_json(json)) == render_files(b));

    EvalSet multi;
    const auto probs = synth::gen_ordinal_scores(std::vector<std::size_t>{0, 1, 2, 3, 4, 0, 1, 2, 3, 4, 2, 2}, 5, 1.0, 6);
    for (std::size_t i = 0; i < probs.size(); ++i) {
        multi.add(std::to_string(i), i < 10 ? i % 5 : 2, probs[i], i);
    }
    auto mc = evaluate_multiclass(multi, GradingSystem::PIRC);
    mc.input_size = "2095";
    const Report m = mc;
    CHECK(count_of(render_svg(m), "<path") == 6);
    CHECK(render_svg(m).find("macro-average (") != std::string::npos);
    const auto files = render_files(m);
    REQUIRE(files.size() == 5);
    CHECK(files[4].first == "confusion/pirc_2095.csv");
    CHECK(files[4].second.rfind("truth,pred_0,pred_1,pred_2,pred_3,pred_4\n", 0) == 0);
    CHECK(render_files(parse_report_json(render_json(m))) == files);
    CHECK(render_text(m).find("Quadratic-Weighted Kappa") != std::string::npos);

    binary.dataset = "messidor";
    CHECK(report_stem(Report(binary)) == "rdr_512_messidor");

    CHECK(code_of([] { (void)parse_report_json("{"); }) == ErrorCode::FatalFormat);
    CHECK(code_of([] { (void)parse_report_json("{\"kind\":\"binary\",\"system\":\"rdr\"}"); }) ==
          ErrorCode::FatalFormat);
    CHECK(code_of([] { (void)parse_report_json("{\"kind\":\"other\",\"system\":\"rdr\"}"); }) ==
          ErrorCode::FatalFormat);
}

TEST_CASE("rendering: infinite threshold survives the JSON round trip") {
    BinaryReport r;
    r.operating_point.threshold = std::numeric_limits<double>::infinity();
    r.roc = {{0.0, 0.0}, {1.0, 1.0}};
    const auto back = std::get<BinaryReport>(parse_report_json(render_json(r)));
    CHECK(std::isinf(back.operating_point.threshold));
}
