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
#include <limits>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "fundus/error.hpp"
#include "fundus/evaluation.hpp"

namespace fundus {

namespace {

using Json = nlohmann::ordered_json;

constexpr std::array<std::string_view, 6> kPalette{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};

template <typename... Fns>
struct Overloaded : Fns... {
    using Fns::operator()...;
};
template <typename... Fns>
Overloaded(Fns...) -> Overloaded<Fns...>;

std::string with_ci(const Estimate& e) {
    return fmt::format("{:.3f} ({:.3f}-{:.3f})", e.value, e.ci.lo, e.ci.hi);
}

Json interval_json(const Interval& ci) {
    return Json{{"lo", ci.lo}, {"hi", ci.hi}, {"level", ci.level}, {"method", ci_method_token(ci.method)}};
}

Json curve_json(const std::vector<CurvePoint>& points) {
    Json fpr = Json::array();
    Json tpr = Json::array();
    for (const auto& p : points) {
        fpr.push_back(p.fpr);
        tpr.push_back(p.tpr);
    }
    return Json{{"fpr", std::move(fpr)}, {"tpr", std::move(tpr)}};
}

// JSON has no infinities; the strictest threshold is written as null.
Json threshold_json(double t) {
    return std::isfinite(t) ? Json(t) : Json(nullptr);
}

const Json& field(const Json& doc, const char* key) {
    if (!doc.is_object() || !doc.contains(key)) {
        throw Error(ErrorCode::FatalFormat, fmt::format("report JSON lacks '{}'", key));
    }
    return doc.at(key);
}

template <typename T>
T get(const Json& doc, const char* key) {
    try {
        return field(doc, key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::FatalFormat, fmt::format("report JSON field '{}': {}", key, e.what()));
    }
}

Interval interval_from(const Json& doc) {
    Interval ci;
    ci.lo = get<double>(doc, "lo");
    ci.hi = get<double>(doc, "hi");
    ci.level = get<double>(doc, "level");
    const auto method = get<std::string>(doc, "method");
    if (method == ci_method_token(CiMethod::ClopperPearson)) {
        ci.method = CiMethod::ClopperPearson;
    } else if (method == ci_method_token(CiMethod::ClusterBootstrap)) {
        ci.method = CiMethod::ClusterBootstrap;
    } else {
        throw Error(ErrorCode::FatalFormat, "unknown interval method '" + method + "'");
    }
    return ci;
}

Estimate estimate_from(const Json& doc, const char* key, const char* ci_key) {
    return {get<double>(doc, key), interval_from(field(doc, ci_key))};
}

std::vector<CurvePoint> curve_from(const Json& doc) {
    const auto fpr = get<std::vector<double>>(doc, "fpr");
    const auto tpr = get<std::vector<double>>(doc, "tpr");
    if (fpr.size() != tpr.size()) {
        throw Error(ErrorCode::FatalFormat, "curve fpr/tpr lengths differ");
    }
    std::vector<CurvePoint> out(fpr.size());
    for (std::size_t i = 0; i < fpr.size(); ++i) {
        out[i] = {fpr[i], tpr[i]};
    }
    return out;
}

std::string svg_path(const std::vector<CurvePoint>& points, std::string_view colour, bool dashed) {
    std::string d;
    std::string last;
    for (const auto& p : points) {
        auto xy = fmt::format("{:.2f},{:.2f}", 80.0 + 700.0 * p.fpr, 720.0 - 700.0 * p.tpr);
        if (xy == last) {
            continue;
        }
        d += (d.empty() ? "M" : " L") + xy;
        last = std::move(xy);
    }
    return fmt::format("  <path d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"{}/>\n", d, colour,
                       dashed ? " stroke-dasharray=\"8,4\"" : "");
}

struct Series {
    std::string name;
    double auc;
    const std::vector<CurvePoint>* points;
    std::string_view colour;
    bool dashed;
};

std::string svg_document(std::string_view title, const std::vector<Series>& series) {
    std::string out;
    out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 800 800\" width=\"800\" height=\"800\">\n";
    out += "  <rect x=\"0\" y=\"0\" width=\"800\" height=\"800\" fill=\"#ffffff\"/>\n";
    out += fmt::format("  <text x=\"430\" y=\"14\" font-family=\"sans-serif\" font-size=\"13\" "
                       "text-anchor=\"middle\">{}</text>\n",
                       title);
    out += "  <rect x=\"80\" y=\"20\" width=\"700\" height=\"700\" fill=\"none\" stroke=\"#000000\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double v = i / 5.0;
        const double x = 80.0 + 700.0 * v;
        const double y = 720.0 - 700.0 * v;
        out += fmt::format("  <line x1=\"{:.2f}\" y1=\"720\" x2=\"{:.2f}\" y2=\"726\" stroke=\"#000000\"/>\n", x, x);
        out += fmt::format("  <text x=\"{:.2f}\" y=\"742\" font-family=\"sans-serif\" font-size=\"12\" "
                           "text-anchor=\"middle\">{:.1f}</text>\n",
                           x, v);
        out += fmt::format("  <line x1=\"74\" y1=\"{:.2f}\" x2=\"80\" y2=\"{:.2f}\" stroke=\"#000000\"/>\n", y, y);
        out += fmt::format("  <text x=\"68\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"12\" "
                           "text-anchor=\"end\">{:.1f}</text>\n",
                           y + 4.0, v);
    }
    out += "  <text x=\"430\" y=\"775\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">"
           "1 - Specificity</text>\n";
    out += "  <text x=\"24\" y=\"370\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\" "
           "transform=\"rotate(-90 24 370)\">Sensitivity</text>\n";
    out += "  <line x1=\"80\" y1=\"720\" x2=\"780\" y2=\"20\" stroke=\"#999999\" stroke-dasharray=\"4,4\"/>\n";
    for (const auto& s : series) {
        out += svg_path(*s.points, s.colour, s.dashed);
    }
    const double top = 700.0 - 22.0 * static_cast<double>(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) {
        const double y = top + 22.0 * static_cast<double>(i);
        out += fmt::format("  <line x1=\"440\" y1=\"{:.2f}\" x2=\"470\" y2=\"{:.2f}\" stroke=\"{}\" "
                           "stroke-width=\"2\"{}/>\n",
                           y, y, series[i].colour, series[i].dashed ? " stroke-dasharray=\"8,4\"" : "");
        out += fmt::format("  <text x=\"478\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"13\">"
                           "{} ({:.3f})</text>\n",
                           y + 4.0, series[i].name, series[i].auc);
    }
    out += "</svg>\n";
    return out;
}

std::string pad(std::string_view s, std::size_t width) {
    return fmt::format("{:<{}}", s, width);
}

} // namespace

std::string report_stem(const Report& report) {
    return std::visit(
        [](const auto& r) {
            auto stem = fmt::format("{}_{}", system_token(r.system), r.input_size);
            if (r.dataset != "validation") {
                stem += "_" + r.dataset;
            }
            return stem;
        },
        report);
}

std::string render_json(const Report& report) {
    Json doc = std::visit(
        Overloaded{
            [](const BinaryReport& r) {
                Json d;
                d["kind"] = "binary";
                d["system"] = system_token(r.system);
                d["input_size"] = r.input_size;
                d["dataset"] = r.dataset;
                d["counts"] = Json{{"n", r.counts.n()},       {"n_pos", r.counts.n_pos()}, {"n_neg", r.counts.n_neg()},
                                   {"tp", r.counts.tp},       {"fn", r.counts.fn},         {"tn", r.counts.tn},
                                   {"fp", r.counts.fp}};
                d["auc"] = r.auc.value;
                d["auc_ci"] = interval_json(r.auc.ci);
                d["sensitivity"] = r.sensitivity.value;
                d["sensitivity_ci"] = interval_json(r.sensitivity.ci);
                d["specificity"] = r.specificity.value;
                d["specificity_ci"] = interval_json(r.specificity.ci);
                d["accuracy"] = r.accuracy.value;
                d["accuracy_ci"] = interval_json(r.accuracy.ci);
                const auto& op = r.operating_point;
                d["operating_point"] = Json{{"threshold", threshold_json(op.threshold)},
                                            {"criterion", criterion_token(op.criterion)},
                                            {"target", op.target},
                                            {"tuning_sensitivity", op.tuning_sensitivity},
                                            {"tuning_specificity", op.tuning_specificity},
                                            {"trivial", op.trivial}};
                d["roc"] = curve_json(r.roc);
                return d;
            },
            [](const MulticlassReport& r) {
                Json d;
                d["kind"] = "multiclass";
                d["system"] = system_token(r.system);
                d["input_size"] = r.input_size;
                d["dataset"] = r.dataset;
                d["n"] = r.n;
                d["macro_auc"] = r.macro_auc;
                d["class_auc"] = r.class_auc;
                d["accuracy"] = r.accuracy;
                d["kappa"] = r.kappa;
                Json matrix = Json::array();
                for (std::size_t i = 0; i < r.matrix.k(); ++i) {
                    Json row = Json::array();
                    for (std::size_t j = 0; j < r.matrix.k(); ++j) {
                        row.push_back(r.matrix.at(i, j));
                    }
                    matrix.push_back(std::move(row));
                }
                d["confusion"] = std::move(matrix);
                Json classes = Json::array();
                for (const auto& c : r.class_curves) {
                    classes.push_back(curve_json(c));
                }
                d["roc"] = Json{{"classes", std::move(classes)}, {"macro", curve_json(r.macro_curve)}};
                return d;
            }},
        report);
    return doc.dump(2) + "\n";
}

Report parse_report_json(std::string_view text) {
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::FatalFormat, std::string("report is not valid JSON: ") + e.what());
    }
    const auto kind = get<std::string>(doc, "kind");
    const auto system = parse_system(get<std::string>(doc, "system"));
    if (kind == "binary") {
        BinaryReport r;
        r.system = system;
        r.input_size = get<std::string>(doc, "input_size");
        r.dataset = get<std::string>(doc, "dataset");
        const auto& counts = field(doc, "counts");
        r.counts = {get<long long>(counts, "tp"), get<long long>(counts, "fn"), get<long long>(counts, "tn"),
                    get<long long>(counts, "fp")};
        r.auc = estimate_from(doc, "auc", "auc_ci");
        r.sensitivity = estimate_from(doc, "sensitivity", "sensitivity_ci");
        r.specificity = estimate_from(doc, "specificity", "specificity_ci");
        r.accuracy = estimate_from(doc, "accuracy", "accuracy_ci");
        const auto& op = field(doc, "operating_point");
        const auto& threshold = field(op, "threshold");
        r.operating_point.threshold =
            threshold.is_null() ? std::numeric_limits<double>::infinity() : get<double>(op, "threshold");
        r.operating_point.criterion = parse_criterion(get<std::string>(op, "criterion"));
        r.operating_point.target = get<double>(op, "target");
        r.operating_point.tuning_sensitivity = get<double>(op, "tuning_sensitivity");
        r.operating_point.tuning_specificity = get<double>(op, "tuning_specificity");
        r.operating_point.trivial = get<bool>(op, "trivial");
        r.roc = curve_from(field(doc, "roc"));
        return r;
    }
    if (kind == "multiclass") {
        MulticlassReport r;
        r.system = system;
        r.input_size = get<std::string>(doc, "input_size");
        r.dataset = get<std::string>(doc, "dataset");
        r.n = get<std::size_t>(doc, "n");
        r.macro_auc = get<double>(doc, "macro_auc");
        r.class_auc = get<std::vector<double>>(doc, "class_auc");
        r.accuracy = get<double>(doc, "accuracy");
        r.kappa = get<double>(doc, "kappa");
        const auto rows = get<std::vector<std::vector<long long>>>(doc, "confusion");
        r.matrix = ConfusionMatrix(class_count(system));
        if (rows.size() != r.matrix.k()) {
            throw Error(ErrorCode::FatalFormat, "confusion matrix size does not match the system");
        }
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != r.matrix.k()) {
                throw Error(ErrorCode::FatalFormat, "confusion matrix size does not match the system");
            }
            for (std::size_t j = 0; j < rows[i].size(); ++j) {
                r.matrix.add(i, j, rows[i][j]);
            }
        }
        const auto& roc = field(doc, "roc");
        for (const auto& c : field(roc, "classes")) {
            r.class_curves.push_back(curve_from(c));
        }
        r.macro_curve = curve_from(field(roc, "macro"));
        if (r.class_curves.size() != r.matrix.k() || r.class_auc.size() != r.matrix.k()) {
            throw Error(ErrorCode::FatalFormat, "per-class entries do not match the system");
        }
        return r;
    }
    throw Error(ErrorCode::FatalFormat, "unknown report kind '" + kind + "'");
}

std::string render_csv(const Report& report) {
    return std::visit(
        Overloaded{
            [](const BinaryReport& r) {
                std::string out = "system,input_size,dataset,n,n_pos,n_neg,tp,fn,tn,fp,auc,auc_lo,auc_hi,auc_ci_method,"
                                  "sensitivity,sensitivity_lo,sensitivity_hi,specificity,specificity_lo,"
                                  "specificity_hi,accuracy,accuracy_lo,accuracy_hi,threshold,criterion,target,"
                                  "tuning_sensitivity,tuning_specificity\n";
                const auto& c = r.counts;
                const auto& op = r.operating_point;
                out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                                   system_token(r.system), r.input_size, r.dataset, c.n(), c.n_pos(), c.n_neg(), c.tp,
                                   c.fn, c.tn, c.fp, r.auc.value, r.auc.ci.lo, r.auc.ci.hi,
                                   ci_method_token(r.auc.ci.method), r.sensitivity.value, r.sensitivity.ci.lo,
                                   r.sensitivity.ci.hi, r.specificity.value, r.specificity.ci.lo, r.specificity.ci.hi,
                                   r.accuracy.value, r.accuracy.ci.lo, r.accuracy.ci.hi, op.threshold,
                                   criterion_token(op.criterion), op.target, op.tuning_sensitivity,
                                   op.tuning_specificity);
                return out;
            },
            [](const MulticlassReport& r) {
                std::string out = "system,input_size,dataset,n,macro_auc,accuracy,kappa";
                for (std::size_t c = 0; c < r.class_auc.size(); ++c) {
                    out += fmt::format(",auc_class{}", c);
                }
                out += fmt::format("\n{},{},{},{},{},{},{}", system_token(r.system), r.input_size, r.dataset, r.n,
                                   r.macro_auc, r.accuracy, r.kappa);
                for (double a : r.class_auc) {
                    out += fmt::format(",{}", a);
                }
                return out + "\n";
            }},
        report);
}

std::string render_confusion_csv(const Report& report) {
    const auto* r = std::get_if<MulticlassReport>(&report);
    if (r == nullptr) {
        return {};
    }
    std::string out = "truth";
    for (std::size_t j = 0; j < r->matrix.k(); ++j) {
        out += fmt::format(",pred_{}", j);
    }
    out += '\n';
    for (std::size_t i = 0; i < r->matrix.k(); ++i) {
        out += std::to_string(i);
        for (std::size_t j = 0; j < r->matrix.k(); ++j) {
            out += fmt::format(",{}", r->matrix.at(i, j));
        }
        out += '\n';
    }
    return out;
}

std::string render_text(const Report& report) {
    return std::visit(
        Overloaded{
            [](const BinaryReport& r) {
                std::string out;
                out += pad("Grading system", 22) + pad("Input size", 12) + pad("AUC", 22) + pad("Sensitivity", 22) +
                       pad("Specificity", 22) + "Accuracy\n";
                out += pad(system_display_name(r.system), 22) + pad(r.input_size, 12) + pad(with_ci(r.auc), 22) +
                       pad(with_ci(r.sensitivity), 22) + pad(with_ci(r.specificity), 22) + with_ci(r.accuracy) + "\n";
                const auto& op = r.operating_point;
                out += fmt::format("\nDataset: {}; n = {} ({} positive, {} negative); TP {}, FN {}, TN {}, FP {}\n",
                                   r.dataset, r.counts.n(), r.counts.n_pos(), r.counts.n_neg(), r.counts.tp,
                                   r.counts.fn, r.counts.tn, r.counts.fp);
                out += fmt::format("Operating point: {} {:.3f} on the tuning set; threshold {:.6g}; "
                                   "tuning sensitivity {:.3f}, specificity {:.3f}{}\n",
                                   criterion_token(op.criterion), op.target, op.threshold, op.tuning_sensitivity,
                                   op.tuning_specificity, op.trivial ? " (trivial all-positive point)" : "");
                out += fmt::format("Confidence intervals: {:.0f}% Clopper-Pearson; AUC interval by {}\n",
                                   100.0 * r.sensitivity.ci.level, ci_method_token(r.auc.ci.method));
                return out;
            },
            [](const MulticlassReport& r) {
                std::string out;
                out += pad("Grading system", 22) + pad("Input size", 12) + pad("Macro-AUC", 11) + pad("Accuracy", 10) +
                       "Quadratic-Weighted Kappa\n";
                out += pad(system_display_name(r.system), 22) + pad(r.input_size, 12) +
                       pad(fmt::format("{:.3f}", r.macro_auc), 11) + pad(fmt::format("{:.3f}", r.accuracy), 10) +
                       fmt::format("{:.3f}\n", r.kappa);
                out += fmt::format("\nDataset: {}; n = {}\n\nOne-vs-all AUC\n", r.dataset, r.n);
                for (std::size_t c = 0; c < r.class_auc.size(); ++c) {
                    out += fmt::format("  {} {:<18} {:.3f}\n", c, class_name(r.system, c), r.class_auc[c]);
                }
                const std::size_t k = r.matrix.k();
                out += "\nConfusion matrix (rows: ground truth, columns: prediction)\n";
                out += pad("", 8);
                for (std::size_t j = 0; j < k; ++j) {
                    out += fmt::format("{:>8}", j);
                }
                out += '\n';
                for (std::size_t i = 0; i < k; ++i) {
                    out += pad(std::to_string(i), 8);
                    for (std::size_t j = 0; j < k; ++j) {
                        out += fmt::format("{:>8}", r.matrix.at(i, j));
                    }
                    out += '\n';
                }
                return out;
            }},
        report);
}

std::string render_svg(const Report& report) {
    return std::visit(
        Overloaded{
            [](const BinaryReport& r) {
                const std::vector<Series> series{
                    {std::string(system_display_name(r.system)), r.auc.value, &r.roc, kPalette[0], false}};
                return svg_document(fmt::format("{} ROC, input size {}", system_display_name(r.system), r.input_size),
                                    series);
            },
            [](const MulticlassReport& r) {
                std::vector<Series> series;
                for (std::size_t c = 0; c < r.class_curves.size(); ++c) {
                    series.push_back({std::string(class_name(r.system, c)), r.class_auc[c], &r.class_curves[c],
                                      kPalette[c % kPalette.size()], false});
                }
                series.push_back({"macro-average", r.macro_auc, &r.macro_curve, "#000000", true});
                return svg_document(fmt::format("{} ROC, input size {}", system_display_name(r.system), r.input_size),
                                    series);
            }},
        report);
}

std::vector<std::pair<std::string, std::string>> render_files(const Report& report) {
    const auto stem = report_stem(report);
    std::vector<std::pair<std::string, std::string>> files{
        {"report/" + stem + ".csv", render_csv(report)},
        {"report/" + stem + ".json", render_json(report)},
        {"report/" + stem + ".txt", render_text(report)},
        {"roc/" + stem + ".svg", render_svg(report)},
    };
    if (std::holds_alternative<MulticlassReport>(report)) {
        files.emplace_back("confusion/" + stem + ".csv", render_confusion_csv(report));
    }
    return files;
}

} // namespace fundus
