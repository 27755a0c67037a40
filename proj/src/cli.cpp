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

#include "fundus/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "fundus/error.hpp"
#include "fundus/evaluation.hpp"
#include "fundus/image.hpp"
#include "fundus/io.hpp"
#include "fundus/parallel.hpp"
#include "fundus/preprocess.hpp"
#include "fundus/random.hpp"
#include "fundus/splitter.hpp"
#include "fundus/synth.hpp"

namespace fundus::cli {

namespace fs = std::filesystem;

namespace {

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
    sink->set_pattern("fundus-eval: %l: %v");
    auto logger = std::make_shared<spdlog::logger>("fundus-eval", sink);
    auto level = spdlog::level::warn;
    if (const char* env = std::getenv("FUNDUS_EVAL_LOG")) {
        const std::string_view v(env);
        if (v == "error") {
            level = spdlog::level::err;
        } else if (v == "warn") {
            level = spdlog::level::warn;
        } else if (v == "info") {
            level = spdlog::level::info;
        } else if (v == "debug") {
            level = spdlog::level::debug;
        }
    }
    logger->set_level(level);
    return logger;
}

std::vector<GradeRecord> load_manifest(const fs::path& path, bool drop_flagged, spdlog::logger& log) {
    const auto result = parse_manifest(io::read_text_file(path), ManifestOptions{drop_flagged});
    for (const auto& d : result.diagnostics) {
        log.warn("{}:{}: {}", path.string(), d.line, d.message);
    }
    log.info("{}: {} records, {} rows rejected", path.string(), result.records.size(), result.diagnostics.size());
    return result.records;
}

fs::path sibling(const fs::path& path, const std::string& suffix) {
    return path.parent_path() / (path.stem().string() + suffix);
}

void write_report_files(const Report& report, const fs::path& out_dir, spdlog::logger& log) {
    for (const auto& [relative, content] : render_files(report)) {
        io::write_text_file(out_dir / relative, content);
        log.info("wrote {}", (out_dir / relative).string());
    }
}

struct SplitArgs {
    std::string manifest;
    std::string system;
    std::uint64_t seed = 0;
    std::string out;
    std::string table;
    std::string distribution;
    std::vector<double> fractions{0.70, 0.10, 0.20};
    double tolerance = 0.015;
    bool drop_flagged = false;
};

int do_split(const SplitArgs& a, spdlog::logger& log) {
    const auto system = parse_system(a.system);
    const auto records = load_manifest(a.manifest, a.drop_flagged, log);
    const auto labeled = records_for_system(records, system);
    SplitSpec spec;
    spec.seed = a.seed;
    spec.tolerance = a.tolerance;
    if (a.fractions.size() != 3) {
        throw Error(ErrorCode::RangeError, "--fractions needs three values");
    }
    std::copy(a.fractions.begin(), a.fractions.end(), spec.fractions.begin());
    const auto assignment = split(labeled, spec);
    const fs::path out(a.out);
    io::write_text_file(out, format_split_csv(assignment));
    const fs::path table = a.table.empty() ? sibling(out, "_table.txt") : fs::path(a.table);
    const fs::path dist = a.distribution.empty() ? sibling(out, "_distribution.csv") : fs::path(a.distribution);
    io::write_text_file(table, distribution_text(assignment.distribution));
    io::write_text_file(dist, distribution_csv(assignment.distribution));
    log.info("split {} images of {} patients; max class deviation {:.4f}", labeled.size(),
             assignment.distribution.sets[0].patients + assignment.distribution.sets[1].patients +
                 assignment.distribution.sets[2].patients,
             assignment.achieved_deviation);
    return kExitOk;
}

struct PreprocessArgs {
    std::string manifest;
    std::string images;
    std::string sizes = "256,299,512,1024,2095";
    std::string out;
    std::string report;
    unsigned jobs = 1;
    bool drop_flagged = false;
};

int do_preprocess(const PreprocessArgs& a, spdlog::logger& log) {
    const auto records = load_manifest(a.manifest, a.drop_flagged, log);
    PreprocessOptions options;
    options.images_dir = a.images.empty() ? fs::path(a.manifest).parent_path() / "images" : fs::path(a.images);
    options.sizes = parse_sizes(a.sizes);
    options.out_dir = a.out;
    options.jobs = a.jobs;
    const auto report = run_preprocess(records, options);
    for (const auto& f : report.failed) {
        log.warn("{}: {}", f.image_id, f.message);
    }
    const fs::path report_path = a.report.empty() ? fs::path(a.out) / "preprocess_report.json" : fs::path(a.report);
    io::write_text_file(report_path, preprocess_report_json(report));
    log.info("preprocessed {} images, {} failed, {} files written", report.processed.size(), report.failed.size(),
             report.files_written);
    return kExitOk;
}

struct EvalArgs {
    std::string system;
    std::string scores;
    std::string split;
    std::string manifest;
    std::string size = "na";
    std::string out = ".";
    std::optional<double> target_sens;
    std::optional<double> target_spec;
    std::string ci_method = "clopper_pearson";
    std::size_t replicates = 2000;
    std::uint64_t seed = 0;
    unsigned jobs = 1;
    std::string messidor;
    std::string messidor_scores;
    bool drop_flagged = false;
};

int do_eval(bool binary, const EvalArgs& a, spdlog::logger& log) {
    const auto system = parse_system(a.system);
    const std::size_t k = class_count(system);
    if (binary != (k == 2)) {
        throw Error(ErrorCode::RangeError,
                    fmt::format("system '{}' has {} classes; use 'eval {}'", a.system, k, k == 2 ? "binary" : "multi"));
    }
    const auto records = load_manifest(a.manifest, a.drop_flagged, log);
    const auto labeled = records_for_system(records, system);
    SplitAssignment assignment;
    assignment.system = system;
    assignment.sets = parse_split_csv(io::read_text_file(a.split));
    const auto scores = parse_scores_csv(io::read_text_file(a.scores), k);
    const fs::path out(a.out);

    if (!binary) {
        auto report = evaluate_multiclass(collect_set(labeled, &assignment, scores, SplitSet::Validation), system);
        report.input_size = a.size;
        write_report_files(report, out, log);
        return kExitOk;
    }

    BinaryOptions options;
    if (a.target_spec) {
        options.criterion = Criterion::TargetSpecificity;
        options.target = *a.target_spec;
    } else {
        options.criterion = Criterion::TargetSensitivity;
        options.target = a.target_sens.value_or(0.9);
    }
    if (a.ci_method == "clopper_pearson") {
        options.auc_ci = CiMethod::ClopperPearson;
    } else if (a.ci_method == "bootstrap" || a.ci_method == "cluster_bootstrap") {
        options.auc_ci = CiMethod::ClusterBootstrap;
    } else {
        throw Error(ErrorCode::RangeError, "unknown --ci-method '" + a.ci_method + "'");
    }
    options.bootstrap.replicates = a.replicates;
    options.bootstrap.seed = a.seed;
    options.bootstrap.jobs = a.jobs;

    const auto tuning = collect_set(labeled, &assignment, scores, SplitSet::Tune);
    const auto validation = collect_set(labeled, &assignment, scores, SplitSet::Validation);
    auto report = evaluate_binary(tuning, validation, system, options);
    report.input_size = a.size;
    write_report_files(report, out, log);
    if (report.operating_point.trivial) {
        log.warn("operating point calls every tuning image positive");
    }

    if (!a.messidor.empty()) {
        if (a.messidor_scores.empty()) {
            throw Error(ErrorCode::RangeError, "--messidor needs --messidor-scores");
        }
        if (system != GradingSystem::RDR && system != GradingSystem::RDME) {
            throw Error(ErrorCode::RangeError, "external Messidor evaluation applies to rdr and rdme only");
        }
        const auto parsed = parse_messidor_labels(io::read_text_file(a.messidor));
        for (const auto& d : parsed.diagnostics) {
            log.warn("{}:{}: {}", a.messidor, d.line, d.message);
        }
        const auto external_scores = parse_scores_csv(io::read_text_file(a.messidor_scores), 2);
        std::vector<LabeledRecord> external;
        for (const auto& m : parsed.records) {
            GradeRecord r;
            r.image_id = m.image_id;
            r.patient_id = m.image_id; // no patient ids: every image is its own cluster
            r.gradable = true;
            const auto labels = m.labels();
            external.emplace_back(r, system == GradingSystem::RDR ? labels.rdr : labels.rdme);
        }
        auto messidor = apply_operating_point(report.operating_point,
                                              collect_set(external, nullptr, external_scores, std::nullopt), system,
                                              options);
        messidor.input_size = a.size;
        messidor.dataset = "messidor";
        write_report_files(messidor, out, log);
    }
    return kExitOk;
}

struct SynthArgs {
    std::string preset = "table1-rdr";
    std::string system;
    std::size_t patients = 1000;
    std::uint64_t seed = 42;
    std::string out;
    double auc = 0.987;
    double quality = 2.0;
    bool images = false;
    int width = 640;
    int height = 480;
    int radius = 220;
    std::size_t messidor = 0;
    unsigned jobs = 1;
};

std::string binary_scores_csv(const std::vector<std::string>& ids, const std::vector<int>& labels, double target_auc,
                              std::uint64_t seed) {
    const auto scores = synth::binormal_scores_for(labels, target_auc, seed);
    ScoreSet set(2);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        set.add(ids[i], std::vector<double>{1.0 - scores[i], scores[i]});
    }
    return format_scores_csv(set);
}

int do_synth(const SynthArgs& a, spdlog::logger& log) {
    auto spec = synth::population_preset(a.preset, a.patients, a.seed);
    if (!a.system.empty()) {
        spec.system = parse_system(a.system);
    }
    const auto records = synth::gen_population(spec);
    const fs::path out(a.out);
    io::write_text_file(out / "manifest.csv", serialize_manifest(records));

    const auto labeled = records_for_system(records, spec.system);
    const std::size_t k = class_count(spec.system);
    const std::uint64_t score_seed = a.seed ^ 0x5C0E5C0E5C0E5C0EULL;
    std::vector<std::string> ids;
    for (const auto& [record, label] : labeled) {
        ids.push_back(record.image_id);
    }
    if (k == 2) {
        std::vector<int> labels;
        for (const auto& [record, label] : labeled) {
            labels.push_back(static_cast<int>(label.index()));
        }
        io::write_text_file(out / "scores.csv", binary_scores_csv(ids, labels, a.auc, score_seed));
    } else {
        std::vector<std::size_t> labels;
        for (const auto& [record, label] : labeled) {
            labels.push_back(label.index());
        }
        const auto probs = synth::gen_ordinal_scores(labels, k, a.quality, score_seed);
        ScoreSet set(k);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            set.add(ids[i], probs[i]);
        }
        io::write_text_file(out / "scores.csv", format_scores_csv(set));
    }

    if (a.messidor > 0) {
        if (k != 2) {
            throw Error(ErrorCode::RangeError, "--messidor needs a binary system (rdr or rdme)");
        }
        Rng rng(a.seed ^ 0x3E55100ULL);
        std::string labels_csv = "image_id,retinopathy_grade,edema_risk\n";
        std::vector<std::string> m_ids;
        std::vector<int> m_labels;
        static constexpr double kRetinopathy[] = {0.45, 0.15, 0.20, 0.20};
        static constexpr double kEdema[] = {0.80, 0.07, 0.13};
        for (std::size_t i = 0; i < a.messidor; ++i) {
            const auto id = fmt::format("M{:05}", i + 1);
            const auto grade = static_cast<int>(rng.categorical(kRetinopathy));
            const auto risk = static_cast<int>(rng.categorical(kEdema));
            labels_csv += fmt::format("{},{},{}\n", id, grade, risk);
            const auto mapped = map_messidor(grade, risk);
            m_ids.push_back(id);
            m_labels.push_back(static_cast<int>((spec.system == GradingSystem::RDR ? mapped.rdr : mapped.rdme).index()));
        }
        io::write_text_file(out / "messidor_labels.csv", labels_csv);
        io::write_text_file(out / "messidor_scores.csv",
                            binary_scores_csv(m_ids, m_labels, a.auc, score_seed ^ 0xABCDEFULL));
    }

    if (a.images) {
        parallel_for(records.size(), a.jobs, [&](std::size_t i) {
            const auto image = synth::gen_fundus_image(a.width, a.height, a.radius, true,
                                                       Rng::substream(a.seed, i).next_u64());
            write_png(out / "images" / (records[i].image_id + ".png"), image);
        });
    }
    log.info("synthesised {} patients, {} images ({} labelled for {})", a.patients, records.size(), labeled.size(),
             system_token(spec.system));
    return kExitOk;
}

struct ReportArgs {
    std::vector<std::string> inputs;
    std::string out = ".";
};

int do_report(const ReportArgs& a, spdlog::logger& log) {
    for (const auto& input : a.inputs) {
        write_report_files(parse_report_json(io::read_text_file(input)), a.out, log);
    }
    return kExitOk;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    auto logger = make_logger(err);

    CLI::App app{"Diabetic-retinopathy screening evaluation toolkit", "fundus-eval"};
    app.require_subcommand(1);

    SplitArgs split_args;
    auto* split_cmd = app.add_subcommand("split", "Patient-exclusive stratified train/tune/validation split");
    split_cmd->add_option("--manifest", split_args.manifest, "Manifest CSV")->required();
    split_cmd->add_option("--system", split_args.system, "Grading system: pirc, pimec, rdr, rdme, qrdr")->required();
    split_cmd->add_option("--seed", split_args.seed, "Shuffle seed");
    split_cmd->add_option("--out", split_args.out, "Output split CSV (image_id,set)")->required();
    split_cmd->add_option("--table", split_args.table, "Distribution table text (default <out>_table.txt)");
    split_cmd->add_option("--distribution", split_args.distribution,
                          "Distribution CSV (default <out>_distribution.csv)");
    split_cmd->add_option("--fractions", split_args.fractions, "Train, tune, validation image fractions")
        ->delimiter(',')
        ->expected(3);
    split_cmd->add_option("--tolerance", split_args.tolerance, "Max pairwise class-proportion difference");
    split_cmd->add_flag("--drop-flagged", split_args.drop_flagged, "Drop rows with a grader disagreement flag");

    PreprocessArgs pre_args;
    auto* pre_cmd = app.add_subcommand("preprocess", "Crop fundus images to their tight square and resize");
    pre_cmd->add_option("--manifest", pre_args.manifest, "Manifest CSV")->required();
    pre_cmd->add_option("--images", pre_args.images, "Source image directory (default <manifest dir>/images)");
    pre_cmd->add_option("--sizes", pre_args.sizes, "Comma-separated target sides");
    pre_cmd->add_option("--out", pre_args.out, "Output tree root")->required();
    pre_cmd->add_option("--report", pre_args.report, "Report JSON (default <out>/preprocess_report.json)");
    pre_cmd->add_option("--jobs", pre_args.jobs, "Worker threads")->check(CLI::Range(1U, 1024U));
    pre_cmd->add_flag("--drop-flagged", pre_args.drop_flagged, "Drop rows with a grader disagreement flag");

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate scores against a split");
    eval_cmd->require_subcommand(1);
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--system", eval_args.system, "Grading system")->required();
        cmd->add_option("--scores", eval_args.scores, "Scores CSV (image_id,p0..)")->required();
        cmd->add_option("--split", eval_args.split, "Split CSV")->required();
        cmd->add_option("--manifest", eval_args.manifest, "Manifest CSV")->required();
        cmd->add_option("--size", eval_args.size, "Input-size tag used in report names");
        cmd->add_option("--out", eval_args.out, "Output directory");
        cmd->add_option("--jobs", eval_args.jobs, "Worker threads")->check(CLI::Range(1U, 1024U));
        cmd->add_flag("--drop-flagged", eval_args.drop_flagged, "Drop rows with a grader disagreement flag");
    };
    auto* binary_cmd = eval_cmd->add_subcommand("binary", "Two-class evaluation at a tuning-set operating point");
    add_common(binary_cmd);
    auto* sens = binary_cmd->add_option("--target-sens", eval_args.target_sens, "Tuning sensitivity target");
    binary_cmd->add_option("--target-spec", eval_args.target_spec, "Tuning specificity target")->excludes(sens);
    binary_cmd->add_option("--ci-method", eval_args.ci_method, "AUC interval: clopper_pearson or bootstrap");
    binary_cmd->add_option("--replicates", eval_args.replicates, "Bootstrap replicates");
    binary_cmd->add_option("--seed", eval_args.seed, "Bootstrap seed");
    binary_cmd->add_option("--messidor", eval_args.messidor, "External label CSV (image_id,retinopathy_grade,edema_risk)");
    binary_cmd->add_option("--messidor-scores", eval_args.messidor_scores, "Scores CSV for the external images");
    auto* multi_cmd = eval_cmd->add_subcommand("multi", "Multiclass evaluation with argmax predictions");
    add_common(multi_cmd);

    SynthArgs synth_args;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic population, scores and images");
    synth_cmd->add_option("--preset", synth_args.preset, "table1-rdr, table1-rdme, table1-pirc, table1-pimec, table1-qrdr");
    synth_cmd->add_option("--system", synth_args.system, "Override the preset's grading system for scores");
    synth_cmd->add_option("--patients", synth_args.patients, "Number of patients")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--seed", synth_args.seed, "Seed");
    synth_cmd->add_option("--out", synth_args.out, "Output directory")->required();
    synth_cmd->add_option("--auc", synth_args.auc, "Target AUC for binary scores");
    synth_cmd->add_option("--quality", synth_args.quality, "Ordinal score quality for multiclass scores");
    synth_cmd->add_flag("--images", synth_args.images, "Also write fundus-like PNG images");
    synth_cmd->add_option("--width", synth_args.width, "Image width");
    synth_cmd->add_option("--height", synth_args.height, "Image height");
    synth_cmd->add_option("--radius", synth_args.radius, "Fundus disk radius");
    synth_cmd->add_option("--messidor", synth_args.messidor, "Also write an external labelled set of this size");
    synth_cmd->add_option("--jobs", synth_args.jobs, "Worker threads")->check(CLI::Range(1U, 1024U));

    ReportArgs report_args;
    auto* report_cmd = app.add_subcommand("report", "Re-render stored JSON reports");
    report_cmd->add_option("--input", report_args.inputs, "Report JSON file(s)")->required();
    report_cmd->add_option("--out", report_args.out, "Output directory");

    std::vector<std::string> argv_storage{"fundus-eval"};
    argv_storage.insert(argv_storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_storage) {
        argv.push_back(a.data());
    }
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitUsage;
    }

    try {
        if (split_cmd->parsed()) {
            return do_split(split_args, *logger);
        }
        if (pre_cmd->parsed()) {
            return do_preprocess(pre_args, *logger);
        }
        if (binary_cmd->parsed()) {
            return do_eval(true, eval_args, *logger);
        }
        if (multi_cmd->parsed()) {
            return do_eval(false, eval_args, *logger);
        }
        if (synth_cmd->parsed()) {
            return do_synth(synth_args, *logger);
        }
        if (report_cmd->parsed()) {
            return do_report(report_args, *logger);
        }
    } catch (const Error& e) {
        logger->error("{}", e.what());
        return e.code() == ErrorCode::IoError ? kExitIo : kExitValidation;
    } catch (const std::exception& e) {
        logger->error("{}", e.what());
        return kExitValidation;
    }
    return kExitUsage;
}

} // namespace fundus::cli
