#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "crashcast/baselines.hpp"
#include "crashcast/csv.hpp"
#include "crashcast/errors.hpp"
#include "crashcast/eval.hpp"
#include "crashcast/features.hpp"
#include "crashcast/ingest.hpp"
#include "crashcast/label.hpp"
#include "crashcast/neuralnet.hpp"
#include "crashcast/synthgen.hpp"

namespace fs = std::filesystem;
using namespace crashcast;

namespace {

std::string join_path(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InputError("cannot create directory " + dir + ": " + ec.message());
}

struct AnyModel {
    std::string kind; // cnn | mlp | svm | tree
    CnnModel cnn;
    MlpModel mlp;
    SvmModel svm;
    TreeModel tree;

    const std::vector<std::string>& feature_names() const {
        if (kind == "cnn") return cnn.feature_names;
        if (kind == "mlp") return mlp.feature_names;
        if (kind == "svm") return svm.feature_names;
        return tree.feature_names;
    }
};

AnyModel load_any_model(const std::string& path) {
    LineReader reader(path);
    std::string first;
    if (!reader.next(first)) throw EmptyFileError(path);

    AnyModel m;
    if (first == "crashcast-model v1") {
        m.kind = "cnn";
        m.cnn = load_cnn_model(path);
    } else if (first == "crashcast-model mlp v1") {
        m.kind = "mlp";
        m.mlp = load_mlp_model(path);
    } else if (first == "crashcast-model svm v1") {
        m.kind = "svm";
        m.svm = load_svm_model(path);
    } else if (first == "crashcast-model tree v1") {
        m.kind = "tree";
        m.tree = load_tree_model(path);
    } else {
        throw FormatError(1, "unknown model header '" + first + "' in " + path);
    }
    return m;
}

// Scalar risk plus the three one-vs-rest score columns for a model on a
// dataset. SVM scores are per-class margins min-max scaled over this set.
void model_predictions(const AnyModel& m, const Dataset& data, std::vector<double>& risks,
                       std::array<std::vector<double>, 3>& scores) {
    const std::size_t n = data.windows.size();
    if (m.kind == "svm") {
        if (data.feature_names != m.svm.feature_names)
            throw FeatureMismatchError("dataset features do not match model features");
        risks.assign(n, 0.0);
        for (auto& col : scores) col.assign(n, 0.0);
        constexpr double centers[3] = {0.0, 0.5, 1.0};
        for (std::size_t i = 0; i < n; ++i) {
            auto margins = svm_margins(m.svm, data.windows[i]);
            std::size_t best = 0;
            for (std::size_t c = 1; c < 3; ++c)
                if (margins[c] >= margins[best]) best = c;
            risks[i] = centers[best];
            for (std::size_t c = 0; c < 3; ++c) scores[c][i] = margins[c];
        }
        for (auto& col : scores) {
            double lo = col[0], hi = col[0];
            for (double v : col) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            for (double& v : col) v = hi > lo ? (v - lo) / (hi - lo) : 0.5;
        }
        return;
    }

    if (m.kind == "cnn")
        risks = predict_cnn_all(m.cnn, data);
    else if (m.kind == "mlp")
        risks = predict_mlp_all(m.mlp, data);
    else
        risks = predict_tree_all(m.tree, data);
    for (auto& col : scores) col.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        ClassScores cs = class_scores(risks[i]);
        for (std::size_t c = 0; c < 3; ++c) scores[c][i] = cs.scores[c];
    }
}

std::vector<double> dataset_labels(const Dataset& data) {
    std::vector<double> labels;
    labels.reserve(data.windows.size());
    for (const auto& w : data.windows) labels.push_back(w.label);
    return labels;
}

int run_synth(const SynthSpec& spec, std::uint64_t seed, const std::string& out) {
    ensure_dir(out);
    SynthPaths paths{join_path(out, "sensors.csv"), join_path(out, "weather.csv"),
                     join_path(out, "crashes.csv")};
    generate(spec, seed, paths);
    VerifyReport report = verify_spec(paths, spec);
    write_verify_csv(join_path(out, "spec_report.csv"), report);
    std::printf("wrote %s, %s, %s\n", paths.sensors.c_str(), paths.weather.c_str(),
                paths.crashes.c_str());
    for (const auto& row : report.rows)
        std::printf("%-14s mean %.3f (target %.3f)  std %.3f (target %.3f)\n",
                    row.feature.c_str(), row.mean, row.target_mean, row.std_dev,
                    row.target_std);
    return 0;
}

int run_prepare(const std::string& sensors, const std::string& weather,
                const std::string& crashes, const std::string& out, std::uint64_t seed,
                unsigned ratio, LabelPolicy policy) {
    ensure_dir(out);
    auto records = parse_sensor_csv(sensors);
    auto intervals = aggregate_intervals(std::move(records));
    join_weather(intervals, parse_weather_csv(weather));
    auto events = parse_crash_csv(crashes);

    LabelSummary summary;
    Dataset dataset;
    dataset.feature_names.assign(kFeatureNames.begin(), kFeatureNames.end());
    dataset.windows = extract_crash_windows(intervals, events, policy, summary);
    auto matched = sample_matched_noncrash(intervals, events, ratio, seed, summary);
    dataset.windows.insert(dataset.windows.end(), std::make_move_iterator(matched.begin()),
                           std::make_move_iterator(matched.end()));

    write_dataset_csv(join_path(out, "prepared.csv"), dataset);

    double achieved = summary.crash_windows > 0
                          ? static_cast<double>(summary.noncrash_windows) /
                                static_cast<double>(summary.crash_windows)
                          : 0.0;
    std::string txt;
    txt += "crash_windows," + std::to_string(summary.crash_windows) + '\n';
    txt += "far_windows," + std::to_string(summary.far_windows) + '\n';
    txt += "noncrash_windows," + std::to_string(summary.noncrash_windows) + '\n';
    txt += "skipped_crashes," + std::to_string(summary.skipped_crashes) + '\n';
    txt += "insufficient_events," + std::to_string(summary.insufficient_events) + '\n';
    txt += "achieved_ratio," + format_double(achieved) + '\n';
    write_entire_file(join_path(out, "prepare_summary.csv"), txt);

    std::printf("windows: %zu crash, %zu far, %zu non-crash (ratio 1:%s)\n",
                summary.crash_windows, summary.far_windows, summary.noncrash_windows,
                format_double(achieved).c_str());
    if (summary.skipped_crashes)
        std::printf("skipped %zu crashes without a full history window\n",
                    summary.skipped_crashes);
    if (summary.insufficient_events)
        std::printf("%zu crashes had fewer than %u matched candidates\n",
                    summary.insufficient_events, ratio);
    return 0;
}

int run_features(const std::string& data, const std::string& out, std::uint64_t seed,
                 double corr_threshold, std::size_t tree_count) {
    ensure_dir(out);
    Dataset dataset = read_dataset_csv(data);
    auto importance = extra_trees_importance(dataset, tree_count, seed);
    auto corr = pearson_matrix(dataset);
    auto kept = select_features(importance, corr, corr_threshold);

    write_selection_report(join_path(out, "selection.csv"), dataset.feature_names, importance,
                           kept);
    write_correlation_csv(join_path(out, "correlation.csv"), dataset.feature_names, corr);
    Dataset reduced = reduce_dataset(dataset, kept);
    write_dataset_csv(join_path(out, "reduced.csv"), reduced);

    std::printf("kept %zu of %zu features:", kept.size(), dataset.feature_names.size());
    for (std::size_t i : kept) std::printf(" %s", dataset.feature_names[i].c_str());
    std::printf("\n");
    return 0;
}

int run_train(const std::string& data, const std::string& out, std::uint64_t seed,
              const std::string& kind, double train_frac, std::size_t epochs, double lr,
              std::size_t filters) {
    ensure_dir(out);
    Dataset full = read_dataset_csv(data);
    Dataset train, test;
    split_train_test(full, train_frac, seed, train, test);
    write_dataset_csv(join_path(out, "train.csv"), train);
    write_dataset_csv(join_path(out, "test.csv"), test);

    NormalizationParams norm = fit_minmax(train);
    Dataset norm_train = train;
    apply_minmax(norm_train, norm);

    TrainingTrace trace;
    AnyModel m;
    m.kind = kind;
    if (kind == "cnn") {
        CnnConfig cfg;
        cfg.learning_rate = lr;
        cfg.epochs = epochs;
        cfg.filter_count = filters;
        cfg.seed = seed;
        m.cnn = train_cnn(norm_train, norm, cfg, trace);
        save_cnn_model(join_path(out, "cnn.model"), m.cnn);
    } else if (kind == "mlp") {
        m.mlp = train_bp_mlp(norm_train, norm, lr, 0.9, epochs, seed, trace);
        save_mlp_model(join_path(out, "mlp.model"), m.mlp);
    } else if (kind == "svm") {
        m.svm = train_svm_ovr(norm_train, norm, 1e-3, epochs, trace);
        save_svm_model(join_path(out, "svm.model"), m.svm);
    } else if (kind == "tree") {
        m.tree = train_decision_tree(norm_train, norm, 8, 5);
        save_tree_model(join_path(out, "tree.model"), m.tree);
    } else {
        throw InputError("unknown model kind " + kind);
    }

    if (!test.windows.empty()) {
        std::vector<double> risks;
        std::array<std::vector<double>, 3> scores;
        model_predictions(m, test, risks, scores);
        trace.final_test_mse = regression_metrics(risks, dataset_labels(test)).mse;
        trace.has_test_mse = true;
    }
    write_trace_csv(join_path(out, kind + "_trace.csv"), trace);

    std::printf("trained %s on %zu windows (%zu held out)\n", kind.c_str(),
                train.windows.size(), test.windows.size());
    if (!trace.epoch_train_mse.empty())
        std::printf("final train mse %s\n", format_double(trace.epoch_train_mse.back()).c_str());
    if (trace.has_test_mse)
        std::printf("test mse %s\n", format_double(trace.final_test_mse).c_str());
    return 0;
}

int run_evaluate(const std::string& model_path, const std::string& data,
                 const std::string& out) {
    ensure_dir(out);
    AnyModel m = load_any_model(model_path);
    Dataset test = read_dataset_csv(data);

    std::vector<double> risks;
    std::array<std::vector<double>, 3> scores;
    model_predictions(m, test, risks, scores);

    RocSet curves;
    EvalReport report = one_vs_rest_report(scores, dataset_labels(test), risks, &curves);

    write_report_csv(join_path(out, "report.csv"), report);
    write_report_json(join_path(out, "report.json"), report, m.kind);
    const char* roc_names[3] = {"roc_class_0.csv", "roc_class_0_5.csv", "roc_class_1.csv"};
    std::vector<std::pair<std::string, RocCurve>> plot;
    for (std::size_t c = 0; c < 3; ++c) {
        if (!curves.present[c]) continue;
        write_roc_csv(join_path(out, roc_names[c]), curves.per_class[c]);
        plot.emplace_back(kClassRowNames[c], curves.per_class[c]);
    }
    write_roc_csv(join_path(out, "roc_micro.csv"), curves.micro);
    plot.emplace_back("Micro", curves.micro);
    write_roc_svg(join_path(out, "roc.svg"), plot);

    std::printf("micro: auc %s  far %s  precision %s\n",
                format_double(report.micro.auc).c_str(),
                format_double(report.micro.far).c_str(),
                format_double(report.micro.precision).c_str());
    if (report.has_regression)
        std::printf("mse %s  rmse %s  r %s\n", format_double(report.regression.mse).c_str(),
                    format_double(report.regression.rmse).c_str(),
                    report.regression.r_defined ? format_double(report.regression.r).c_str()
                                                : "undefined");
    if (report.missing_classes)
        std::printf("warning: %zu class(es) absent from the test set\n",
                    report.missing_classes);
    return 0;
}

int run_compare(const std::vector<std::string>& model_paths, const std::string& data,
                const std::string& out) {
    ensure_dir(fs::path(out).parent_path().string().empty()
                   ? "."
                   : fs::path(out).parent_path().string());
    Dataset test = read_dataset_csv(data);
    auto labels = dataset_labels(test);

    std::string buf = "model,auc,false_alarm_rate,precision,mse,rmse,r\n";
    for (const auto& path : model_paths) {
        AnyModel m = load_any_model(path);
        std::vector<double> risks;
        std::array<std::vector<double>, 3> scores;
        model_predictions(m, test, risks, scores);
        EvalReport report = one_vs_rest_report(scores, labels, risks);

        const char* row_name = m.kind == "cnn"   ? "CNN"
                               : m.kind == "mlp" ? "BP"
                               : m.kind == "svm" ? "SVM"
                                                 : "Decision tree";
        buf += row_name;
        buf += ',' + format_double(report.micro.auc);
        buf += ',' + format_double(report.micro.far);
        buf += ',' + format_double(report.micro.precision);
        buf += ',' + format_double(report.regression.mse);
        buf += ',' + format_double(report.regression.rmse);
        buf += ',';
        buf += report.regression.r_defined ? format_double(report.regression.r) : "undefined";
        buf += '\n';
        std::printf("%s: micro auc %s\n", row_name, format_double(report.micro.auc).c_str());
    }
    write_entire_file(out, buf);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"crashcast: crash-risk forecasting pipeline"};
    app.require_subcommand(1);
    int rc = 0;

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic study year");
    SynthSpec spec = SynthSpec::defaults();
    std::uint64_t synth_seed = 0;
    std::string synth_out;
    synth->add_option("--seed", synth_seed, "generator seed")->required();
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--sensor-count", spec.sensor_count, "camera count");
    synth->add_option("--crash-count", spec.crash_count, "crash events to place");
    synth->add_option("--days", spec.study_days, "study length in days");
    synth->add_option("--speed-drop", spec.speed_drop_fraction, "precursor speed drop fraction");
    synth->add_option("--volume-surge", spec.volume_surge_fraction,
                      "precursor volume surge fraction");
    synth->add_option("--onset-minutes", spec.onset_minutes, "precursor onset before crash");
    synth->add_option("--noise-scale", spec.noise_scale, "precursor noise scale");
    synth->add_option("--precip-rate", spec.precipitation_rate, "rainy-day probability");
    synth->add_option("--diurnal-amplitude", spec.diurnal_amplitude, "rush-hour amplitude");
    synth->callback([&]() { rc = run_synth(spec, synth_seed, synth_out); });

    // prepare
    auto* prepare = app.add_subcommand("prepare", "label windows and resample");
    std::string p_sensors, p_weather, p_crashes, p_out, p_policy = "near-far";
    std::uint64_t p_seed = 0;
    unsigned p_ratio = 5;
    prepare->add_option("--sensors", p_sensors, "sensor readings CSV")->required();
    prepare->add_option("--weather", p_weather, "weather CSV")->required();
    prepare->add_option("--crashes", p_crashes, "crash log CSV")->required();
    prepare->add_option("--out", p_out, "output directory")->required();
    prepare->add_option("--seed", p_seed, "matched-sampling seed")->required();
    prepare->add_option("--ratio", p_ratio, "non-crash windows per crash");
    prepare->add_option("--policy", p_policy, "near-far | single-window")
        ->check(CLI::IsMember({"near-far", "single-window"}));
    prepare->callback([&]() {
        rc = run_prepare(p_sensors, p_weather, p_crashes, p_out, p_seed, p_ratio,
                         p_policy == "near-far" ? LabelPolicy::NearFar
                                                : LabelPolicy::SingleWindow);
    });

    // features
    auto* features = app.add_subcommand("features", "rank, prune, and reduce features");
    std::string f_data, f_out;
    std::uint64_t f_seed = 0;
    double f_threshold = 0.5;
    std::size_t f_trees = 100;
    features->add_option("--data", f_data, "prepared dataset CSV")->required();
    features->add_option("--out", f_out, "output directory")->required();
    features->add_option("--seed", f_seed, "extra-trees seed")->required();
    features->add_option("--corr-threshold", f_threshold, "|r| above which a pair is redundant");
    features->add_option("--tree-count", f_trees, "extra-trees forest size");
    features->callback([&]() { rc = run_features(f_data, f_out, f_seed, f_threshold, f_trees); });

    // train
    auto* train = app.add_subcommand("train", "split, normalize, and fit a model");
    std::string t_data, t_out, t_model = "cnn";
    std::uint64_t t_seed = 0;
    double t_frac = 0.8, t_lr = 0.01;
    std::size_t t_epochs = 100, t_filters = 64;
    train->add_option("--data", t_data, "reduced dataset CSV")->required();
    train->add_option("--out", t_out, "output directory")->required();
    train->add_option("--seed", t_seed, "split/init seed")->required();
    train->add_option("--model", t_model, "cnn | mlp | svm | tree")
        ->check(CLI::IsMember({"cnn", "mlp", "svm", "tree"}));
    train->add_option("--train-frac", t_frac, "train fraction per class");
    train->add_option("--epochs", t_epochs, "training epochs");
    train->add_option("--lr", t_lr, "learning rate");
    train->add_option("--filters", t_filters, "conv filter count (cnn)");
    train->callback([&]() {
        rc = run_train(t_data, t_out, t_seed, t_model, t_frac, t_epochs, t_lr, t_filters);
    });

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "score a model on a test set");
    std::string e_model, e_data, e_out;
    evaluate->add_option("--model", e_model, "model file")->required();
    evaluate->add_option("--data", e_data, "test dataset CSV")->required();
    evaluate->add_option("--out", e_out, "output directory")->required();
    evaluate->callback([&]() { rc = run_evaluate(e_model, e_data, e_out); });

    // compare
    auto* compare = app.add_subcommand("compare", "tabulate several models on one test set");
    std::vector<std::string> c_models;
    std::string c_data, c_out;
    compare->add_option("--model", c_models, "model file (repeatable)")->required();
    compare->add_option("--data", c_data, "test dataset CSV")->required();
    compare->add_option("--out", c_out, "comparison CSV path")->required();
    compare->callback([&]() { rc = run_compare(c_models, c_data, c_out); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const SpecInfeasibleError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return rc;
}
