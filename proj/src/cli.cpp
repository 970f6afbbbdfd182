#include "pathwatch/cli.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pathwatch/baselines.hpp"
#include "pathwatch/runner.hpp"
#include "pathwatch/synth.hpp"
#include "pathwatch/tpe.hpp"

namespace pathwatch {

namespace {

using nlohmann::json;

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
}

Dataset load_dataset(const std::string& path, const std::string& format) {
    std::string fmt = format;
    if (fmt == "auto") {
        fmt = std::filesystem::path(path).extension() == ".jsonl" ? "jsonl" : "csv";
    }
    if (fmt == "jsonl") return parse_jsonl(path);
    if (fmt == "csv") return parse_csv(path);
    throw DataError("unknown input format: " + fmt);
}

struct SynthArgs {
    int paths = 100;
    int obs = 100;
    double change_rate = 0.02;
    bool benchmark = false;
    std::uint64_t seed = 0;
    std::string output;
    std::string ground_truth;
};

int cmd_synth(const SynthArgs& args) {
    Dataset data;
    GroundTruth truth;
    std::string version = "custom";
    if (args.benchmark) {
        Benchmark bench = benchmark_suite(args.seed);
        data = std::move(bench.data);
        truth = std::move(bench.truth);
        version = bench.version;
    } else {
        SynthConfig config;
        config.n_paths = args.paths;
        config.obs_per_path = args.obs;
        config.change_rate = args.change_rate;
        config.seed = args.seed;
        std::tie(data, truth) = generate(config);
    }
    write_csv(data, args.output);
    if (!args.ground_truth.empty()) {
        atomic_write_file(args.ground_truth, ground_truth_to_json(truth, version));
    }
    std::cerr << "wrote " << data.size() << " rows to " << args.output << "\n";
    return 0;
}

struct FeaturizeArgs {
    std::string input;
    std::string format = "auto";
    std::string output;
    std::string sidecar;
    std::string apply;
};

int cmd_featurize(const FeaturizeArgs& args) {
    Dataset data = load_dataset(args.input, args.format);
    FeatureConfig config;
    std::optional<AggregateTables> tables;
    if (!args.apply.empty()) {
        auto [loaded_config, loaded_tables] =
            deserialize_feature_state(read_file(args.apply));
        config = loaded_config;
        tables = std::move(loaded_tables);
    }
    auto [matrix, fitted] = build_features(data, config, tables);
    atomic_write_file(args.output, matrix.to_csv());
    if (!args.sidecar.empty()) {
        atomic_write_file(args.sidecar, serialize_feature_state(config, fitted));
    }
    std::cerr << "wrote " << matrix.n_rows << " x " << matrix.n_cols()
              << " feature matrix to " << args.output << "\n";
    return 0;
}

struct TrainArgs {
    std::string input;
    std::string format = "auto";
    std::string output;
    std::string mode = "stacked";
    std::uint64_t seed = 0;
    int folds = 5;
    int hyperopt_trials = 0;
    std::string hyperopt_history;
    bool paper_mode = false;
};

GbdtParams meta_params_from_point(const SearchSpace& space,
                                  const std::vector<double>& point,
                                  std::uint64_t seed) {
    GbdtParams params = default_meta_params(seed);
    for (std::size_t i = 0; i < space.params.size(); ++i) {
        const std::string& name = space.params[i].name;
        double v = point[i];
        if (name == "n_estimators") params.n_estimators = static_cast<int>(std::llround(v));
        else if (name == "learning_rate") params.learning_rate = v;
        else if (name == "max_leaves") params.max_leaves = static_cast<int>(std::llround(v));
        else if (name == "max_depth") params.max_depth = static_cast<int>(std::llround(v));
        else if (name == "feature_fraction") params.feature_fraction = v;
        else if (name == "bagging_fraction") params.bagging_fraction = v;
        else if (name == "l1") params.l1 = v;
        else if (name == "l2") params.l2 = v;
    }
    return params;
}

// Mean F1 over stratified K-fold cross-validation on the meta-features,
// each fold scanned for its own best threshold.
double meta_cv_objective(const FeatureMatrix& meta_x, std::span<const int> y,
                         const GbdtParams& params, int k, std::uint64_t seed) {
    FoldAssignment folds = stratified_kfold(y, k, derive_seed(seed, 0x637663ull));
    std::vector<double> fold_f1(static_cast<std::size_t>(k), 0.0);
    parallel_for(static_cast<std::size_t>(k), [&](std::size_t f) {
        std::vector<std::size_t> train_rows, heldout_rows;
        for (std::size_t i = 0; i < y.size(); ++i) {
            (folds.fold[i] == static_cast<int>(f) ? heldout_rows : train_rows).push_back(i);
        }
        FeatureMatrix x_train = meta_x.select_rows(train_rows);
        FeatureMatrix x_heldout = meta_x.select_rows(heldout_rows);
        std::vector<int> y_train, y_heldout;
        for (std::size_t r : train_rows) y_train.push_back(y[r]);
        for (std::size_t r : heldout_rows) y_heldout.push_back(y[r]);
        GbdtParams fold_params = params;
        fold_params.seed = derive_seed(params.seed, f);
        GbdtModel model = fit_gbdt(x_train, y_train, fold_params);
        auto probs = predict_proba(model, x_heldout);
        try {
            fold_f1[f] = threshold_scan(probs, y_heldout).f1;
        } catch (const SingleClassError&) {
            fold_f1[f] = 0.0;
        }
    });
    double sum = 0;
    for (double v : fold_f1) sum += v;
    return sum / static_cast<double>(k);
}

int cmd_train(const TrainArgs& args) {
    Dataset data = load_dataset(args.input, args.format);
    if (!data.labeled) throw MissingColumnError("route_changed");
    const ThresholdMode mode =
        args.paper_mode ? ThresholdMode::kInSample : ThresholdMode::kOutOfFold;
    FeatureConfig feature_config;

    std::string payload;
    if (args.mode == "stacked") {
        GbdtParams meta = default_meta_params(args.seed);
        if (args.hyperopt_trials > 0) {
            // Search the meta-model space against CV F1 on the meta-features.
            auto bundle = train_stacked_bundle(data, feature_config,
                                               default_base_configs(args.seed), meta,
                                               args.folds, args.seed, mode);
            FeatureMatrix meta_x = build_meta_features(
                bundle.oof, bundle.train_features, bundle.model.selected);
            std::vector<int> y = bundle.train_features.labels;
            SearchSpace space = meta_search_space();
            auto objective = [&](const std::vector<double>& point) {
                GbdtParams trial = meta_params_from_point(space, point, args.seed);
                return meta_cv_objective(meta_x, y, trial, args.folds, args.seed);
            };
            TrialHistory history;
            history.seed = args.seed;
            if (!args.hyperopt_history.empty() &&
                std::filesystem::exists(args.hyperopt_history)) {
                history = history_from_jsonl(read_file(args.hyperopt_history));
            }
            auto result =
                optimize_from(objective, space, args.hyperopt_trials, std::move(history));
            if (!args.hyperopt_history.empty()) {
                atomic_write_file(args.hyperopt_history, history_to_jsonl(result.history));
            }
            meta = meta_params_from_point(space, result.best_point, args.seed);
            std::cerr << "hyperopt best CV F1 " << result.best_value << " after "
                      << result.history.trials.size() << " trials\n";
        }
        StackedModel model = train_stacked(data, feature_config,
                                           default_base_configs(args.seed), meta,
                                           args.folds, args.seed, mode);
        payload = serialize_stacked(model);
    } else if (args.mode.rfind("single:", 0) == 0) {
        std::string which = args.mode.substr(7);
        auto configs = default_base_configs(args.seed);
        int index = which == "a" ? 0 : which == "b" ? 1 : which == "c" ? 2 : -1;
        if (index < 0) throw DataError("unknown single learner: " + which);
        SingleGbdtModel model = train_single(data, feature_config,
                                             configs[static_cast<std::size_t>(index)],
                                             args.folds, args.seed, mode);
        payload = serialize_single(model);
    } else if (args.mode.rfind("baseline:", 0) == 0) {
        BaselineKind kind = baseline_kind_from_string(args.mode.substr(9));
        auto [features, tables] = build_features(data, feature_config);
        auto tuned = tune_baseline(kind, features, features.labels, args.seed);
        double threshold = tuned.threshold;
        if (args.paper_mode && kind != BaselineKind::kDummy) {
            auto train_probs = predict_baseline(tuned.model, features);
            threshold = threshold_scan(train_probs, features.labels).threshold;
        }
        json envelope;
        envelope["format"] = "pathwatch-baseline-bundle";
        envelope["version"] = 1;
        envelope["feature_state"] =
            json::parse(serialize_feature_state(feature_config, tables));
        envelope["model"] = json::parse(serialize_baseline(tuned.model));
        envelope["threshold"] = threshold;
        envelope["seed"] = args.seed;
        payload = envelope.dump();
    } else {
        throw DataError("unknown training mode: " + args.mode);
    }
    atomic_write_file(args.output, payload);
    std::cerr << "wrote model to " << args.output << "\n";
    return 0;
}

std::string container_format(const json& j) {
    if (!j.contains("format") || !j.at("format").is_string()) {
        throw CorruptEncodingError("model file has no format tag");
    }
    return j.at("format").get<std::string>();
}

struct LoadedModel {
    std::string kind;  // stacked | single | <baseline kind>
    std::optional<StackedModel> stacked;
    std::optional<SingleGbdtModel> single;
    std::optional<BaselineModel> baseline;
    FeatureConfig feature_config;
    AggregateTables tables;
    double threshold = 0.5;
};

LoadedModel load_model(const std::string& path) {
    std::string text = read_file(path);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw CorruptEncodingError(std::string("model file: ") + e.what());
    }
    LoadedModel loaded;
    const std::string format = container_format(j);
    if (format == "pathwatch-stacked") {
        loaded.kind = "stacked";
        loaded.stacked = deserialize_stacked(text);
        loaded.threshold = loaded.stacked->threshold;
    } else if (format == "pathwatch-single") {
        loaded.kind = "single";
        loaded.single = deserialize_single(text);
        loaded.threshold = loaded.single->threshold;
    } else if (format == "pathwatch-baseline-bundle") {
        if (j.at("version").get<int>() != 1) {
            throw VersionMismatchError("unsupported baseline bundle version");
        }
        auto [config, tables] = deserialize_feature_state(j.at("feature_state").dump());
        loaded.feature_config = std::move(config);
        loaded.tables = std::move(tables);
        loaded.baseline = deserialize_baseline(j.at("model").dump());
        loaded.threshold = j.at("threshold").get<double>();
        loaded.kind = to_string(loaded.baseline->kind);
    } else {
        throw CorruptEncodingError("unrecognized model container: " + format);
    }
    return loaded;
}

std::pair<std::vector<double>, std::vector<int>> model_predictions(
    const LoadedModel& model, const Dataset& data) {
    if (model.stacked) {
        auto prediction = predict_stacked(*model.stacked, data);
        return {prediction.probabilities, prediction.decisions};
    }
    if (model.single) {
        auto prediction = predict_single(*model.single, data);
        return {prediction.probabilities, prediction.decisions};
    }
    auto features = build_features(data, model.feature_config, model.tables).first;
    auto probs = predict_baseline(*model.baseline, features);
    std::vector<int> decisions(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
        decisions[i] = probs[i] >= model.threshold ? 1 : 0;
    }
    return {std::move(probs), std::move(decisions)};
}

struct PredictArgs {
    std::string model;
    std::string input;
    std::string format = "auto";
    std::string output;
};

int cmd_predict(const PredictArgs& args) {
    LoadedModel model = load_model(args.model);
    Dataset data = load_dataset(args.input, args.format);
    auto [probs, decisions] = model_predictions(model, data);

    std::string out = "tr_src,tr_dst,timestamp,probability,decision\n";
    for (std::size_t i = 0; i < data.records.size(); ++i) {
        const auto& rec = data.records[i];
        out += rec.src;
        out += ',';
        out += rec.dst;
        out += ',';
        out += std::to_string(rec.timestamp);
        out += ',';
        out += format_double(probs[i]);
        out += ',';
        out += std::to_string(decisions[i]);
        out += '\n';
    }
    atomic_write_file(args.output, out);
    std::cerr << "wrote predictions for " << data.size() << " rows to " << args.output
              << "\n";
    return 0;
}

json metrics_to_json(const Metrics& metrics, double threshold) {
    return {{"f1", metrics.f1},
            {"precision", metrics.precision},
            {"recall", metrics.recall},
            {"accuracy", metrics.accuracy},
            {"threshold", threshold},
            {"tp", metrics.counts.tp},
            {"fp", metrics.counts.fp},
            {"tn", metrics.counts.tn},
            {"fn", metrics.counts.fn}};
}

struct EvaluateArgs {
    std::string model;
    std::string input;
    std::string format = "auto";
    std::string output;
};

int cmd_evaluate(const EvaluateArgs& args, const json& run_config,
                 std::chrono::steady_clock::time_point start) {
    LoadedModel model = load_model(args.model);
    Dataset data = load_dataset(args.input, args.format);
    if (!data.labeled) throw MissingColumnError("route_changed");

    json models = json::object();
    if (model.stacked) {
        SingleEvaluation evaluation = evaluate_stacked(*model.stacked, data);
        for (const auto& [name, result] : evaluation.models) {
            models[name] = metrics_to_json(result.metrics, result.threshold);
        }
    } else {
        auto [probs, decisions] = model_predictions(model, data);
        Metrics metrics = classification_metrics(decisions, data.labels());
        models[model.kind] = metrics_to_json(metrics, model.threshold);
    }

    json report;
    report["schema_version"] = 1;
    report["run_config"] = run_config;
    report["models"] = std::move(models);
    report["timing"] = {{"wall_seconds", elapsed_seconds(start)}};
    atomic_write_file(args.output, report.dump(2) + "\n");
    std::cerr << "wrote evaluation report to " << args.output << "\n";
    return 0;
}

struct ReportArgs {
    std::string input;
    std::string format = "auto";
    std::string output;
    std::string f1_csv;
    int rounds = 10;
    std::uint64_t seed = 0;
    int folds = 5;
    double train_fraction = 0.7;
    bool paper_mode = false;
    std::vector<std::string> models;
};

int cmd_report(const ReportArgs& args, const json& run_config,
               std::chrono::steady_clock::time_point start) {
    Dataset data = load_dataset(args.input, args.format);
    if (!data.labeled) throw MissingColumnError("route_changed");

    RoundsConfig config;
    config.rounds = args.rounds;
    config.base_seed = args.seed;
    config.folds = args.folds;
    config.train_fraction = args.train_fraction;
    config.threshold_mode =
        args.paper_mode ? ThresholdMode::kInSample : ThresholdMode::kOutOfFold;
    config.models = args.models;

    EvaluationReport report = run_rounds(data, config);

    json j = json::parse(report_to_json(report));
    j["run_config"] = run_config;
    j["timing"] = {{"wall_seconds", elapsed_seconds(start)}};
    atomic_write_file(args.output, j.dump(2) + "\n");

    if (!args.f1_csv.empty()) {
        std::string csv = "round";
        for (const auto& name : report.model_names) csv += "," + name;
        csv += '\n';
        for (const auto& round : report.rounds) {
            csv += std::to_string(round.round);
            for (const auto& name : report.model_names) {
                csv += ',';
                csv += format_double(round.models.at(name).metrics.f1);
            }
            csv += '\n';
        }
        atomic_write_file(args.f1_csv, csv);
    }
    std::cerr << "wrote round report to " << args.output << "\n";
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"route-change detection from traceroute latency measurements"};
    app.require_subcommand(1);
    app.set_config("--config", "", "TOML config file (flags override it)");
    int jobs = 0;
    app.add_option("--jobs", jobs, "max worker threads (default: all cores)");

    SynthArgs synth_args;
    auto* synth_cmd = app.add_subcommand("synth", "generate a labeled synthetic dataset");
    synth_cmd->add_option("--paths", synth_args.paths, "number of (src,dst) paths");
    synth_cmd->add_option("--obs", synth_args.obs, "observations per path");
    synth_cmd->add_option("--change-rate", synth_args.change_rate,
                          "per-observation route-change probability");
    synth_cmd->add_flag("--benchmark", synth_args.benchmark,
                        "use the canonical 500x100 benchmark configuration");
    synth_cmd->add_option("--seed", synth_args.seed, "RNG seed");
    synth_cmd->add_option("-o,--output", synth_args.output, "output CSV")->required();
    synth_cmd->add_option("--ground-truth", synth_args.ground_truth,
                          "also dump regime metadata JSON");

    FeaturizeArgs feat_args;
    auto* feat_cmd = app.add_subcommand("featurize", "engineer features from a dataset");
    feat_cmd->add_option("-i,--input", feat_args.input, "input dataset")->required();
    feat_cmd->add_option("--format", feat_args.format, "csv | jsonl | auto");
    feat_cmd->add_option("-o,--output", feat_args.output, "output feature CSV")->required();
    feat_cmd->add_option("--sidecar", feat_args.sidecar,
                         "write feature config + aggregate tables JSON");
    feat_cmd->add_option("--apply", feat_args.apply,
                         "apply a frozen sidecar instead of fitting");

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "train a detection model");
    train_cmd->add_option("-i,--input", train_args.input, "labeled dataset")->required();
    train_cmd->add_option("--format", train_args.format, "csv | jsonl | auto");
    train_cmd->add_option("-o,--output", train_args.output, "model file")->required();
    train_cmd->add_option("--mode", train_args.mode,
                          "stacked | single:{a,b,c} | baseline:{dummy,logistic,"
                          "decision_tree,random_forest,knn}");
    train_cmd->add_option("--seed", train_args.seed, "RNG seed");
    train_cmd->add_option("--folds", train_args.folds, "stratified fold count");
    train_cmd->add_option("--hyperopt-trials", train_args.hyperopt_trials,
                          "TPE trials for the meta-model (0 = off)");
    train_cmd->add_option("--hyperopt-history", train_args.hyperopt_history,
                          "trial history JSONL (resumed when present)");
    train_cmd->add_flag("--paper-mode", train_args.paper_mode,
                        "calibrate the threshold on in-sample training "
                        "probabilities instead of out-of-fold ones");

    PredictArgs predict_args;
    auto* predict_cmd = app.add_subcommand("predict", "score a dataset with a model");
    predict_cmd->add_option("--model", predict_args.model, "model file")->required();
    predict_cmd->add_option("-i,--input", predict_args.input, "dataset")->required();
    predict_cmd->add_option("--format", predict_args.format, "csv | jsonl | auto");
    predict_cmd->add_option("-o,--output", predict_args.output, "predictions CSV")
        ->required();

    EvaluateArgs eval_args;
    auto* eval_cmd = app.add_subcommand("evaluate", "evaluate a model on labeled data");
    eval_cmd->add_option("--model", eval_args.model, "model file")->required();
    eval_cmd->add_option("-i,--input", eval_args.input, "labeled dataset")->required();
    eval_cmd->add_option("--format", eval_args.format, "csv | jsonl | auto");
    eval_cmd->add_option("-o,--output", eval_args.output, "report JSON")->required();

    ReportArgs report_args;
    auto* report_cmd =
        app.add_subcommand("report", "multi-round comparison of all models");
    report_cmd->add_option("-i,--input", report_args.input, "labeled dataset")->required();
    report_cmd->add_option("--format", report_args.format, "csv | jsonl | auto");
    report_cmd->add_option("-o,--output", report_args.output, "report JSON")->required();
    report_cmd->add_option("--f1-csv", report_args.f1_csv, "per-round F1 CSV");
    report_cmd->add_option("--rounds", report_args.rounds, "experimental rounds");
    report_cmd->add_option("--seed", report_args.seed, "base RNG seed");
    report_cmd->add_option("--folds", report_args.folds, "stratified fold count");
    report_cmd->add_option("--train-fraction", report_args.train_fraction,
                           "row fraction assigned to the train side");
    report_cmd->add_flag("--paper-mode", report_args.paper_mode,
                         "in-sample threshold calibration");
    report_cmd->add_option("--models", report_args.models,
                           "subset of models to run (default: all)")
        ->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (jobs > 0) set_max_jobs(jobs);
    const auto start = std::chrono::steady_clock::now();

    try {
        if (*synth_cmd) return cmd_synth(synth_args);
        if (*feat_cmd) return cmd_featurize(feat_args);
        if (*train_cmd) return cmd_train(train_args);
        if (*predict_cmd) return cmd_predict(predict_args);
        if (*eval_cmd) {
            json run_config = {{"subcommand", "evaluate"},
                               {"model", eval_args.model},
                               {"input", eval_args.input},
                               {"format", eval_args.format},
                               {"output", eval_args.output},
                               {"jobs", jobs}};
            return cmd_evaluate(eval_args, run_config, start);
        }
        if (*report_cmd) {
            json run_config = {{"subcommand", "report"},
                               {"input", report_args.input},
                               {"format", report_args.format},
                               {"output", report_args.output},
                               {"rounds", report_args.rounds},
                               {"seed", report_args.seed},
                               {"folds", report_args.folds},
                               {"train_fraction", report_args.train_fraction},
                               {"paper_mode", report_args.paper_mode},
                               {"models", report_args.models},
                               {"jobs", jobs}};
            return cmd_report(report_args, run_config, start);
        }
        std::cerr << "no subcommand given\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace pathwatch
