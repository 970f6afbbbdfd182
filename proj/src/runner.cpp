#include "pathwatch/runner.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace pathwatch {

std::vector<std::string> all_model_names() {
    return {"stacked",       "base_a", "base_b",        "base_c", "logistic",
            "decision_tree", "random_forest", "knn",    "dummy"};
}

double median(std::vector<double> values) {
    if (values.empty()) throw EmptyInputError("median of empty set");
    std::sort(values.begin(), values.end());
    std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double interquartile_range(std::vector<double> values) {
    if (values.empty()) throw EmptyInputError("iqr of empty set");
    std::sort(values.begin(), values.end());
    auto interp = [&](double rank) {
        double pos = rank * static_cast<double>(values.size() - 1);
        auto lo = static_cast<std::size_t>(std::floor(pos));
        auto hi = static_cast<std::size_t>(std::ceil(pos));
        return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
    };
    return interp(0.75) - interp(0.25);
}

namespace {

ModelRoundResult evaluate_probs(std::span<const double> probs, std::span<const int> y,
                                double threshold) {
    std::vector<int> decisions(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
        decisions[i] = probs[i] >= threshold ? 1 : 0;
    }
    return {classification_metrics(decisions, y), threshold};
}

bool wants(const std::vector<std::string>& selected, const std::string& name) {
    return selected.empty() ||
           std::find(selected.begin(), selected.end(), name) != selected.end();
}

}  // namespace

EvaluationReport run_rounds(const Dataset& dataset, const RoundsConfig& config) {
    if (config.rounds < 2) throw DataError("run_rounds needs at least 2 rounds");
    if (!dataset.labeled) throw DataError("run_rounds requires a labeled dataset");

    EvaluationReport report;
    for (const auto& name : all_model_names()) {
        if (wants(config.models, name)) report.model_names.push_back(name);
    }
    if (report.model_names.empty()) throw DataError("no models selected");

    const bool stacked_needed =
        wants(config.models, "stacked") || wants(config.models, "base_a") ||
        wants(config.models, "base_b") || wants(config.models, "base_c");

    for (int r = 0; r < config.rounds; ++r) {
        const std::uint64_t seed = config.base_seed + static_cast<std::uint64_t>(r);
        RoundReport round;
        round.round = r;
        round.seed = seed;

        auto [train, test] = split(dataset, config.train_fraction, seed);
        const std::vector<int> y_test = test.labels();

        FeatureMatrix x_train, x_test;
        std::vector<int> y_train;

        if (stacked_needed) {
            auto bundle = train_stacked_bundle(
                train, config.feature_config, default_base_configs(seed),
                default_meta_params(seed), config.folds, seed, config.threshold_mode);
            x_train = std::move(bundle.train_features);
            y_train = x_train.labels;
            x_test = build_features(test, config.feature_config, bundle.model.tables).first;

            if (wants(config.models, "stacked")) {
                auto prediction = predict_stacked_on_features(bundle.model, x_test);
                round.models["stacked"] =
                    evaluate_probs(prediction.probabilities, y_test, bundle.model.threshold);
            }

            const char* base_names[] = {"base_a", "base_b", "base_c"};
            for (int m = 0; m < kNumBaseLearners; ++m) {
                if (!wants(config.models, base_names[m])) continue;
                // Honest threshold from this learner's out-of-fold column;
                // test scores from the averaged fold models.
                std::vector<double> oof_col(x_train.n_rows);
                for (std::size_t i = 0; i < x_train.n_rows; ++i) {
                    oof_col[i] = bundle.oof[i][static_cast<std::size_t>(m)];
                }
                double tau;
                if (config.threshold_mode == ThresholdMode::kOutOfFold) {
                    tau = threshold_scan(oof_col, y_train).threshold;
                } else {
                    auto train_probs = fold_average_proba(
                        bundle.model.fold_models[static_cast<std::size_t>(m)], x_train);
                    tau = threshold_scan(train_probs, y_train).threshold;
                }
                auto probs = fold_average_proba(
                    bundle.model.fold_models[static_cast<std::size_t>(m)], x_test);
                round.models[base_names[m]] = evaluate_probs(probs, y_test, tau);
            }
        } else {
            auto built = build_features(train, config.feature_config);
            x_train = std::move(built.first);
            y_train = x_train.labels;
            x_test = build_features(test, config.feature_config, built.second).first;
        }

        const std::pair<const char*, BaselineKind> baseline_specs[] = {
            {"logistic", BaselineKind::kLogistic},
            {"decision_tree", BaselineKind::kDecisionTree},
            {"random_forest", BaselineKind::kRandomForest},
            {"knn", BaselineKind::kKnn},
            {"dummy", BaselineKind::kDummy},
        };
        for (const auto& [name, kind] : baseline_specs) {
            if (!wants(config.models, name)) continue;
            auto tuned = tune_baseline(kind, x_train, y_train, seed);
            double tau = tuned.threshold;
            if (config.threshold_mode == ThresholdMode::kInSample &&
                kind != BaselineKind::kDummy) {
                auto train_probs = predict_baseline(tuned.model, x_train);
                tau = threshold_scan(train_probs, y_train).threshold;
            }
            auto probs = predict_baseline(tuned.model, x_test);
            round.models[name] = evaluate_probs(probs, y_test, tau);
        }
        report.rounds.push_back(std::move(round));
    }

    // Summaries.
    for (const auto& name : report.model_names) {
        ModelSummary summary;
        for (const auto& round : report.rounds) {
            summary.f1_per_round.push_back(round.models.at(name).metrics.f1);
        }
        summary.median_f1 = median(summary.f1_per_round);
        summary.iqr_f1 = interquartile_range(summary.f1_per_round);
        double sum = 0;
        for (double f1 : summary.f1_per_round) sum += f1;
        summary.mean_f1 = sum / static_cast<double>(summary.f1_per_round.size());
        report.summary[name] = std::move(summary);
    }
    for (const auto& round : report.rounds) {
        for (const auto& name : report.model_names) {
            double own = round.models.at(name).metrics.f1;
            bool first = true;
            for (const auto& other : report.model_names) {
                if (round.models.at(other).metrics.f1 > own) {
                    first = false;
                    break;
                }
            }
            if (first) report.summary[name].first_place_rounds++;
        }
    }

    // Pairwise Wilcoxon tests over per-round F1 values.
    for (std::size_t a = 0; a < report.model_names.size(); ++a) {
        for (std::size_t b = a + 1; b < report.model_names.size(); ++b) {
            PairwiseWilcoxon pair;
            pair.model_a = report.model_names[a];
            pair.model_b = report.model_names[b];
            try {
                pair.result = wilcoxon_signed_rank(report.summary[pair.model_a].f1_per_round,
                                                   report.summary[pair.model_b].f1_per_round);
            } catch (const DataError& e) {
                pair.note = e.what();
            }
            report.pairwise.push_back(std::move(pair));
        }
    }
    return report;
}

SingleEvaluation evaluate_stacked(const StackedModel& model, const Dataset& dataset) {
    if (!dataset.labeled) throw DataError("evaluation requires a labeled dataset");
    auto features = build_features(dataset, model.feature_config, model.tables).first;
    const std::vector<int> y = dataset.labels();

    SingleEvaluation evaluation;
    auto prediction = predict_stacked_on_features(model, features);
    evaluation.models["stacked"] =
        evaluate_probs(prediction.probabilities, y, model.threshold);

    const char* base_names[] = {"base_a", "base_b", "base_c"};
    for (int m = 0; m < kNumBaseLearners; ++m) {
        auto probs =
            fold_average_proba(model.fold_models[static_cast<std::size_t>(m)], features);
        evaluation.models[base_names[m]] = evaluate_probs(probs, y, 0.5);
    }
    return evaluation;
}

std::string report_to_json(const EvaluationReport& report) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["models"] = report.model_names;
    nlohmann::json rounds = nlohmann::json::array();
    for (const auto& round : report.rounds) {
        nlohmann::json entry;
        entry["round"] = round.round;
        entry["seed"] = round.seed;
        nlohmann::json models = nlohmann::json::object();
        for (const auto& [name, result] : round.models) {
            models[name] = {{"f1", result.metrics.f1},
                            {"precision", result.metrics.precision},
                            {"recall", result.metrics.recall},
                            {"accuracy", result.metrics.accuracy},
                            {"threshold", result.threshold},
                            {"tp", result.metrics.counts.tp},
                            {"fp", result.metrics.counts.fp},
                            {"tn", result.metrics.counts.tn},
                            {"fn", result.metrics.counts.fn}};
        }
        entry["models"] = std::move(models);
        rounds.push_back(std::move(entry));
    }
    j["rounds"] = std::move(rounds);
    nlohmann::json summary = nlohmann::json::object();
    for (const auto& [name, s] : report.summary) {
        summary[name] = {{"f1_per_round", s.f1_per_round},
                         {"median_f1", s.median_f1},
                         {"iqr_f1", s.iqr_f1},
                         {"mean_f1", s.mean_f1},
                         {"first_place_rounds", s.first_place_rounds}};
    }
    j["summary"] = std::move(summary);
    nlohmann::json pairwise = nlohmann::json::array();
    for (const auto& pair : report.pairwise) {
        nlohmann::json entry;
        entry["a"] = pair.model_a;
        entry["b"] = pair.model_b;
        if (pair.result) {
            entry["statistic"] = pair.result->statistic;
            entry["p_value"] = pair.result->p_value;
            entry["n"] = pair.result->n;
            entry["exact"] = pair.result->exact;
        } else {
            entry["note"] = pair.note;
        }
        pairwise.push_back(std::move(entry));
    }
    j["pairwise_wilcoxon"] = std::move(pairwise);
    return j.dump(2);
}

}  // namespace pathwatch
