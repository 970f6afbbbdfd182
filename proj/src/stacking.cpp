#include "pathwatch/stacking.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "pathwatch/evaluate.hpp"

namespace pathwatch {

FoldAssignment stratified_kfold(std::span<const int> y, int k, std::uint64_t seed) {
    if (k < 2) throw DataError("stratified_kfold: k must be >= 2");
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] != 0 && y[i] != 1) throw DataError("stratified_kfold: labels must be 0/1");
        by_class[y[i]].push_back(i);
    }
    for (int c = 0; c < 2; ++c) {
        if (!by_class[c].empty() && by_class[c].size() < static_cast<std::size_t>(k)) {
            throw TooFewPerClassError("class " + std::to_string(c) + " has " +
                                      std::to_string(by_class[c].size()) +
                                      " rows; need at least " + std::to_string(k));
        }
    }

    FoldAssignment assignment;
    assignment.k = k;
    assignment.seed = seed;
    assignment.fold.assign(y.size(), 0);

    std::mt19937_64 rng(seed);
    // One continuous round-robin across classes keeps fold sizes balanced
    // while preserving the per-class +-1 guarantee.
    std::size_t cursor = 0;
    for (int c = 0; c < 2; ++c) {
        auto indices = by_class[c];
        std::shuffle(indices.begin(), indices.end(), rng);
        for (std::size_t idx : indices) {
            assignment.fold[idx] = static_cast<int>(cursor % static_cast<std::size_t>(k));
            ++cursor;
        }
    }
    return assignment;
}

namespace {

std::vector<std::size_t> rows_in_fold(const FoldAssignment& folds, int f, bool complement) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < folds.fold.size(); ++i) {
        if ((folds.fold[i] == f) != complement) rows.push_back(i);
    }
    return rows;
}

}  // namespace

OofMatrix generate_oof(const std::array<GbdtParams, kNumBaseLearners>& configs,
                       const FeatureMatrix& x, std::span<const int> y,
                       const FoldAssignment& folds) {
    if (x.n_rows != y.size() || x.n_rows != folds.fold.size()) {
        throw DataError("generate_oof: size mismatch");
    }
    OofMatrix oof;
    oof.probs.assign(x.n_rows, {});
    for (auto& models : oof.fold_models) {
        models.resize(static_cast<std::size_t>(folds.k));
    }

    // (learner, fold) tasks are independent; each writes its own model slot
    // and a disjoint slice of the OOF matrix.
    const std::size_t n_tasks =
        static_cast<std::size_t>(kNumBaseLearners) * static_cast<std::size_t>(folds.k);
    parallel_for(n_tasks, [&](std::size_t task) {
        const int m = static_cast<int>(task) / folds.k;
        const int f = static_cast<int>(task) % folds.k;
        auto train_rows = rows_in_fold(folds, f, /*complement=*/true);
        auto heldout_rows = rows_in_fold(folds, f, /*complement=*/false);

        FeatureMatrix x_train = x.select_rows(train_rows);
        std::vector<int> y_train;
        y_train.reserve(train_rows.size());
        for (std::size_t r : train_rows) y_train.push_back(y[r]);

        GbdtParams params = configs[static_cast<std::size_t>(m)];
        params.seed = derive_seed(params.seed, static_cast<std::uint64_t>(f));
        GbdtModel model = fit_gbdt(x_train, y_train, params);

        FeatureMatrix x_heldout = x.select_rows(heldout_rows);
        auto probs = predict_proba(model, x_heldout);
        for (std::size_t i = 0; i < heldout_rows.size(); ++i) {
            oof.probs[heldout_rows[i]][static_cast<std::size_t>(m)] = probs[i];
        }
        oof.fold_models[static_cast<std::size_t>(m)][static_cast<std::size_t>(f)] =
            std::move(model);
    });
    return oof;
}

std::vector<double> fold_average_proba(std::span<const GbdtModel> fold_models,
                                       const FeatureMatrix& x) {
    std::vector<double> mean(x.n_rows, 0.0);
    for (const auto& model : fold_models) {
        auto probs = predict_proba(model, x);
        for (std::size_t i = 0; i < probs.size(); ++i) mean[i] += probs[i];
    }
    for (double& v : mean) v /= static_cast<double>(fold_models.size());
    return mean;
}

std::vector<std::string> default_selected_features() {
    return {"rtt_mean",       "rtt_std",         "rtt_p90",
            "success_rate",   "delta_rtt_mean",  "roll3_mean_rtt_mean"};
}

FeatureMatrix build_meta_features(std::span<const std::array<double, kNumBaseLearners>> probs,
                                  const FeatureMatrix& x,
                                  std::span<const std::string> selected) {
    if (probs.size() != x.n_rows) throw DataError("build_meta_features: size mismatch");
    std::vector<std::size_t> selected_cols;
    for (const auto& name : selected) selected_cols.push_back(x.column(name));
    const std::size_t sr_col = x.column("success_rate");

    FeatureMatrix meta;
    meta.schema = {"p1", "p2", "p3", "p_mean", "p_std", "p_median",
                   "p_absdiff_12", "p_absdiff_13", "p_absdiff_23"};
    for (const auto& name : selected) meta.schema.push_back("psi_" + name);
    meta.schema.insert(meta.schema.end(),
                       {"w_p1_sr", "w_p2_sr", "w_p3_sr", "p1_sq", "p2_sq", "p3_sq"});
    meta.n_rows = x.n_rows;
    meta.labels = x.labels;
    meta.data.assign(meta.n_rows * meta.schema.size(), 0.0);

    const std::size_t width = meta.schema.size();
    parallel_for(x.n_rows, [&](std::size_t i) {
        const auto& p = probs[i];
        double* out = meta.data.data() + i * width;
        double mean = (p[0] + p[1] + p[2]) / 3.0;
        double var = 0;
        for (double v : p) var += (v - mean) * (v - mean);
        var /= 3.0;
        std::array<double, 3> sorted = p;
        std::sort(sorted.begin(), sorted.end());
        *out++ = p[0];
        *out++ = p[1];
        *out++ = p[2];
        *out++ = mean;
        *out++ = std::sqrt(var);
        *out++ = sorted[1];
        *out++ = std::abs(p[0] - p[1]);
        *out++ = std::abs(p[0] - p[2]);
        *out++ = std::abs(p[1] - p[2]);
        for (std::size_t c : selected_cols) *out++ = x.at(i, c);
        double sr = x.at(i, sr_col);
        *out++ = p[0] * sr;
        *out++ = p[1] * sr;
        *out++ = p[2] * sr;
        *out++ = p[0] * p[0];
        *out++ = p[1] * p[1];
        *out++ = p[2] * p[2];
    });
    return meta;
}

double calibrate_threshold_cv(
    const std::function<std::vector<double>(const FeatureMatrix&, std::span<const int>,
                                            const FeatureMatrix&)>& fit_predict,
    const FeatureMatrix& x, std::span<const int> y, int k, std::uint64_t seed,
    double grid_step) {
    FoldAssignment folds = stratified_kfold(y, k, derive_seed(seed, 0x7468726573ull));
    std::vector<double> oof(x.n_rows, 0.0);
    for (int f = 0; f < k; ++f) {
        auto train_rows = rows_in_fold(folds, f, /*complement=*/true);
        auto heldout_rows = rows_in_fold(folds, f, /*complement=*/false);
        FeatureMatrix x_train = x.select_rows(train_rows);
        FeatureMatrix x_heldout = x.select_rows(heldout_rows);
        std::vector<int> y_train;
        for (std::size_t r : train_rows) y_train.push_back(y[r]);
        auto probs = fit_predict(x_train, y_train, x_heldout);
        for (std::size_t i = 0; i < heldout_rows.size(); ++i) {
            oof[heldout_rows[i]] = probs[i];
        }
    }
    return threshold_scan(oof, y, grid_step).threshold;
}

std::array<GbdtParams, kNumBaseLearners> default_base_configs(std::uint64_t seed) {
    GbdtParams a;
    a.n_estimators = 300;
    a.learning_rate = 0.05;
    a.growth = Growth::kLeafWise;
    a.max_leaves = 31;
    a.max_depth = 16;
    a.seed = derive_seed(seed, 1);

    GbdtParams b = a;
    b.growth = Growth::kDepthWise;
    b.max_depth = 6;
    b.max_leaves = 64;
    b.feature_fraction = 0.9;
    b.bagging_fraction = 0.9;
    b.seed = derive_seed(seed, 2);

    GbdtParams c = a;
    c.max_leaves = 63;
    c.bagging_fraction = 0.8;
    c.feature_fraction = 0.8;
    c.seed = derive_seed(seed, 3);

    return {a, b, c};
}

GbdtParams default_meta_params(std::uint64_t seed) {
    GbdtParams meta;
    meta.n_estimators = 200;
    meta.learning_rate = 0.0409;
    meta.max_leaves = 10;
    meta.max_depth = 3;
    meta.feature_fraction = 0.6687;
    meta.bagging_fraction = 0.7547;
    meta.l1 = 0.5019;
    meta.l2 = 0.1471;
    meta.growth = Growth::kLeafWise;
    meta.seed = derive_seed(seed, 4);
    return meta;
}

StackedBundle train_stacked_bundle(const Dataset& dataset,
                                   const FeatureConfig& feature_config,
                                   const std::array<GbdtParams, kNumBaseLearners>& base_params,
                                   const GbdtParams& meta_params, int k,
                                   std::uint64_t seed, ThresholdMode mode) {
    if (!dataset.labeled) throw DataError("train_stacked requires a labeled dataset");

    StackedBundle bundle;
    auto [features, tables] = build_features(dataset, feature_config);
    bundle.train_features = std::move(features);
    std::vector<int> y = bundle.train_features.labels;

    bundle.folds = stratified_kfold(y, k, seed);
    OofMatrix oof = generate_oof(base_params, bundle.train_features, y, bundle.folds);
    bundle.oof = oof.probs;

    StackedModel& model = bundle.model;
    model.feature_config = feature_config;
    model.tables = std::move(tables);
    model.base_params = base_params;
    model.fold_models = std::move(oof.fold_models);
    model.meta_params = meta_params;
    model.selected = default_selected_features();
    model.k = k;
    model.seed = seed;
    model.feature_fp = bundle.train_features.schema_fingerprint();

    FeatureMatrix meta_x = build_meta_features(bundle.oof, bundle.train_features,
                                               model.selected);
    model.meta = fit_gbdt(meta_x, y, meta_params);

    if (mode == ThresholdMode::kOutOfFold) {
        auto fit_predict = [&](const FeatureMatrix& x_train, std::span<const int> y_train,
                               const FeatureMatrix& x_eval) {
            GbdtModel fold_meta = fit_gbdt(x_train, y_train, meta_params);
            return predict_proba(fold_meta, x_eval);
        };
        model.threshold = calibrate_threshold_cv(fit_predict, meta_x, y, k, seed);
    } else {
        auto train_probs = predict_proba(model.meta, meta_x);
        model.threshold = threshold_scan(train_probs, y).threshold;
    }
    return bundle;
}

StackedModel train_stacked(const Dataset& dataset, const FeatureConfig& feature_config,
                           const std::array<GbdtParams, kNumBaseLearners>& base_params,
                           const GbdtParams& meta_params, int k, std::uint64_t seed,
                           ThresholdMode mode) {
    return train_stacked_bundle(dataset, feature_config, base_params, meta_params, k,
                                seed, mode)
        .model;
}

StackedPrediction predict_stacked(const StackedModel& model, const Dataset& dataset) {
    auto features = build_features(dataset, model.feature_config, model.tables).first;
    return predict_stacked_on_features(model, features);
}

StackedPrediction predict_stacked_on_features(const StackedModel& model,
                                              const FeatureMatrix& features) {
    if (features.schema_fingerprint() != model.feature_fp) {
        throw SchemaMismatchError("predict_stacked: feature schema mismatch");
    }

    StackedPrediction prediction;
    prediction.base_probabilities.assign(features.n_rows, {});
    for (int m = 0; m < kNumBaseLearners; ++m) {
        auto probs =
            fold_average_proba(model.fold_models[static_cast<std::size_t>(m)], features);
        for (std::size_t i = 0; i < probs.size(); ++i) {
            prediction.base_probabilities[i][static_cast<std::size_t>(m)] = probs[i];
        }
    }

    FeatureMatrix meta_x =
        build_meta_features(prediction.base_probabilities, features, model.selected);
    prediction.probabilities = predict_proba(model.meta, meta_x);
    prediction.decisions.resize(prediction.probabilities.size());
    for (std::size_t i = 0; i < prediction.probabilities.size(); ++i) {
        prediction.decisions[i] = prediction.probabilities[i] >= model.threshold ? 1 : 0;
    }
    return prediction;
}

SingleGbdtModel train_single(const Dataset& dataset, const FeatureConfig& feature_config,
                             const GbdtParams& params, int k, std::uint64_t seed,
                             ThresholdMode mode) {
    if (!dataset.labeled) throw DataError("train_single requires a labeled dataset");
    SingleGbdtModel model;
    model.feature_config = feature_config;
    model.params = params;
    model.k = k;
    model.seed = seed;

    auto [features, tables] = build_features(dataset, feature_config);
    model.tables = std::move(tables);
    model.feature_fp = features.schema_fingerprint();
    std::vector<int> y = features.labels;

    FoldAssignment folds = stratified_kfold(y, k, seed);
    model.fold_models.resize(static_cast<std::size_t>(k));
    std::vector<double> oof(features.n_rows, 0.0);
    parallel_for(static_cast<std::size_t>(k), [&](std::size_t f) {
        std::vector<std::size_t> train_rows, heldout_rows;
        for (std::size_t i = 0; i < y.size(); ++i) {
            (folds.fold[i] == static_cast<int>(f) ? heldout_rows : train_rows).push_back(i);
        }
        FeatureMatrix x_train = features.select_rows(train_rows);
        std::vector<int> y_train;
        for (std::size_t r : train_rows) y_train.push_back(y[r]);
        GbdtParams fold_params = params;
        fold_params.seed = derive_seed(params.seed, f);
        GbdtModel fitted = fit_gbdt(x_train, y_train, fold_params);
        FeatureMatrix x_heldout = features.select_rows(heldout_rows);
        auto probs = predict_proba(fitted, x_heldout);
        for (std::size_t i = 0; i < heldout_rows.size(); ++i) {
            oof[heldout_rows[i]] = probs[i];
        }
        model.fold_models[f] = std::move(fitted);
    });

    if (mode == ThresholdMode::kOutOfFold) {
        model.threshold = threshold_scan(oof, y).threshold;
    } else {
        auto train_probs = fold_average_proba(model.fold_models, features);
        model.threshold = threshold_scan(train_probs, y).threshold;
    }
    return model;
}

StackedPrediction predict_single(const SingleGbdtModel& model, const Dataset& dataset) {
    auto features = build_features(dataset, model.feature_config, model.tables).first;
    if (features.schema_fingerprint() != model.feature_fp) {
        throw SchemaMismatchError("predict_single: feature schema mismatch");
    }
    StackedPrediction prediction;
    prediction.probabilities = fold_average_proba(model.fold_models, features);
    prediction.decisions.resize(prediction.probabilities.size());
    for (std::size_t i = 0; i < prediction.probabilities.size(); ++i) {
        prediction.decisions[i] = prediction.probabilities[i] >= model.threshold ? 1 : 0;
    }
    return prediction;
}

// ---------------------------------------------------------------------------
// Container serialization (format version 1)
// ---------------------------------------------------------------------------

namespace {

nlohmann::json params_to_json(const GbdtParams& p) {
    return {{"n_estimators", p.n_estimators},
            {"learning_rate", p.learning_rate},
            {"max_leaves", p.max_leaves},
            {"max_depth", p.max_depth},
            {"feature_fraction", p.feature_fraction},
            {"bagging_fraction", p.bagging_fraction},
            {"l1", p.l1},
            {"l2", p.l2},
            {"growth", p.growth == Growth::kLeafWise ? "leaf_wise" : "depth_wise"},
            {"seed", p.seed},
            {"n_bins", p.n_bins}};
}

GbdtParams params_from_json(const nlohmann::json& j) {
    GbdtParams p;
    p.n_estimators = j.at("n_estimators").get<int>();
    p.learning_rate = j.at("learning_rate").get<double>();
    p.max_leaves = j.at("max_leaves").get<int>();
    p.max_depth = j.at("max_depth").get<int>();
    p.feature_fraction = j.at("feature_fraction").get<double>();
    p.bagging_fraction = j.at("bagging_fraction").get<double>();
    p.l1 = j.at("l1").get<double>();
    p.l2 = j.at("l2").get<double>();
    p.growth = j.at("growth").get<std::string>() == "leaf_wise" ? Growth::kLeafWise
                                                                 : Growth::kDepthWise;
    p.seed = j.at("seed").get<std::uint64_t>();
    p.n_bins = j.at("n_bins").get<int>();
    return p;
}

}  // namespace

std::string serialize_stacked(const StackedModel& model) {
    nlohmann::json j;
    j["format"] = "pathwatch-stacked";
    j["version"] = 1;
    j["feature_state"] =
        nlohmann::json::parse(serialize_feature_state(model.feature_config, model.tables));
    nlohmann::json base = nlohmann::json::array();
    for (const auto& p : model.base_params) base.push_back(params_to_json(p));
    j["base_params"] = std::move(base);
    nlohmann::json fold_models = nlohmann::json::array();
    for (const auto& models : model.fold_models) {
        nlohmann::json per_learner = nlohmann::json::array();
        for (const auto& m : models) {
            per_learner.push_back(nlohmann::json::parse(serialize_model(m)));
        }
        fold_models.push_back(std::move(per_learner));
    }
    j["fold_models"] = std::move(fold_models);
    j["meta_params"] = params_to_json(model.meta_params);
    j["meta"] = nlohmann::json::parse(serialize_model(model.meta));
    j["selected"] = model.selected;
    j["threshold"] = model.threshold;
    j["k"] = model.k;
    j["seed"] = model.seed;
    j["feature_fp"] = model.feature_fp;
    return j.dump();
}

StackedModel deserialize_stacked(std::string_view bytes) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(bytes);
    } catch (const nlohmann::json::exception& e) {
        throw CorruptEncodingError(std::string("stacked container: ") + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != "pathwatch-stacked") {
            throw CorruptEncodingError("not a stacked model container");
        }
        if (j.at("version").get<int>() != 1) {
            throw VersionMismatchError("unsupported stacked container version");
        }
        StackedModel model;
        auto [config, tables] = deserialize_feature_state(j.at("feature_state").dump());
        model.feature_config = std::move(config);
        model.tables = std::move(tables);
        const auto& base = j.at("base_params");
        if (base.size() != kNumBaseLearners) throw CorruptEncodingError("bad base_params");
        for (std::size_t m = 0; m < kNumBaseLearners; ++m) {
            model.base_params[m] = params_from_json(base[m]);
        }
        const auto& folds = j.at("fold_models");
        if (folds.size() != kNumBaseLearners) throw CorruptEncodingError("bad fold_models");
        for (std::size_t m = 0; m < kNumBaseLearners; ++m) {
            for (const auto& encoded : folds[m]) {
                model.fold_models[m].push_back(deserialize_model(encoded.dump()));
            }
        }
        model.meta_params = params_from_json(j.at("meta_params"));
        model.meta = deserialize_model(j.at("meta").dump());
        model.selected = j.at("selected").get<std::vector<std::string>>();
        model.threshold = j.at("threshold").get<double>();
        model.k = j.at("k").get<int>();
        model.seed = j.at("seed").get<std::uint64_t>();
        model.feature_fp = j.at("feature_fp").get<std::uint64_t>();
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw CorruptEncodingError(std::string("stacked container: ") + e.what());
    }
}

std::string serialize_single(const SingleGbdtModel& model) {
    nlohmann::json j;
    j["format"] = "pathwatch-single";
    j["version"] = 1;
    j["feature_state"] =
        nlohmann::json::parse(serialize_feature_state(model.feature_config, model.tables));
    j["params"] = params_to_json(model.params);
    nlohmann::json fold_models = nlohmann::json::array();
    for (const auto& m : model.fold_models) {
        fold_models.push_back(nlohmann::json::parse(serialize_model(m)));
    }
    j["fold_models"] = std::move(fold_models);
    j["threshold"] = model.threshold;
    j["k"] = model.k;
    j["seed"] = model.seed;
    j["feature_fp"] = model.feature_fp;
    return j.dump();
}

SingleGbdtModel deserialize_single(std::string_view bytes) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(bytes);
    } catch (const nlohmann::json::exception& e) {
        throw CorruptEncodingError(std::string("single container: ") + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != "pathwatch-single") {
            throw CorruptEncodingError("not a single-learner container");
        }
        if (j.at("version").get<int>() != 1) {
            throw VersionMismatchError("unsupported single container version");
        }
        SingleGbdtModel model;
        auto [config, tables] = deserialize_feature_state(j.at("feature_state").dump());
        model.feature_config = std::move(config);
        model.tables = std::move(tables);
        model.params = params_from_json(j.at("params"));
        for (const auto& encoded : j.at("fold_models")) {
            model.fold_models.push_back(deserialize_model(encoded.dump()));
        }
        model.threshold = j.at("threshold").get<double>();
        model.k = j.at("k").get<int>();
        model.seed = j.at("seed").get<std::uint64_t>();
        model.feature_fp = j.at("feature_fp").get<std::uint64_t>();
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw CorruptEncodingError(std::string("single container: ") + e.what());
    }
}

}  // namespace pathwatch
