#pragma once

// Reference classifiers trained directly on the engineered features:
// dummy, logistic regression, decision tree, random forest, and k-nearest
// neighbours. They share the model-container format (with a kind tag) and
// the same threshold-calibration path as the ensemble.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pathwatch/features.hpp"
#include "pathwatch/gbdt.hpp"

namespace pathwatch {

enum class BaselineKind { kDummy, kLogistic, kDecisionTree, kRandomForest, kKnn };

std::string to_string(BaselineKind kind);
BaselineKind baseline_kind_from_string(const std::string& name);

struct BaselineParams {
    // logistic regression: full-batch gradient descent on standardized
    // features, L2-regularized, fixed iteration cap and tolerance.
    double logistic_l2 = 1.0;
    int logistic_max_iter = 1000;
    double logistic_tol = 1e-8;

    // decision tree / random forest (histogram Gini splits)
    int tree_max_depth = 8;
    int n_bins = 256;
    int forest_size = 100;
    bool forest_bootstrap = true;
    // features examined per node; <= 0 means round(sqrt(d))
    int forest_mtry = 0;

    int knn_k = 15;

    std::uint64_t seed = 0;
};

struct BaselineModel {
    BaselineKind kind = BaselineKind::kDummy;
    BaselineParams params;
    std::vector<std::string> schema;
    std::uint64_t schema_fp = 0;

    // dummy
    double constant = 0;

    // logistic
    std::vector<double> weights;
    double bias = 0;

    // standardization (logistic, knn)
    std::vector<double> feature_means;
    std::vector<double> feature_stds;

    // tree / forest
    std::vector<Tree> trees;  // leaf value = positive-class fraction

    // knn: standardized training matrix (row-major) and labels
    std::vector<float> train_points;
    std::vector<int> train_labels;
};

BaselineModel fit_baseline(BaselineKind kind, const FeatureMatrix& x,
                           std::span<const int> y, const BaselineParams& params);

std::vector<double> predict_baseline(const BaselineModel& model, const FeatureMatrix& x);

struct TunedBaseline {
    BaselineModel model;       // refit on all rows with the selected params
    double threshold = 0.5;    // F1-best threshold on the holdout predictions
    double holdout_f1 = 0;
};

/// Grid search over each baseline's main hyperparameter on a stratified
/// 75/25 holdout (selected by best-F1 threshold scan), then refit on all
/// rows. Grids: logistic l2 {0.1,1,10}; tree depth {4,8,16}; forest size
/// {50,100,200}; k {5,15,31}.
TunedBaseline tune_baseline(BaselineKind kind, const FeatureMatrix& x,
                            std::span<const int> y, std::uint64_t seed);

std::string serialize_baseline(const BaselineModel& model);
BaselineModel deserialize_baseline(std::string_view bytes);

}  // namespace pathwatch
