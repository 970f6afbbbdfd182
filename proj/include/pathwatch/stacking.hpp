#pragma once

// Stratified K-fold out-of-fold prediction generation, meta-feature
// construction, and the stacked model (three diversified GBDT base learners
// plus a GBDT meta-model with a calibrated decision threshold).

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pathwatch/features.hpp"
#include "pathwatch/gbdt.hpp"

namespace pathwatch {

inline constexpr int kNumBaseLearners = 3;

struct FoldAssignment {
    std::vector<int> fold;  // fold index per row, 0..k-1
    int k = 5;
    std::uint64_t seed = 0;
};

/// Class-wise round-robin assignment after a seeded shuffle; the fold cursor
/// carries across classes so fold sizes stay balanced. Per-fold counts of
/// each class differ by at most one. Requires every class to have at least
/// k members.
FoldAssignment stratified_kfold(std::span<const int> y, int k, std::uint64_t seed);

struct OofMatrix {
    // Out-of-fold probability per row and base learner.
    std::vector<std::array<double, kNumBaseLearners>> probs;
    // Fold models retained for test-time averaging: fold_models[m][f] was
    // trained on every row outside fold f.
    std::array<std::vector<GbdtModel>, kNumBaseLearners> fold_models;
};

OofMatrix generate_oof(const std::array<GbdtParams, kNumBaseLearners>& configs,
                       const FeatureMatrix& x, std::span<const int> y,
                       const FoldAssignment& folds);

/// Average of the K fold models' probabilities (the test-time base score).
std::vector<double> fold_average_proba(std::span<const GbdtModel> fold_models,
                                       const FeatureMatrix& x);

/// Original-feature columns fed to the meta-model alongside the base
/// predictions.
std::vector<std::string> default_selected_features();

/// Meta-feature vector per row:
///   [p1, p2, p3,
///    mean(p), std(p), median(p), |p1-p2|, |p1-p3|, |p2-p3|,
///    selected original columns...,
///    p1*sr, p2*sr, p3*sr, p1^2, p2^2, p3^2]   (sr = success_rate)
FeatureMatrix build_meta_features(std::span<const std::array<double, kNumBaseLearners>> probs,
                                  const FeatureMatrix& x,
                                  std::span<const std::string> selected);

enum class ThresholdMode {
    kOutOfFold,  // scan on K-fold out-of-fold probabilities (honest default)
    kInSample,   // scan on the final model's training probabilities
};

/// Generic K-fold threshold calibration: fits a model per fold through
/// `fit_predict` (train rows, train labels, eval rows -> probabilities),
/// pools the out-of-fold probabilities, and scans for the F1-best threshold.
double calibrate_threshold_cv(
    const std::function<std::vector<double>(const FeatureMatrix&, std::span<const int>,
                                            const FeatureMatrix&)>& fit_predict,
    const FeatureMatrix& x, std::span<const int> y, int k, std::uint64_t seed,
    double grid_step = 0.001);

struct StackedModel {
    FeatureConfig feature_config;
    AggregateTables tables;
    std::array<GbdtParams, kNumBaseLearners> base_params;
    std::array<std::vector<GbdtModel>, kNumBaseLearners> fold_models;
    GbdtParams meta_params;
    GbdtModel meta;
    std::vector<std::string> selected;
    double threshold = 0.5;
    int k = 5;
    std::uint64_t seed = 0;
    std::uint64_t feature_fp = 0;  // engineered-feature schema fingerprint
};

/// The three diversified base-learner configurations (growth strategy,
/// leaf/depth caps, subsampling, seeds).
std::array<GbdtParams, kNumBaseLearners> default_base_configs(std::uint64_t seed);

/// Meta-model defaults (searched optimum; see tpe::meta_search_space).
GbdtParams default_meta_params(std::uint64_t seed);

/// Full training pipeline: features -> stratified OOF -> meta-features ->
/// threshold calibration -> final meta fit on all rows.
StackedModel train_stacked(const Dataset& dataset, const FeatureConfig& feature_config,
                           const std::array<GbdtParams, kNumBaseLearners>& base_params,
                           const GbdtParams& meta_params, int k, std::uint64_t seed,
                           ThresholdMode mode = ThresholdMode::kOutOfFold);

/// Everything train_stacked computed along the way; lets callers reuse the
/// engineered matrix and OOF probabilities without refitting.
struct StackedBundle {
    StackedModel model;
    FeatureMatrix train_features;
    std::vector<std::array<double, kNumBaseLearners>> oof;
    FoldAssignment folds;
};

StackedBundle train_stacked_bundle(const Dataset& dataset,
                                   const FeatureConfig& feature_config,
                                   const std::array<GbdtParams, kNumBaseLearners>& base_params,
                                   const GbdtParams& meta_params, int k,
                                   std::uint64_t seed, ThresholdMode mode);

struct StackedPrediction {
    std::vector<double> probabilities;
    std::vector<int> decisions;  // 1 iff probability >= threshold
    // Per-learner fold-averaged base probabilities (diagnostics).
    std::vector<std::array<double, kNumBaseLearners>> base_probabilities;
};

StackedPrediction predict_stacked(const StackedModel& model, const Dataset& dataset);

/// Same as predict_stacked but on an already-engineered matrix (must match
/// the model's feature schema).
StackedPrediction predict_stacked_on_features(const StackedModel& model,
                                              const FeatureMatrix& features);

// Single-file container bundling feature state, fold models, meta-model and
// threshold (format version 1).
std::string serialize_stacked(const StackedModel& model);
StackedModel deserialize_stacked(std::string_view bytes);

/// One base learner trained the same way the ensemble consumes it: K fold
/// models with out-of-fold threshold calibration and fold-averaged scoring.
struct SingleGbdtModel {
    FeatureConfig feature_config;
    AggregateTables tables;
    GbdtParams params;
    std::vector<GbdtModel> fold_models;
    double threshold = 0.5;
    int k = 5;
    std::uint64_t seed = 0;
    std::uint64_t feature_fp = 0;
};

SingleGbdtModel train_single(const Dataset& dataset, const FeatureConfig& feature_config,
                             const GbdtParams& params, int k, std::uint64_t seed,
                             ThresholdMode mode = ThresholdMode::kOutOfFold);

StackedPrediction predict_single(const SingleGbdtModel& model, const Dataset& dataset);

std::string serialize_single(const SingleGbdtModel& model);
SingleGbdtModel deserialize_single(std::string_view bytes);

}  // namespace pathwatch
