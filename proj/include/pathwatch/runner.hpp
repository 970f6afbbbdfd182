#pragma once

// Multi-round experiment runner: repeated path-grouped splits, full retrains
// of the stacked model and every comparison model, per-round metrics, and
// pairwise Wilcoxon significance tests over the per-round F1 values.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pathwatch/baselines.hpp"
#include "pathwatch/evaluate.hpp"
#include "pathwatch/stacking.hpp"

namespace pathwatch {

/// Comparison models evaluated each round. "base_a/b/c" reuse the stacked
/// run's fold models (out-of-fold threshold, fold-averaged test scores), so
/// they cost nothing extra; baselines are grid-tuned per round with their
/// holdout-calibrated thresholds.
std::vector<std::string> all_model_names();

struct RoundsConfig {
    int rounds = 10;
    std::uint64_t base_seed = 0;
    double train_fraction = 0.7;
    int folds = 5;
    ThresholdMode threshold_mode = ThresholdMode::kOutOfFold;
    FeatureConfig feature_config;
    std::vector<std::string> models;  // empty = all_model_names()
};

struct ModelRoundResult {
    Metrics metrics;
    double threshold = 0.5;
};

struct RoundReport {
    int round = 0;
    std::uint64_t seed = 0;
    std::map<std::string, ModelRoundResult> models;
};

struct ModelSummary {
    std::vector<double> f1_per_round;
    double median_f1 = 0;
    double iqr_f1 = 0;
    double mean_f1 = 0;
    int first_place_rounds = 0;  // rounds where no model scored strictly higher
};

struct PairwiseWilcoxon {
    std::string model_a;
    std::string model_b;
    std::optional<WilcoxonResult> result;  // empty when the test is undefined
    std::string note;                      // reason when empty
};

struct EvaluationReport {
    std::vector<std::string> model_names;
    std::vector<RoundReport> rounds;
    std::map<std::string, ModelSummary> summary;
    std::vector<PairwiseWilcoxon> pairwise;
};

EvaluationReport run_rounds(const Dataset& dataset, const RoundsConfig& config);

/// Evaluation of one trained stacked model on a labeled dataset: metrics for
/// the full ensemble plus each base learner (fold-averaged, threshold 0.5
/// reported alongside the calibrated one).
struct SingleEvaluation {
    std::map<std::string, ModelRoundResult> models;
};
SingleEvaluation evaluate_stacked(const StackedModel& model, const Dataset& dataset);

double median(std::vector<double> values);
double interquartile_range(std::vector<double> values);

std::string report_to_json(const EvaluationReport& report);

}  // namespace pathwatch
