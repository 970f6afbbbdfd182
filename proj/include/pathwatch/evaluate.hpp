#pragma once

// Threshold calibration, classification metrics, and the Wilcoxon
// signed-rank test. The multi-round experiment runner for this module lives
// in runner.hpp.

#include <cstdint>
#include <span>
#include <vector>

#include "pathwatch/common.hpp"

namespace pathwatch {

struct ConfusionCounts {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t tn = 0;
    std::int64_t fn = 0;
};

struct Metrics {
    ConfusionCounts counts;
    double precision = 0;
    double recall = 0;
    double f1 = 0;
    double accuracy = 0;
};

Metrics classification_metrics(std::span<const int> decisions, std::span<const int> y);

/// F1 of probabilities thresholded at tau (decision rule p >= tau).
double f1_at_threshold(std::span<const double> probs, std::span<const int> y, double tau);

struct ThresholdScanResult {
    double threshold = 0.5;
    double f1 = 0;
};

/// Scans tau over {0, step, 2*step, ..., 1} and returns the F1-maximizing
/// threshold (smallest tau on ties). Requires both classes in y.
ThresholdScanResult threshold_scan(std::span<const double> probs,
                                   std::span<const int> y, double grid_step = 0.001);

struct WilcoxonResult {
    double statistic = 0;  // min of the signed-rank sums
    double p_value = 1;    // two-sided
    int n = 0;             // pairs remaining after dropping zero differences
    bool exact = false;    // exact distribution (n <= 25) vs normal approximation
};

/// Paired two-sided Wilcoxon signed-rank test. Zero differences are dropped;
/// ties get average ranks. Exact distribution for n <= 25, normal
/// approximation with tie and continuity corrections beyond. Throws
/// AllZeroDifferencesError when no nonzero differences remain and
/// DataError when fewer than 5 remain.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

}  // namespace pathwatch
