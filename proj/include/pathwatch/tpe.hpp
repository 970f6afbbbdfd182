#pragma once

// Tree-structured Parzen Estimator over box-constrained spaces with optional
// quantized parameters, maximizing a scalar objective. Trials below the
// gamma-quantile form the "bad" density g(x), the rest the "good" density
// l(x); candidates are drawn from l and ranked by l(x)/g(x).

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pathwatch/common.hpp"

namespace pathwatch {

struct ParamSpec {
    std::string name;
    enum class Kind { kUniform, kQuantized } kind = Kind::kUniform;
    double lo = 0;
    double hi = 1;
    double step = 0;  // quantized only; must divide (hi - lo)
};

struct SearchSpace {
    std::vector<ParamSpec> params;

    void validate() const;
    /// Snap a raw value onto the parameter's grid (and clamp into bounds).
    double snap(std::size_t param, double value) const;
    bool contains(const std::vector<double>& point) const;
};

struct Trial {
    std::vector<double> point;
    double value = 0;
    bool ok = true;  // false when the objective failed
};

struct TrialHistory {
    std::vector<Trial> trials;
    std::uint64_t seed = 0;
    std::string rng_state;  // serialized engine state, for resumption

    const Trial* best() const;  // highest successful value, nullptr if none
};

struct TpeOptions {
    double gamma = 0.25;     // good-quantile
    int n_startup = 20;      // random trials before the model kicks in
    int n_candidates = 24;   // draws from l(x) per suggestion
};

/// Propose the next point to evaluate given the history so far.
std::vector<double> suggest(const TrialHistory& history, const SearchSpace& space,
                            std::mt19937_64& rng, const TpeOptions& options = {});

struct OptimizeResult {
    std::vector<double> best_point;
    double best_value = 0;
    TrialHistory history;
};

/// Sequential suggest/evaluate loop. Objective failures (exceptions) are
/// recorded as failed trials and optimization continues; throws if every
/// trial failed.
OptimizeResult optimize(const std::function<double(const std::vector<double>&)>& objective,
                        const SearchSpace& space, int n_trials, std::uint64_t seed,
                        const TpeOptions& options = {});

/// Continue a (possibly resumed) history until it holds n_trials trials.
OptimizeResult optimize_from(
    const std::function<double(const std::vector<double>&)>& objective,
    const SearchSpace& space, int n_trials, TrialHistory history,
    const TpeOptions& options = {});

/// The meta-model search space: eight parameters with their ranges and
/// quantization steps (trees 100..5000 step 100, learning rate 0.001..0.05,
/// leaves 10..80 step 2, depth 3..10 step 1, feature/bagging fractions
/// 0.6..0.9, l1/l2 0.1..10).
SearchSpace meta_search_space();

// JSONL persistence: one trial per line plus a trailing RNG-state line so
// interrupted searches can resume exactly.
std::string history_to_jsonl(const TrialHistory& history);
TrialHistory history_from_jsonl(std::string_view text);

}  // namespace pathwatch
