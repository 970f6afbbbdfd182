#pragma once

// Seeded synthetic traceroute generator with ground-truth route-change
// labels. Each path is a piecewise-stationary latency process: a regime
// holds a Gaussian (mean, jitter) and a Bernoulli loss probability; with
// probability change_rate an observation starts a new regime and is labeled
// 1. A configurable fraction of changes is "subtle" (mean shift below the
// current jitter) so detection stays non-trivial.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pathwatch/ingest.hpp"

namespace pathwatch {

struct SynthConfig {
    int n_paths = 100;
    int obs_per_path = 100;
    double change_rate = 0.02;  // per observation, rows after the first
    std::array<double, 2> latency_shift_range{5.0, 50.0};  // ms
    std::array<double, 2> jitter_range{0.5, 5.0};          // ms std
    double loss_bump = 0.1;       // post-change loss-probability increase
    double probes_mean = 1.44;    // mean probes per traceroute (min 1)
    double subtle_fraction = 0.2; // changes with shift below current jitter
    std::uint64_t seed = 0;
};

void validate(const SynthConfig& config);

struct RegimeInfo {
    std::int64_t start_timestamp = 0;
    double mean = 0;
    double jitter = 0;
    double loss = 0;
    bool subtle = false;
};

struct PathTruth {
    std::string src;
    std::string dst;
    std::vector<std::int64_t> change_timestamps;
    std::vector<RegimeInfo> regimes;
};

struct GroundTruth {
    std::vector<int> labels;  // parallel to the dataset rows
    std::vector<PathTruth> paths;
};

/// Deterministic per seed, including RTT list contents; per-path RNG streams
/// derive from (seed, path index). The first row of a path is always
/// labeled 0.
std::pair<Dataset, GroundTruth> generate(const SynthConfig& config);

struct Benchmark {
    Dataset data;
    GroundTruth truth;
    std::string version;
    SynthConfig config;
};

/// Canonical 500-path x 100-observation benchmark (~2% positives) used by
/// the acceptance suite; the version string pins its exact configuration.
Benchmark benchmark_suite(std::uint64_t seed);

std::string ground_truth_to_json(const GroundTruth& truth, const std::string& version);

}  // namespace pathwatch
