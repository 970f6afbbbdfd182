#include "pathwatch/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

namespace pathwatch {

void validate(const SynthConfig& config) {
    if (config.n_paths < 1 || config.obs_per_path < 1) {
        throw InvalidConfigError("synth: need at least one path and observation");
    }
    if (!(config.change_rate >= 0 && config.change_rate < 1)) {
        throw InvalidConfigError("synth: change_rate must lie in [0,1)");
    }
    if (!(config.latency_shift_range[0] > 0 &&
          config.latency_shift_range[0] <= config.latency_shift_range[1])) {
        throw InvalidConfigError("synth: bad latency_shift_range");
    }
    if (!(config.jitter_range[0] > 0 && config.jitter_range[0] <= config.jitter_range[1])) {
        throw InvalidConfigError("synth: bad jitter_range");
    }
    if (!(config.loss_bump >= 0 && config.loss_bump < 1)) {
        throw InvalidConfigError("synth: loss_bump must lie in [0,1)");
    }
    if (config.probes_mean < 1.0) {
        throw InvalidConfigError("synth: probes_mean must be >= 1");
    }
    if (!(config.subtle_fraction >= 0 && config.subtle_fraction <= 1)) {
        throw InvalidConfigError("synth: subtle_fraction must lie in [0,1]");
    }
}

namespace {

struct Regime {
    double mean = 20;
    double jitter = 1;
    double loss = 0.01;
};

Regime draw_base_regime(std::mt19937_64& rng, const SynthConfig& config) {
    Regime regime;
    regime.mean = std::uniform_real_distribution<double>(10.0, 100.0)(rng);
    regime.jitter = std::uniform_real_distribution<double>(config.jitter_range[0],
                                                           config.jitter_range[1])(rng);
    regime.loss = std::uniform_real_distribution<double>(0.0, 0.05)(rng);
    return regime;
}

}  // namespace

std::pair<Dataset, GroundTruth> generate(const SynthConfig& config) {
    validate(config);
    std::vector<TracerouteRecord> records;
    records.reserve(static_cast<std::size_t>(config.n_paths) *
                    static_cast<std::size_t>(config.obs_per_path));
    GroundTruth truth;
    truth.labels.reserve(records.capacity());
    truth.paths.resize(static_cast<std::size_t>(config.n_paths));

    // Several paths share a source so per-source aggregates carry signal.
    const int n_sources = std::max(1, config.n_paths / 8);

    for (int p = 0; p < config.n_paths; ++p) {
        std::mt19937_64 rng(derive_seed(config.seed, static_cast<std::uint64_t>(p)));
        PathTruth& path = truth.paths[static_cast<std::size_t>(p)];
        path.src = "host-" + std::to_string(p % n_sources);
        path.dst = "dest-" + std::to_string(p);

        std::int64_t ts = 1600000000 + 7919LL * p;
        Regime regime = draw_base_regime(rng, config);
        path.regimes.push_back({ts, regime.mean, regime.jitter, regime.loss, false});

        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (int i = 0; i < config.obs_per_path; ++i) {
            int label = 0;
            if (i > 0 && unit(rng) < config.change_rate) {
                label = 1;
                const bool subtle = unit(rng) < config.subtle_fraction;
                double sign = unit(rng) < 0.5 ? -1.0 : 1.0;
                double shift;
                if (subtle) {
                    shift = std::uniform_real_distribution<double>(0.2, 0.8)(rng) *
                            regime.jitter;
                } else {
                    shift = std::uniform_real_distribution<double>(
                        config.latency_shift_range[0], config.latency_shift_range[1])(rng);
                }
                regime.mean = std::max(1.0, regime.mean + sign * shift);
                regime.jitter = std::uniform_real_distribution<double>(
                    config.jitter_range[0], config.jitter_range[1])(rng);
                regime.loss = std::uniform_real_distribution<double>(0.0, 0.05)(rng);
                if (!subtle) regime.loss = std::min(0.95, regime.loss + config.loss_bump);
                path.change_timestamps.push_back(ts);
                path.regimes.push_back({ts, regime.mean, regime.jitter, regime.loss, subtle});
            }

            TracerouteRecord rec;
            rec.src = path.src;
            rec.dst = path.dst;
            rec.timestamp = ts;
            int probes = 1 + std::poisson_distribution<int>(config.probes_mean - 1.0)(rng);
            rec.probes_sent = probes;
            std::normal_distribution<double> rtt_dist(regime.mean, regime.jitter);
            for (int probe = 0; probe < probes; ++probe) {
                if (unit(rng) < regime.loss) continue;  // lost probe
                rec.rtts.push_back(std::max(0.05, rtt_dist(rng)));
            }
            rec.replies_last_hop = static_cast<std::int64_t>(rec.rtts.size());
            rec.label = label;
            records.push_back(std::move(rec));
            truth.labels.push_back(label);

            ts += std::uniform_int_distribution<std::int64_t>(30, 300)(rng);
        }
    }
    return {make_dataset(std::move(records)), std::move(truth)};
}

Benchmark benchmark_suite(std::uint64_t seed) {
    Benchmark bench;
    bench.version = "synthetic-benchmark-v1";
    bench.config.n_paths = 500;
    bench.config.obs_per_path = 100;
    bench.config.change_rate = 0.02;
    bench.config.seed = seed;
    auto [data, truth] = generate(bench.config);
    bench.data = std::move(data);
    bench.truth = std::move(truth);
    return bench;
}

std::string ground_truth_to_json(const GroundTruth& truth, const std::string& version) {
    nlohmann::json j;
    j["version"] = version;
    j["labels"] = truth.labels;
    nlohmann::json paths = nlohmann::json::array();
    for (const auto& path : truth.paths) {
        nlohmann::json regimes = nlohmann::json::array();
        for (const auto& regime : path.regimes) {
            regimes.push_back({{"start_timestamp", regime.start_timestamp},
                               {"mean", regime.mean},
                               {"jitter", regime.jitter},
                               {"loss", regime.loss},
                               {"subtle", regime.subtle}});
        }
        paths.push_back({{"src", path.src},
                         {"dst", path.dst},
                         {"change_timestamps", path.change_timestamps},
                         {"regimes", std::move(regimes)}});
    }
    j["paths"] = std::move(paths);
    return j.dump();
}

}  // namespace pathwatch
