#include <doctest.h>

#include <cmath>
#include <map>

#include "pathwatch/synth.hpp"

using namespace pathwatch;

TEST_CASE("positive count stays inside the binomial band") {
    SynthConfig cfg;
    cfg.n_paths = 100;
    cfg.obs_per_path = 100;
    cfg.change_rate = 0.02;
    cfg.seed = 123;
    auto [data, truth] = generate(cfg);
    REQUIRE(data.size() == 10000);
    int positives = 0;
    for (int label : truth.labels) positives += label;
    // 99 eligible rows per path; mean 198, sd ~13.9, 3-sigma band.
    CHECK(positives >= 198 - 42);
    CHECK(positives <= 198 + 42);
}

TEST_CASE("zero change rate produces an all-stable dataset") {
    SynthConfig cfg;
    cfg.n_paths = 20;
    cfg.obs_per_path = 30;
    cfg.change_rate = 0.0;
    cfg.seed = 4;
    auto [data, truth] = generate(cfg);
    for (int label : truth.labels) CHECK(label == 0);
}

TEST_CASE("generation is deterministic per seed including rtt contents") {
    SynthConfig cfg;
    cfg.n_paths = 15;
    cfg.obs_per_path = 20;
    cfg.seed = 9;
    auto [d1, t1] = generate(cfg);
    auto [d2, t2] = generate(cfg);
    CHECK(d1.records == d2.records);
    CHECK(to_csv(d1) == to_csv(d2));
    cfg.seed = 10;
    auto [d3, t3] = generate(cfg);
    CHECK(d1.records != d3.records);
}

TEST_CASE("first observation of every path is stable") {
    SynthConfig cfg;
    cfg.n_paths = 50;
    cfg.obs_per_path = 10;
    cfg.change_rate = 0.3;  // aggressive, to exercise the exclusion
    cfg.seed = 77;
    auto [data, truth] = generate(cfg);
    std::map<std::string, bool> seen;
    for (std::size_t i = 0; i < data.records.size(); ++i) {
        const auto& rec = data.records[i];
        std::string key = rec.src + "|" + rec.dst;
        if (!seen[key]) {
            CHECK(*rec.label == 0);
            seen[key] = true;
        }
    }
}

TEST_CASE("the canonical benchmark is pinned") {
    Benchmark bench = benchmark_suite(7);
    CHECK(bench.data.size() == 50000);
    CHECK(bench.version == "synthetic-benchmark-v1");
    CHECK(bench.data.labeled);
    int positives = 0;
    for (int label : bench.truth.labels) positives += label;
    double rate = static_cast<double>(positives) / 50000.0;
    CHECK(rate >= 0.015);
    CHECK(rate <= 0.025);

    // Ground-truth JSON embeds the suite version.
    auto json_text = ground_truth_to_json(bench.truth, bench.version);
    CHECK(json_text.find("synthetic-benchmark-v1") != std::string::npos);
}

TEST_CASE("changed rows carry a visibly larger latency step") {
    Benchmark bench = benchmark_suite(3);
    // Mean |delta of per-row mean RTT| for changed vs stable rows, per path.
    std::map<std::string, std::pair<double, std::int64_t>> last_mean;
    double changed_sum = 0, stable_sum = 0;
    std::int64_t changed_n = 0, stable_n = 0;
    for (std::size_t i = 0; i < bench.data.records.size(); ++i) {
        const auto& rec = bench.data.records[i];
        double mean = 0;
        for (double v : rec.rtts) mean += v;
        if (!rec.rtts.empty()) mean /= static_cast<double>(rec.rtts.size());
        std::string key = rec.src + "|" + rec.dst;
        auto it = last_mean.find(key);
        if (it != last_mean.end() && !rec.rtts.empty() && it->second.second > 0) {
            double delta = std::abs(mean - it->second.first);
            if (*rec.label == 1) {
                changed_sum += delta;
                ++changed_n;
            } else {
                stable_sum += delta;
                ++stable_n;
            }
        }
        if (!rec.rtts.empty()) {
            last_mean[key] = {mean, static_cast<std::int64_t>(rec.rtts.size())};
        }
    }
    REQUIRE(changed_n > 0);
    REQUIRE(stable_n > 0);
    double separation = changed_sum / changed_n - stable_sum / stable_n;
    CHECK(separation >= 2.5);  // half the lower shift bound
}

TEST_CASE("invalid configurations are rejected") {
    SynthConfig bad;
    bad.change_rate = 1.5;
    CHECK_THROWS_AS(generate(bad), InvalidConfigError);
    SynthConfig probes;
    probes.probes_mean = 0.5;
    CHECK_THROWS_AS(generate(probes), InvalidConfigError);
    SynthConfig shift;
    shift.latency_shift_range = {5, 1};
    CHECK_THROWS_AS(generate(shift), InvalidConfigError);
}
