#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "pathwatch/features.hpp"
#include "oracles.hpp"

using namespace pathwatch;

namespace {

TracerouteRecord make_record(std::vector<double> rtts, std::int64_t sent,
                             std::int64_t replies) {
    TracerouteRecord rec;
    rec.src = "a";
    rec.dst = "b";
    rec.timestamp = 100;
    rec.rtts = std::move(rtts);
    rec.probes_sent = sent;
    rec.replies_last_hop = replies;
    return rec;
}

}  // namespace

TEST_CASE("per-trace statistics on a three-sample list") {
    FeatureConfig cfg;
    auto stats = per_trace_stats(make_record({10, 20, 30}, 3, 3), cfg);
    CHECK(stats.mean == doctest::Approx(20.0));
    CHECK(stats.variance == doctest::Approx(200.0 / 3.0));
    CHECK(stats.min == 10.0);
    CHECK(stats.max == 30.0);
    CHECK(stats.count == 3.0);
    // Configured ranks 25/50/75/90 under linear interpolation.
    CHECK(stats.percentile_values[0] == doctest::Approx(15.0));
    CHECK(stats.percentile_values[1] == doctest::Approx(20.0));
    CHECK(stats.percentile_values[2] == doctest::Approx(25.0));
    CHECK(stats.percentile_values[3] == doctest::Approx(28.0));
    CHECK(stats.iqr == doctest::Approx(10.0));
    CHECK(stats.success_rate == 1.0);
    CHECK(stats.loss_rate == 0.0);
}

TEST_CASE("single sample forces zero variance") {
    auto stats = per_trace_stats(make_record({5}, 2, 1), FeatureConfig{});
    CHECK(stats.mean == 5.0);
    CHECK(stats.variance == 0.0);
    CHECK(stats.success_rate == doctest::Approx(0.5));
    CHECK(stats.loss_rate == doctest::Approx(0.5));
}

TEST_CASE("empty rtt list is a defined degenerate case") {
    auto stats = per_trace_stats(make_record({}, 0, 0), FeatureConfig{});
    CHECK(stats.mean == 0.0);
    CHECK(stats.variance == 0.0);
    CHECK(stats.count == 0.0);
    CHECK(stats.success_rate == 0.0);
    for (double q : stats.percentile_values) CHECK(q == 0.0);
}

TEST_CASE("temporal deltas follow the change formulas") {
    FeatureConfig cfg;
    std::vector<double> x{10, 20};
    auto cols = temporal_deltas(x, cfg);
    CHECK(cols.delta[1] == doctest::Approx(10.0));
    CHECK(cols.ratio[1] == doctest::Approx(2.0).epsilon(1e-6));
    auto gaps = temporal_gaps(std::vector<std::int64_t>{100, 160});
    CHECK(gaps[1] == doctest::Approx(60.0));
}

TEST_CASE("first observation of a path is exactly zero") {
    FeatureConfig cfg;
    auto cols = temporal_deltas(std::vector<double>{42.0}, cfg);
    CHECK(cols.delta[0] == 0.0);
    CHECK(cols.ratio[0] == 0.0);
    auto gaps = temporal_gaps(std::vector<std::int64_t>{1234});
    CHECK(gaps[0] == 0.0);
}

TEST_CASE("ratio explosion is clipped") {
    FeatureConfig cfg;
    auto cols = temporal_deltas(std::vector<double>{0.0, 5.0}, cfg);
    CHECK(cols.ratio[1] == 100.0);  // raw 5e6 against the default clip
}

TEST_CASE("unsorted timestamps are rejected") {
    CHECK_THROWS_AS(temporal_gaps(std::vector<std::int64_t>{100, 90}),
                    UnsortedInputError);
}

TEST_CASE("rolling statistics cover the trailing window") {
    auto roll = rolling_stats(std::vector<double>{10, 20, 30, 40}, 3);
    CHECK(roll.mean == std::vector<double>{10, 15, 20, 30});

    auto single = rolling_stats(std::vector<double>{7}, 3);
    CHECK(single.mean[0] == 7.0);
    CHECK(single.stddev[0] == 0.0);

    auto constant = rolling_stats(std::vector<double>(9, 4.0), 7);
    for (double s : constant.stddev) CHECK(s == 0.0);
}

TEST_CASE("aggregate fitting computes per-key statistics") {
    std::vector<std::string> src{"A", "A"};
    std::vector<std::string> dst{"B", "C"};
    std::vector<TrackedRow> tracked{{10, 0, 0, 1}, {30, 0, 0, 1}};
    auto tables = fit_aggregates(src, dst, tracked);
    const auto& a = tables.per_src.at("A");
    CHECK(a.row_count == 2);
    CHECK(a.distinct_counterparts == 2);
    CHECK(a.mean[0] == doctest::Approx(20.0));
    CHECK(a.stddev[0] == doctest::Approx(10.0));
    CHECK(tables.per_dst.at("B").stddev[0] == 0.0);  // one row per destination

    CHECK_THROWS_AS(fit_aggregates({}, {}, {}), EmptyInputError);
}

TEST_CASE("aggregate z-scores standardize against the key tables") {
    FeatureConfig cfg;
    std::vector<std::string> src{"A", "A"};
    std::vector<std::string> dst{"B", "B"};
    std::vector<TrackedRow> tracked{{15, 0, 0, 0}, {25, 0, 0, 0}};
    auto tables = fit_aggregates(src, dst, tracked);
    // mu = 20, sigma = 5 for source A.
    auto row = apply_aggregates("A", "B", {30, 0, 0, 0}, tables, cfg);
    CHECK(row.z_src[0] == doctest::Approx(2.0).epsilon(1e-6));
    auto centered = apply_aggregates("A", "B", {20, 0, 0, 0}, tables, cfg);
    CHECK(centered.z_src[0] == doctest::Approx(0.0));

    // Constant key feature: sigma 0, unit deviation, clipped.
    std::vector<TrackedRow> flat{{5, 0, 0, 0}, {5, 0, 0, 0}};
    auto flat_tables = fit_aggregates(src, dst, flat);
    auto clipped = apply_aggregates("A", "B", {6, 0, 0, 0}, flat_tables, cfg);
    CHECK(clipped.z_src[0] == 50.0);
}

TEST_CASE("unseen keys fall back to global statistics") {
    FeatureConfig cfg;
    std::vector<std::string> src{"A", "A"};
    std::vector<std::string> dst{"B", "B"};
    std::vector<TrackedRow> tracked{{10, 0, 0, 0}, {30, 0, 0, 0}};
    auto tables = fit_aggregates(src, dst, tracked);
    auto row = apply_aggregates("UNSEEN", "B", {30, 0, 0, 0}, tables, cfg);
    CHECK(row.src_row_count == 0.0);
    CHECK(row.z_src[0] == doctest::Approx(1.0).epsilon(1e-6));  // global mu 20 sigma 10
}

TEST_CASE("build_features has a stable schema and preserves row count") {
    Dataset ds = oracle::random_dataset(150, 9, 31);
    FeatureConfig cfg;
    auto [train, tables] = build_features(ds, cfg);
    CHECK(train.n_rows == ds.size());
    CHECK(train.schema == feature_schema(cfg));
    CHECK(train.labels.size() == ds.size());

    Dataset other = oracle::random_dataset(60, 9, 77);
    auto [test, tables2] = build_features(other, cfg, tables);
    CHECK(test.schema == train.schema);
    for (double v : test.data) CHECK(std::isfinite(v));
}

TEST_CASE("feature engine matches the quadratic-time reference") {
    Dataset ds = oracle::random_dataset(400, 11, 12345);
    FeatureConfig cfg;
    auto [matrix, tables] = build_features(ds, cfg);
    auto reference = oracle::naive_features(ds, cfg);
    REQUIRE(reference.size() == matrix.n_rows);
    double worst = 0;
    for (std::size_t r = 0; r < matrix.n_rows; ++r) {
        for (std::size_t c = 0; c < matrix.n_cols(); ++c) {
            double diff =
                std::abs(matrix.at(r, c) - reference[r].values.at(matrix.schema[c]));
            worst = std::max(worst, diff);
            if (diff > 1e-9) {
                INFO("row ", r, " col ", matrix.schema[c]);
                REQUIRE(diff <= 1e-9);
            }
        }
    }
    CHECK(worst <= 1e-9);
}

TEST_CASE("shifting all rtts by a constant moves location statistics only") {
    Dataset ds = oracle::random_dataset(120, 7, 4242);
    const double shift = 17.25;
    Dataset shifted = ds;
    for (auto& rec : shifted.records) {
        for (double& v : rec.rtts) v += shift;
    }
    FeatureConfig cfg;
    auto [base, t1] = build_features(ds, cfg);
    auto [moved, t2] = build_features(shifted, cfg);
    for (std::size_t r = 0; r < base.n_rows; ++r) {
        if (ds.records[r].rtts.empty()) continue;  // empty lists stay all-zero
        for (const char* col : {"rtt_mean", "rtt_min", "rtt_max", "rtt_p25", "rtt_p50",
                                "rtt_p75", "rtt_p90"}) {
            CHECK(moved.at(r, moved.column(col)) ==
                  doctest::Approx(base.at(r, base.column(col)) + shift).epsilon(1e-9));
        }
        for (const char* col : {"rtt_var", "delta_t", "success_rate", "loss_rate"}) {
            CHECK(moved.at(r, moved.column(col)) ==
                  doctest::Approx(base.at(r, base.column(col))).epsilon(1e-9));
        }
    }
}

TEST_CASE("path isolation: permuting one path leaves other paths unchanged") {
    Dataset ds = oracle::random_dataset(200, 6, 9001);
    FeatureConfig cfg;
    auto [base, t1] = build_features(ds, cfg);

    // Shuffle the storage order of rows belonging to path d3 only.
    Dataset permuted = ds;
    std::vector<std::size_t> rows_of_path;
    for (std::size_t i = 0; i < permuted.records.size(); ++i) {
        if (permuted.records[i].dst == "d3") rows_of_path.push_back(i);
    }
    std::mt19937_64 rng(5);
    auto shuffled = rows_of_path;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    for (std::size_t i = 0; i < rows_of_path.size(); ++i) {
        permuted.records[rows_of_path[i]] = ds.records[shuffled[i]];
    }
    auto [after, t2] = build_features(permuted, cfg);

    for (std::size_t r = 0; r < base.n_rows; ++r) {
        if (ds.records[r].dst == "d3") continue;
        for (std::size_t c = 0; c < base.n_cols(); ++c) {
            CHECK(after.at(r, c) == base.at(r, c));
        }
    }
}

TEST_CASE("frozen aggregate tables reproduce the fitting-time features") {
    Dataset ds = oracle::random_dataset(180, 8, 55);
    FeatureConfig cfg;
    auto [fit_matrix, tables] = build_features(ds, cfg);
    auto [apply_matrix, tables2] = build_features(ds, cfg, tables);
    CHECK(fit_matrix.data == apply_matrix.data);
}

TEST_CASE("feature state serializes and restores") {
    Dataset ds = oracle::random_dataset(80, 5, 7);
    FeatureConfig cfg;
    cfg.rolling_windows = {2, 4};
    cfg.percentiles = {10, 50, 95};
    auto [matrix, tables] = build_features(ds, cfg);
    auto text = serialize_feature_state(cfg, tables);
    auto [cfg2, tables2] = deserialize_feature_state(text);
    CHECK(cfg2.rolling_windows == cfg.rolling_windows);
    CHECK(cfg2.percentiles == cfg.percentiles);
    CHECK(serialize_feature_state(cfg2, tables2) == text);

    auto [again, t3] = build_features(ds, cfg2, tables2);
    CHECK(again.data == matrix.data);
    CHECK_THROWS_AS(deserialize_feature_state("{not json"), CorruptEncodingError);
}

TEST_CASE("feature config validation") {
    FeatureConfig bad;
    bad.epsilon = 0;
    CHECK_THROWS_AS(validate(bad), InvalidConfigError);
    FeatureConfig window;
    window.rolling_windows = {1};
    CHECK_THROWS_AS(validate(window), InvalidConfigError);
    FeatureConfig rank;
    rank.percentiles = {0};
    CHECK_THROWS_AS(validate(rank), InvalidConfigError);
}
