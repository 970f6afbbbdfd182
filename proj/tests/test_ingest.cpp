#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "pathwatch/features.hpp"
#include "pathwatch/ingest.hpp"
#include "oracles.hpp"

using namespace pathwatch;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& contents) {
    auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path, std::ios::trunc);
    out << contents;
    return path;
}

Dataset grid_dataset(int n_paths, int rows_per_path) {
    std::vector<TracerouteRecord> records;
    for (int p = 0; p < n_paths; ++p) {
        for (int r = 0; r < rows_per_path; ++r) {
            TracerouteRecord rec;
            rec.src = "s" + std::to_string(p);
            rec.dst = "d" + std::to_string(p);
            rec.timestamp = 1000 + 60 * r;
            rec.rtts = {10.0 + p, 11.0 + r};
            rec.probes_sent = 2;
            rec.replies_last_hop = 2;
            rec.label = (p + r) % 7 == 0 ? 1 : 0;
            records.push_back(std::move(rec));
        }
    }
    return make_dataset(std::move(records));
}

}  // namespace

TEST_CASE("csv row maps fields directly") {
    auto path = write_temp(
        "pw_basic.csv",
        "tr_src,tr_dst,timestamp,all_rtts,total_probes_sent,total_replies_last_hop,"
        "route_changed\n"
        "a,b,100,\"12.5|13.0\",2,2,0\n");
    Dataset ds = parse_csv(path);
    REQUIRE(ds.size() == 1);
    const auto& rec = ds.records[0];
    CHECK(rec.src == "a");
    CHECK(rec.dst == "b");
    CHECK(rec.timestamp == 100);
    CHECK(rec.rtts == std::vector<double>{12.5, 13.0});
    CHECK(rec.probes_sent == 2);
    CHECK(rec.replies_last_hop == 2);
    CHECK(rec.label == 0);
    CHECK(ds.labeled);
}

TEST_CASE("replies exceeding probes is an invariant violation") {
    auto path = write_temp(
        "pw_invalid.csv",
        "tr_src,tr_dst,timestamp,all_rtts,total_probes_sent,total_replies_last_hop,"
        "route_changed\n"
        "a,b,100,\"1.0\",2,3,0\n");
    CHECK_THROWS_AS(parse_csv(path), InvalidCountError);
}

TEST_CASE("empty rtts field parses to an empty list and featurizes") {
    auto path = write_temp(
        "pw_empty_rtts.csv",
        "tr_src,tr_dst,timestamp,all_rtts,total_probes_sent,total_replies_last_hop,"
        "route_changed\n"
        "a,b,100,\"\",0,0,0\n");
    Dataset ds = parse_csv(path);
    REQUIRE(ds.size() == 1);
    CHECK(ds.records[0].rtts.empty());
    // The feature engine accepts the reply-less trace end to end.
    auto [matrix, tables] = build_features(ds, FeatureConfig{});
    CHECK(matrix.n_rows == 1);
    CHECK(matrix.at(0, matrix.column("rtt_mean")) == 0.0);
    CHECK(matrix.at(0, matrix.column("success_rate")) == 0.0);
}

TEST_CASE("missing canonical column is reported by name") {
    auto path = write_temp("pw_missing.csv",
                           "tr_src,tr_dst,timestamp,total_probes_sent,"
                           "total_replies_last_hop\n");
    try {
        parse_csv(path);
        FAIL("expected MissingColumnError");
    } catch (const MissingColumnError& e) {
        CHECK(e.column() == "all_rtts");
    }
}

TEST_CASE("jsonl maps the canonical field names") {
    auto path = write_temp(
        "pw_basic.jsonl",
        R"({"tr_src":"a","tr_dst":"b","timestamp":100,"all_rtts":[12.5],)"
        R"("total_probes_sent":1,"total_replies_last_hop":1,"route_changed":1})"
        "\n");
    Dataset ds = parse_jsonl(path);
    REQUIRE(ds.size() == 1);
    CHECK(ds.records[0].label == 1);
    CHECK(ds.records[0].rtts == std::vector<double>{12.5});
}

TEST_CASE("empty jsonl object is malformed") {
    auto path = write_temp("pw_empty_obj.jsonl", "{}\n");
    CHECK_THROWS_AS(parse_jsonl(path), MalformedRowError);
}

TEST_CASE("csv and jsonl parsers produce identical downstream features") {
    std::string csv =
        "tr_src,tr_dst,timestamp,all_rtts,total_probes_sent,total_replies_last_hop,"
        "route_changed\n"
        "a,b,100,\"12.5|13.25\",3,2,0\n"
        "a,b,160,\"14.5\",2,1,1\n"
        "a,c,90,\"\",1,0,0\n";
    std::string jsonl =
        R"({"tr_src":"a","tr_dst":"b","timestamp":100,"all_rtts":[12.5,13.25],"total_probes_sent":3,"total_replies_last_hop":2,"route_changed":0})"
        "\n"
        R"({"tr_src":"a","tr_dst":"b","timestamp":160,"all_rtts":[14.5],"total_probes_sent":2,"total_replies_last_hop":1,"route_changed":1})"
        "\n"
        R"({"tr_src":"a","tr_dst":"c","timestamp":90,"all_rtts":[],"total_probes_sent":1,"total_replies_last_hop":0,"route_changed":0})"
        "\n";
    Dataset from_csv = parse_csv(write_temp("pw_eq.csv", csv));
    Dataset from_jsonl = parse_jsonl(write_temp("pw_eq.jsonl", jsonl));
    REQUIRE(from_csv.records == from_jsonl.records);
    auto [m1, t1] = build_features(from_csv, FeatureConfig{});
    auto [m2, t2] = build_features(from_jsonl, FeatureConfig{});
    CHECK(m1.to_csv() == m2.to_csv());
}

TEST_CASE("sub-second timestamps are truncated") {
    auto path = write_temp(
        "pw_subsec.csv",
        "tr_src,tr_dst,timestamp,all_rtts,total_probes_sent,total_replies_last_hop\n"
        "a,b,100.75,\"1.0\",1,1\n");
    Dataset ds = parse_csv(path);
    CHECK(ds.records[0].timestamp == 100);
    CHECK_FALSE(ds.labeled);
}

TEST_CASE("serialize then parse round-trips field-equal records") {
    Dataset ds = oracle::random_dataset(200, 12, 99);
    auto path = write_temp("pw_roundtrip.csv", to_csv(ds));
    Dataset back = parse_csv(path);
    CHECK(back.records == ds.records);
    CHECK(back.labeled == ds.labeled);
}

TEST_CASE("mixed labeling is rejected") {
    std::vector<TracerouteRecord> records(2);
    records[0].src = records[1].src = "a";
    records[0].dst = records[1].dst = "b";
    records[0].label = 1;
    CHECK_THROWS_AS(make_dataset(std::move(records)), DataError);
}

TEST_CASE("split fills the train side to the row-count target by whole paths") {
    Dataset ds = grid_dataset(10, 10);
    auto [train, test] = split(ds, 0.7, 42);
    CHECK(train.size() == 70);
    CHECK(test.size() == 30);

    // Path integrity: no (src,dst) on both sides.
    std::set<std::string> train_paths, test_paths;
    for (const auto& r : train.records) train_paths.insert(r.src + "|" + r.dst);
    for (const auto& r : test.records) test_paths.insert(r.src + "|" + r.dst);
    CHECK(train_paths.size() == 7);
    CHECK(test_paths.size() == 3);
    for (const auto& p : train_paths) CHECK(test_paths.count(p) == 0);
}

TEST_CASE("split is deterministic and exhaustive") {
    Dataset ds = oracle::random_dataset(300, 17, 5);
    auto [train1, test1] = split(ds, 0.7, 11);
    auto [train2, test2] = split(ds, 0.7, 11);
    CHECK(train1.records == train2.records);
    CHECK(test1.records == test2.records);
    CHECK(train1.size() + test1.size() == ds.size());

    auto [train3, test3] = split(ds, 0.7, 12);
    CHECK(train3.size() + test3.size() == ds.size());
}

TEST_CASE("split with an extreme fraction degenerates") {
    Dataset ds = grid_dataset(2, 10);
    // The train side keeps absorbing paths until it reaches 0.999 * 20 rows,
    // which needs both paths, leaving the test side empty.
    CHECK_THROWS_AS(split(ds, 0.999, 1), DegenerateSplitError);
}

TEST_CASE("class distribution arithmetic") {
    auto report = make_imbalance_report(98, 2);
    CHECK(report.imbalance_ratio == doctest::Approx(49.0));
    CHECK(report.positive_pct == doctest::Approx(2.0));
    CHECK_FALSE(report.single_class);

    auto paper = make_imbalance_report(19595589, 369570);
    CHECK(paper.imbalance_ratio == doctest::Approx(53.02).epsilon(0.001));
    CHECK(paper.positive_pct == doctest::Approx(1.85).epsilon(0.01));

    std::vector<TracerouteRecord> ones(3);
    for (auto& r : ones) {
        r.src = "a";
        r.dst = "b";
        r.label = 1;
    }
    auto single = class_distribution(make_dataset(std::move(ones)));
    CHECK(single.single_class);
}
