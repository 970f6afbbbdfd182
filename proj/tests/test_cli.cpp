#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pathwatch/cli.hpp"
#include "pathwatch/common.hpp"

using namespace pathwatch;
namespace fs = std::filesystem;

namespace {

int cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv{"pathwatch"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("pathwatch_cli_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

nlohmann::json strip_timing(nlohmann::json j) {
    j.erase("timing");
    return j;
}

}  // namespace

TEST_CASE("synth/train/evaluate round trip through the CLI") {
    TempDir dir;
    REQUIRE(cli({"synth", "--paths", "24", "--obs", "16", "--seed", "7", "-o",
                 dir.file("bench.csv"), "--ground-truth", dir.file("gt.json")}) == 0);
    REQUIRE(fs::exists(dir.file("bench.csv")));
    REQUIRE(fs::exists(dir.file("gt.json")));

    REQUIRE(cli({"train", "--mode", "stacked", "-i", dir.file("bench.csv"), "-o",
                 dir.file("model.json"), "--seed", "7"}) == 0);
    REQUIRE(cli({"evaluate", "--model", dir.file("model.json"), "-i",
                 dir.file("bench.csv"), "-o", dir.file("report.json")}) == 0);

    auto report = nlohmann::json::parse(read_file(dir.file("report.json")));
    CHECK(report.at("schema_version") == 1);
    CHECK(report.at("models").contains("stacked"));
    CHECK(report.at("models").contains("base_a"));
    CHECK(report.at("models").at("stacked").contains("f1"));
    CHECK(report.contains("run_config"));
    CHECK(report.contains("timing"));
}

TEST_CASE("unknown flags are a usage error") {
    CHECK(cli({"synth", "--does-not-exist", "1"}) == 1);
    CHECK(cli({"unknown-subcommand"}) == 1);
    CHECK(cli({}) == 1);
}

TEST_CASE("training on unlabeled input names the missing column") {
    TempDir dir;
    std::ofstream out(dir.file("unlabeled.csv"));
    out << "tr_src,tr_dst,timestamp,all_rtts,total_probes_sent,total_replies_last_"
           "hop\n";
    out << "a,b,100,\"1.0\",1,1\n";
    out.close();
    CHECK(cli({"train", "-i", dir.file("unlabeled.csv"), "-o", dir.file("m.json")}) ==
          2);
}

TEST_CASE("identical seeds give byte-identical models and reports") {
    TempDir dir;
    REQUIRE(cli({"synth", "--paths", "20", "--obs", "14", "--seed", "3", "-o",
                 dir.file("data.csv")}) == 0);
    for (int run = 0; run < 2; ++run) {
        std::string suffix = std::to_string(run);
        REQUIRE(cli({"train", "-i", dir.file("data.csv"), "-o",
                     dir.file("model" + suffix + ".json"), "--seed", "11"}) == 0);
        REQUIRE(cli({"evaluate", "--model", dir.file("model" + suffix + ".json"), "-i",
                     dir.file("data.csv"), "-o", dir.file("report" + suffix + ".json")}) ==
                0);
    }
    CHECK(read_file(dir.file("model0.json")) == read_file(dir.file("model1.json")));
    auto r0 = nlohmann::json::parse(read_file(dir.file("report0.json")));
    auto r1 = nlohmann::json::parse(read_file(dir.file("report1.json")));
    CHECK(strip_timing(r0) != nlohmann::json());
    // Reports agree except for the model filename echoed in run_config.
    r0["run_config"].erase("model");
    r1["run_config"].erase("model");
    CHECK(strip_timing(r0) == strip_timing(r1));
}

TEST_CASE("featurize writes a reusable sidecar") {
    TempDir dir;
    REQUIRE(cli({"synth", "--paths", "10", "--obs", "10", "--seed", "5", "-o",
                 dir.file("data.csv")}) == 0);
    REQUIRE(cli({"featurize", "-i", dir.file("data.csv"), "-o", dir.file("f1.csv"),
                 "--sidecar", dir.file("state.json")}) == 0);
    REQUIRE(cli({"featurize", "-i", dir.file("data.csv"), "-o", dir.file("f2.csv"),
                 "--apply", dir.file("state.json")}) == 0);
    CHECK(read_file(dir.file("f1.csv")) == read_file(dir.file("f2.csv")));
    std::string header = read_file(dir.file("f1.csv"));
    CHECK(header.rfind("rtt_mean,", 0) == 0);
}

TEST_CASE("single-learner and baseline modes train and predict") {
    TempDir dir;
    REQUIRE(cli({"synth", "--paths", "20", "--obs", "14", "--seed", "2", "-o",
                 dir.file("data.csv")}) == 0);
    for (std::string mode : {"single:b", "baseline:decision_tree", "baseline:dummy"}) {
        std::string name = mode;
        for (char& c : name) {
            if (c == ':') c = '_';
        }
        REQUIRE(cli({"train", "--mode", mode, "-i", dir.file("data.csv"), "-o",
                     dir.file(name + ".json"), "--seed", "4"}) == 0);
        REQUIRE(cli({"predict", "--model", dir.file(name + ".json"), "-i",
                     dir.file("data.csv"), "-o", dir.file(name + ".csv")}) == 0);
        std::string out = read_file(dir.file(name + ".csv"));
        CHECK(out.rfind("tr_src,tr_dst,timestamp,probability,decision", 0) == 0);
        REQUIRE(cli({"evaluate", "--model", dir.file(name + ".json"), "-i",
                     dir.file("data.csv"), "-o", dir.file(name + "_report.json")}) == 0);
    }
}

TEST_CASE("report subcommand writes rounds, summary, and the f1 csv") {
    TempDir dir;
    REQUIRE(cli({"synth", "--paths", "24", "--obs", "16", "--seed", "8", "-o",
                 dir.file("data.csv")}) == 0);
    REQUIRE(cli({"report", "-i", dir.file("data.csv"), "-o", dir.file("rounds.json"),
                 "--rounds", "2", "--seed", "1", "--models", "stacked,dummy",
                 "--f1-csv", dir.file("f1.csv")}) == 0);
    auto report = nlohmann::json::parse(read_file(dir.file("rounds.json")));
    CHECK(report.at("rounds").size() == 2);
    CHECK(report.at("summary").contains("stacked"));
    CHECK(report.at("summary").at("stacked").at("f1_per_round").size() == 2);
    std::string csv = read_file(dir.file("f1.csv"));
    CHECK(csv.rfind("round,stacked,dummy", 0) == 0);
}
