#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "dqrc/worker.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
    int code = -1;
    std::string output;
};

Outcome dqrc_cli(const std::string& args) {
    const std::string command = std::string(DQRC_CLI_PATH) + " " + args + " 2>&1";
    Outcome out;
    FILE* pipe = ::popen(command.c_str(), "r");
    if (pipe == nullptr) return out;
    char buffer[4096];
    std::size_t n = 0;
    while ((n = std::fread(buffer, 1, sizeof buffer, pipe)) > 0) out.output.append(buffer, n);
    const int status = ::pclose(pipe);
    out.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return out;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

class Cli : public ::testing::Test {
  protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("dqrc_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }

    fs::path path(const std::string& name) const { return dir_ / name; }

    /// Small synthetic dataset: 120 samples split 80/20/20.
    fs::path small_dataset() {
        const auto out = path("data.json");
        const auto r = dqrc_cli("prepare --synthetic --length 124 --seed 3 --split 80,20,20 -o " + out.string());
        EXPECT_EQ(r.code, 0) << r.output;
        return out;
    }

    fs::path config(const json& j, const std::string& name = "config.json") {
        const auto p = path(name);
        write(p, j.dump());
        return p;
    }

    fs::path dir_;
};

}  // namespace

TEST_F(Cli, PrepareSyntheticIsDeterministic) {
    const auto a = dqrc_cli("prepare --synthetic --length 3000 --seed 7 -o " + path("a.json").string());
    const auto b = dqrc_cli("prepare --synthetic --length 3000 --seed 7 -o " + path("b.json").string());
    ASSERT_EQ(a.code, 0) << a.output;
    ASSERT_EQ(b.code, 0) << b.output;
    EXPECT_NE(a.output.find("samples: 2996"), std::string::npos) << a.output;
    EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));
}

TEST_F(Cli, PrepareReportsSampleCountFromFile) {
    std::string csv = "hour,load\n";
    for (int i = 0; i < 50; ++i) csv += std::to_string(i) + "," + std::to_string(4000 + 37 * (i % 11)) + "\n";
    write(path("loads.csv"), csv);
    const auto r = dqrc_cli("prepare --input " + path("loads.csv").string() + " --window 4 -o " +
                            path("out.json").string());
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_NE(r.output.find("samples: 46"), std::string::npos) << r.output;
}

TEST_F(Cli, PrepareMissingFileIsDataError) {
    const auto r = dqrc_cli("prepare --input " + path("nope.csv").string() + " -o " + path("out.json").string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.output.find(path("nope.csv").string()), std::string::npos) << r.output;
}

TEST_F(Cli, BadFlagsAreConfigErrors) {
    EXPECT_EQ(dqrc_cli("prepare -o " + path("x.json").string()).code, 3);
    EXPECT_EQ(dqrc_cli("prepare --synthetic --split 1,2 -o " + path("x.json").string()).code, 3);
    EXPECT_EQ(dqrc_cli("frobnicate").code, 3);
    EXPECT_EQ(dqrc_cli("--help").code, 0);
}

TEST_F(Cli, RunReportsMetricsAndIsDeterministic) {
    const auto data = small_dataset();
    const auto cfg = config({{"variant", "SRSR"}, {"neurons_per_reservoir", 10}, {"reservoir_kind", "classical"},
                             {"readout_kind", "classical"}, {"seed", 1}, {"dataset", {{"window", 4}}}});
    const std::string args = "run -c " + cfg.string() + " -d " + data.string() + " -o " + path("r.json").string();
    const auto first = dqrc_cli(args);
    ASSERT_EQ(first.code, 0) << first.output;
    for (const char* metric : {"MAE", "RMSE", "R2"}) EXPECT_NE(first.output.find(metric), std::string::npos);
    const auto json_a = slurp(path("r.json"));
    const auto tsv_a = slurp(path("r.tsv"));
    const auto doc = json::parse(json_a);
    for (const char* split : {"val", "test"}) {
        ASSERT_TRUE(doc["metrics"].contains(split));
        for (const char* m : {"mae", "rmse", "r2"}) EXPECT_TRUE(doc["metrics"][split].contains(m));
    }
    EXPECT_TRUE(fs::exists(path("r.json.timing.json")));

    ASSERT_EQ(dqrc_cli(args).code, 0);
    EXPECT_EQ(slurp(path("r.json")), json_a);
    EXPECT_EQ(slurp(path("r.tsv")), tsv_a);
}

TEST_F(Cli, MrmrPlacementAndDispatches) {
    const auto data = small_dataset();
    const auto cfg = config({{"variant", "MRMR"}, {"reservoirs", 3}, {"neurons_per_reservoir", 10},
                             {"reservoir_kind", "quantum"}, {"readout_kind", "quantum"}, {"mode", "ideal"}});
    const auto r = dqrc_cli("run -c " + cfg.string() + " -d " + data.string() + " -o " + path("r.json").string() +
                            " --splits test");
    ASSERT_EQ(r.code, 0) << r.output;
    const auto doc = json::parse(slurp(path("r.json")));
    EXPECT_EQ(doc["placement"]["reservoirs"], json({1, 1, 1}));
    EXPECT_EQ(doc["placement"]["readout_instances"], json({1, 1, 1}));
    // Per backend: one reservoir over the 80 train and 20 test samples (3
    // passes x 10 neurons each) and one kernel instance (80 x 81 / 2 training
    // pairs plus 20 x 80 test pairs).
    const std::uint64_t expected = 100 * 3 * 10 + 80 * 81 / 2 + 20 * 80;
    ASSERT_EQ(doc["dispatch"].size(), 3u);
    for (const auto& d : doc["dispatch"]) EXPECT_EQ(d["dispatches"].get<std::uint64_t>(), expected) << d;
}

TEST_F(Cli, ConfigViolationExitsThree) {
    const auto data = small_dataset();
    const auto cfg = config({{"variant", "MRMR"}, {"reservoirs", 3}, {"ridge_instances", 2}});
    const auto r = dqrc_cli("run -c " + cfg.string() + " -d " + data.string() + " -o " + path("r.json").string());
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.output.find("MRMR requires ridge_instances = reservoirs"), std::string::npos) << r.output;

    const auto wrong_window = config({{"dataset", {{"window", 6}}}, {"reservoir_kind", "classical"}}, "w.json");
    EXPECT_EQ(dqrc_cli("run -c " + wrong_window.string() + " -d " + data.string() + " -o " + path("r.json").string()).code,
              3);
    EXPECT_EQ(dqrc_cli("run -c " + path("absent.json").string() + " -d " + data.string() + " -o " +
                       path("r.json").string())
                  .code,
              3);
}

TEST_F(Cli, SweepRowsCurvesAndResume) {
    const auto data = small_dataset();
    const json grid{{"base", {{"variant", "SRSR"}, {"reservoir_kind", "classical"}, {"readout_kind", "classical"}}},
                    {"grid", {{"neurons_per_reservoir", {10, 20}}}}};
    write(path("grid.json"), grid.dump());
    const std::string args = "sweep -g " + path("grid.json").string() + " -d " + data.string() + " -o " +
                             path("out").string();
    const auto r = dqrc_cli(args);
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_NE(r.output.find("runs: 2 (2 computed"), std::string::npos) << r.output;

    std::ifstream table(path("out") / "SRSR_classical-readout.tsv");
    std::string line;
    std::size_t rows = 0;
    while (std::getline(table, line)) ++rows;
    EXPECT_EQ(rows, 3u);

    std::ifstream curves(path("out") / "curves.csv");
    std::getline(curves, line);
    std::set<std::string> x_values;
    while (std::getline(curves, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
        ASSERT_EQ(cells.size(), 10u) << line;
        x_values.insert(cells[6]);
    }
    EXPECT_EQ(x_values, (std::set<std::string>{"10", "20"}));

    const auto runs_before = slurp(path("out") / "runs.jsonl");
    const auto again = dqrc_cli(args + " --resume");
    ASSERT_EQ(again.code, 0) << again.output;
    EXPECT_NE(again.output.find("runs: 2 (0 computed, 2 resumed"), std::string::npos) << again.output;
    EXPECT_EQ(slurp(path("out") / "runs.jsonl"), runs_before);

    // Drop one completed row, as if the sweep had been interrupted.
    write(path("out") / "runs.jsonl", runs_before.substr(0, runs_before.find('\n') + 1));
    const auto partial = dqrc_cli(args + " --resume");
    ASSERT_EQ(partial.code, 0) << partial.output;
    EXPECT_NE(partial.output.find("runs: 2 (1 computed, 1 resumed"), std::string::npos) << partial.output;
}

TEST_F(Cli, SweepRecordsFailedRowsAndContinues) {
    const auto data = small_dataset();
    const json grid{{"base", {{"reservoir_kind", "classical"}, {"readout_kind", "classical"}}},
                    {"runs", {{{"variant", "SRSR"}}, {{"variant", "SRSR"}, {"reservoirs", 2}}}}};
    write(path("grid.json"), grid.dump());
    const auto r = dqrc_cli("sweep -g " + path("grid.json").string() + " -d " + data.string() + " -o " +
                            path("out").string());
    EXPECT_EQ(r.code, 0) << r.output;
    EXPECT_NE(r.output.find("1 failed"), std::string::npos) << r.output;
    EXPECT_NE(slurp(path("out") / "SRSR_classical-readout.tsv").find("failed"), std::string::npos);
}

TEST_F(Cli, WorkerBindFailureExitsFour) {
    dqrc::TcpWorkerServer occupied("127.0.0.1:0");
    const auto r = dqrc_cli("worker --listen 127.0.0.1:" + std::to_string(occupied.port()));
    EXPECT_EQ(r.code, 4) << r.output;
    EXPECT_EQ(dqrc_cli("worker").code, 3);
}

TEST_F(Cli, SpawnedWorkersMatchInProcess) {
    const auto data = small_dataset();
    const std::string spawn = std::string("spawn:") + DQRC_CLI_PATH + " worker --stdio";
    json base{{"variant", "MRSR"}, {"reservoirs", 2}, {"neurons_per_reservoir", 3}, {"reservoir_kind", "quantum"},
              {"readout_kind", "quantum"}, {"kernel_qubits", 5}, {"seed", 4}};
    json remote = base;
    remote["backends"] = json::array({{{"name", "a"}, {"endpoint", spawn}}, {{"name", "b"}, {"endpoint", spawn}}});
    base["backends"] = json::array({"a", "b"});
    ASSERT_EQ(dqrc_cli("run -c " + config(base, "local.json").string() + " -d " + data.string() + " -o " +
                       path("local.json.out").string())
                  .code,
              0);
    const auto r = dqrc_cli("run -c " + config(remote, "remote.json").string() + " -d " + data.string() + " -o " +
                            path("remote.json.out").string());
    ASSERT_EQ(r.code, 0) << r.output;
    const auto a = json::parse(slurp(path("local.json.out")));
    const auto b = json::parse(slurp(path("remote.json.out")));
    EXPECT_EQ(a["metrics"], b["metrics"]);
    EXPECT_EQ(a["dispatch"], b["dispatch"]);

    remote["backends"] = json::array({{{"name", "dead"}, {"endpoint", "spawn:/nonexistent/worker"}}});
    const auto dead = dqrc_cli("run -c " + config(remote, "dead.json").string() + " -d " + data.string() + " -o " +
                               path("dead.out").string());
    EXPECT_EQ(dead.code, 4) << dead.output;
    EXPECT_NE(dead.output.find("dead"), std::string::npos) << dead.output;
}
