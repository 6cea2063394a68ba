#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dqrc/data.hpp"
#include "dqrc/orchestrator.hpp"

namespace dqrc::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kDataError = 2, kConfigError = 3, kServiceError = 4 };

/// Maps an exception to the exit-code contract.
int exit_code_for(const std::exception& e);

struct PrepareOptions {
    std::optional<std::filesystem::path> input;
    std::string column = "load";
    bool synthetic = false;
    std::size_t length = 3000;
    std::uint64_t seed = 0;
    std::size_t window = 4;
    /// Absent: 70 / 15 / 15 of the available samples.
    std::optional<SplitSpec> split;
    std::filesystem::path output;
};

struct PrepareSummary {
    std::size_t series_length = 0;
    std::size_t available = 0;
    SplitSpec split;
};

PrepareSummary cmd_prepare(const PrepareOptions& options);

/// Trains on the training split and evaluates `splits` (any of train, val,
/// test; empty splits are skipped). The returned document is deterministic:
/// it holds no timings.
struct ExperimentResult {
    nlohmann::json document;
    std::vector<std::string> table_row;
    double seconds = 0.0;
};

ExperimentResult run_experiment(const ExperimentConfig& config, const DatasetSplits& data,
                                const std::vector<std::string>& splits = {"val", "test"});

/// Column names of the delimited result row.
const std::vector<std::string>& result_columns();

struct RunOptions {
    std::filesystem::path config;
    std::filesystem::path dataset;
    std::filesystem::path out;
    std::optional<std::size_t> workers;
    std::vector<std::string> splits = {"val", "test"};
};

/// Writes `out` (JSON), `out` with a .tsv extension (header + row) and
/// `out`.timing.json (wall-clock seconds).
ExperimentResult cmd_run(const RunOptions& options);

struct SweepOptions {
    std::filesystem::path grid;
    std::filesystem::path dataset;
    std::filesystem::path out_dir;
    bool resume = false;
    std::optional<std::size_t> workers;
};

struct SweepSummary {
    std::size_t total = 0;
    std::size_t computed = 0;
    std::size_t skipped = 0;
    std::size_t failed = 0;
};

/// Grid file: {"base": {...}, "grid": {key: [values...]}, "runs": [{...}]}.
/// Every combination of grid values (and every entry of "runs") is merged
/// over "base" and run. Rows land in runs.jsonl as they finish; the tables
/// and curves.csv are rebuilt from it at the end.
SweepSummary cmd_sweep(const SweepOptions& options, std::ostream& log);

/// The override objects a grid file expands to, in run order.
std::vector<nlohmann::json> expand_grid(const nlohmann::json& grid);

struct WorkerCommandOptions {
    std::optional<std::string> listen;
    bool stdio = false;
    std::optional<std::string> calibration;
    std::optional<std::uint64_t> max_requests;
};

void cmd_worker(const WorkerCommandOptions& options, std::ostream& log);

nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace dqrc::cli
