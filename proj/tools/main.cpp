#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"
#include "dqrc/error.hpp"

namespace {

dqrc::SplitSpec parse_split(const std::string& text) {
    std::vector<std::size_t> parts;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            std::size_t used = 0;
            parts.push_back(std::stoull(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw dqrc::ConfigError("--split expects TRAIN,VAL,TEST counts, got '" + text + "'");
        }
    }
    if (parts.size() != 3) throw dqrc::ConfigError("--split expects TRAIN,VAL,TEST counts, got '" + text + "'");
    return {parts[0], parts[1], parts[2]};
}

std::vector<std::string> parse_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distributed quantum reservoir computing for time-series forecasting"};
    app.require_subcommand(1);

    dqrc::cli::PrepareOptions prep;
    std::string split_text;
    std::string input_path;
    auto* prepare = app.add_subcommand("prepare", "Window, split and normalize a series into a dataset artifact");
    auto* input_opt = prepare->add_option("--input", input_path, "Delimited text file with a header row");
    prepare->add_option("--column", prep.column, "Column holding the load values")->capture_default_str();
    auto* synth_opt = prepare->add_flag("--synthetic", prep.synthetic, "Generate the seeded synthetic series");
    input_opt->excludes(synth_opt);
    prepare->add_option("--length", prep.length, "Synthetic series length")->capture_default_str();
    prepare->add_option("--seed", prep.seed, "Synthetic series seed")->capture_default_str();
    prepare->add_option("--window", prep.window, "Sliding window size")->capture_default_str()->check(CLI::PositiveNumber);
    prepare->add_option("--split", split_text, "TRAIN,VAL,TEST sample counts (default 70/15/15)");
    prepare->add_option("-o,--output", prep.output, "Dataset artifact to write")->required();

    dqrc::cli::RunOptions run;
    std::size_t run_workers = 0;
    std::string run_splits = "val,test";
    auto* run_cmd = app.add_subcommand("run", "Train and evaluate one configured experiment");
    run_cmd->add_option("-c,--config", run.config, "Experiment config (JSON)")->required();
    run_cmd->add_option("-d,--dataset", run.dataset, "Dataset artifact from 'prepare'")->required();
    run_cmd->add_option("-o,--out", run.out, "Result file (JSON); a .tsv row and timing sidecar go next to it")
        ->required();
    run_cmd->add_option("--workers", run_workers, "Parallel work units (overrides the config)");
    run_cmd->add_option("--splits", run_splits, "Splits to evaluate")->capture_default_str();

    dqrc::cli::SweepOptions sweep;
    std::size_t sweep_workers = 0;
    auto* sweep_cmd = app.add_subcommand("sweep", "Run a grid of experiments into per-architecture tables");
    sweep_cmd->add_option("-g,--grid", sweep.grid, "Grid file (JSON)")->required();
    sweep_cmd->add_option("-d,--dataset", sweep.dataset, "Dataset artifact from 'prepare'")->required();
    sweep_cmd->add_option("-o,--out-dir", sweep.out_dir, "Output directory")->required();
    sweep_cmd->add_flag("--resume", sweep.resume, "Keep completed rows of an earlier sweep");
    sweep_cmd->add_option("--workers", sweep_workers, "Parallel work units per run");

    dqrc::cli::WorkerCommandOptions worker;
    std::string listen;
    std::string calibration;
    std::uint64_t max_requests = 0;
    auto* worker_cmd = app.add_subcommand("worker", "Serve the worker protocol");
    auto* listen_opt = worker_cmd->add_option("--listen", listen, "host:port to accept connections on");
    auto* stdio_opt = worker_cmd->add_flag("--stdio", worker.stdio, "Serve one session on stdin/stdout");
    listen_opt->excludes(stdio_opt);
    worker_cmd->add_option("--calibration", calibration,
                           "Noise for requests without one: builtin name or calibration file");
    worker_cmd->add_option("--max-requests", max_requests)->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : dqrc::cli::kConfigError;
    }

    try {
        if (*prepare) {
            if (!input_path.empty()) prep.input = input_path;
            if (!split_text.empty()) prep.split = parse_split(split_text);
            const auto s = dqrc::cli::cmd_prepare(prep);
            std::cout << "series: " << s.series_length << " values\n"
                      << "samples: " << s.available << " (window " << prep.window << ")\n"
                      << "split: " << s.split.train << " train / " << s.split.val << " val / " << s.split.test
                      << " test\n"
                      << "wrote " << prep.output.string() << "\n";
        } else if (*run_cmd) {
            if (run_workers > 0) run.workers = run_workers;
            run.splits = parse_list(run_splits);
            const auto r = dqrc::cli::cmd_run(run);
            const auto& cols = dqrc::cli::result_columns();
            for (std::size_t i = 0; i < cols.size(); ++i) {
                std::cout << std::left << std::setw(24) << cols[i] << r.table_row[i] << "\n";
            }
            for (const auto& d : r.document["dispatch"]) {
                std::cout << std::left << std::setw(24) << ("dispatch " + d["backend"].get<std::string>())
                          << d["dispatches"].get<std::uint64_t>() << "\n";
            }
            std::cout << std::left << std::setw(24) << "seconds" << r.seconds << "\n"
                      << "wrote " << run.out.string() << "\n";
        } else if (*sweep_cmd) {
            if (sweep_workers > 0) sweep.workers = sweep_workers;
            const auto s = dqrc::cli::cmd_sweep(sweep, std::cerr);
            std::cout << "runs: " << s.total << " (" << s.computed << " computed, " << s.skipped << " resumed, "
                      << s.failed << " failed)\n";
        } else if (*worker_cmd) {
            if (!listen.empty()) worker.listen = listen;
            if (!calibration.empty()) worker.calibration = calibration;
            if (max_requests > 0) worker.max_requests = max_requests;
            dqrc::cli::cmd_worker(worker, std::cerr);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return dqrc::cli::exit_code_for(e);
    }
    return 0;
}
