#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "dqrc/error.hpp"
#include "dqrc/noise.hpp"
#include "dqrc/worker.hpp"

namespace dqrc::cli {

namespace fs = std::filesystem;

namespace {

const WindowedDataset& split_named(const DatasetSplits& data, const std::string& name) {
    if (name == "train") return data.train;
    if (name == "val") return data.val;
    if (name == "test") return data.test;
    throw ConfigError("unknown split '" + name + "' (expected train, val or test)");
}

std::string format_metric(double v) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(6) << v;
    return out.str();
}

std::string mode_label(const ExperimentConfig& c) { return c.noisy() ? "noisy" : "ideal"; }

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("failed writing " + path.string());
}

std::string join(const std::vector<std::string>& cells, char sep) {
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += sep;
        out += cells[i];
    }
    return out;
}

fs::path sidecar(const fs::path& out, const std::string& suffix) {
    fs::path p = out;
    p += suffix;
    return p;
}

nlohmann::json merge(nlohmann::json base, const nlohmann::json& overrides) {
    for (const auto& [k, v] : overrides.items()) base[k] = v;
    return base;
}

}  // namespace

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const DataError*>(&e)) return kDataError;
    if (dynamic_cast<const ConfigError*>(&e)) return kConfigError;
    if (dynamic_cast<const ServiceError*>(&e)) return kServiceError;
    return kFailure;
}

nlohmann::json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": invalid JSON: " + e.what());
    }
}

PrepareSummary cmd_prepare(const PrepareOptions& o) {
    if (o.synthetic == o.input.has_value()) throw ConfigError("prepare needs exactly one of --input or --synthetic");
    if (o.output.empty()) throw ConfigError("prepare needs an output path");
    Series series;
    nlohmann::json provenance;
    if (o.synthetic) {
        const SyntheticComponents components;
        series = synthesize_series(o.length, o.seed, components);
        provenance = {{"source", "synthetic"}, {"length", o.length}, {"seed", o.seed}, {"components", components}};
    } else {
        series = load_series(*o.input, o.column);
        provenance = {{"source", o.input->string()}, {"column", o.column}};
    }
    if (series.values.size() <= o.window) {
        throw DataError("series of " + std::to_string(series.values.size()) + " values is too short for window " +
                        std::to_string(o.window));
    }
    const std::size_t available = series.values.size() - o.window;
    const SplitSpec split = o.split.value_or(SplitSpec::proportional(available));
    const auto splits = make_windows(series, o.window, split);
    provenance["window"] = o.window;
    save_dataset(o.output, splits, split, provenance);
    return {series.values.size(), available, split};
}

const std::vector<std::string>& result_columns() {
    static const std::vector<std::string> cols{"variant",        "reservoirs",   "neurons_per_reservoir",
                                               "ridge_instances", "kernel_qubits", "reservoir_kind",
                                               "readout_kind",    "mode",         "MAE",
                                               "RMSE",            "R2"};
    return cols;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const DatasetSplits& data,
                                const std::vector<std::string>& splits) {
    const auto started = std::chrono::steady_clock::now();
    if (config.dataset.contains("window") && config.dataset["window"].get<std::size_t>() != data.train.window) {
        throw ConfigError("config expects window " + config.dataset["window"].dump() + " but the dataset has " +
                          std::to_string(data.train.window));
    }
    const auto& arch = config.architecture;
    const Pipeline pipeline = build_pipeline(arch, data.train.window);
    const auto backends = make_backends(config.backends);
    const TrainedPipeline trained = train(pipeline, data.train, backends, config.execution);

    nlohmann::json metrics = nlohmann::json::object();
    for (const auto& name : splits) {
        const auto& ds = split_named(data, name);
        if (ds.size() == 0) continue;
        const auto pred = predict(trained, ds, backends, config.execution, name);
        metrics[name] = compute_metrics(ds.targets, pred);
    }

    nlohmann::json dispatch = nlohmann::json::array();
    for (std::size_t b = 0; b < backends.size(); ++b) {
        dispatch.push_back({{"backend", backends[b]->name()},
                            {"dispatches", backends[b]->dispatch_count()},
                            {"retries", backends[b]->retry_count()}});
    }
    nlohmann::json placement{{"reservoirs", trained.reservoir_placement.counts(backends.size())},
                             {"readout_instances", trained.readout_placement.counts(backends.size())}};

    ExperimentResult result;
    result.document = {{"config", to_json(config)},
                       {"metrics", metrics},
                       {"dispatch", dispatch},
                       {"placement", placement},
                       {"seed", arch.seed},
                       {"train_samples", trained.train_samples},
                       {"kernel_stride", trained.kernel_stride},
                       {"normalization", {{"min", data.train.norm.min}, {"max", data.train.norm.max}}}};

    result.table_row = {std::string(to_string(arch.variant)), std::to_string(arch.num_reservoirs),
                        std::to_string(arch.neurons_per_reservoir), std::to_string(arch.ridge_instances),
                        std::to_string(arch.kernel_qubits), std::string(to_string(arch.reservoir_kind)),
                        std::string(to_string(arch.readout_kind)), mode_label(config)};
    const std::string headline = metrics.contains("test") ? "test" : (metrics.empty() ? "" : metrics.begin().key());
    if (headline.empty()) {
        result.table_row.insert(result.table_row.end(), {"", "", ""});
    } else {
        const auto& m = metrics[headline];
        result.table_row.push_back(format_metric(m["mae"].get<double>()));
        result.table_row.push_back(format_metric(m["rmse"].get<double>()));
        result.table_row.push_back(m["r2"].is_null() ? "nan" : format_metric(m["r2"].get<double>()));
    }
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

ExperimentResult cmd_run(const RunOptions& o) {
    auto config = experiment_config_from_json(read_json_file(o.config));
    if (o.workers) config.execution.workers = std::max<std::size_t>(1, *o.workers);
    const auto data = load_dataset(o.dataset);
    auto result = run_experiment(config, data, o.splits);

    auto tsv = o.out;
    tsv.replace_extension(".tsv");
    result.document["artifacts"] = {{"result", o.out.string()},
                                    {"table", tsv.string()},
                                    {"timing", sidecar(o.out, ".timing.json").string()},
                                    {"dataset", o.dataset.string()}};
    write_text(o.out, result.document.dump(2) + "\n");
    write_text(tsv, join(result_columns(), '\t') + "\n" + join(result.table_row, '\t') + "\n");
    write_text(sidecar(o.out, ".timing.json"), nlohmann::json{{"seconds", result.seconds}}.dump() + "\n");
    return result;
}

std::vector<nlohmann::json> expand_grid(const nlohmann::json& grid) {
    std::vector<nlohmann::json> out;
    if (grid.contains("grid")) {
        const auto& axes = grid["grid"];
        if (!axes.is_object()) throw ConfigError("'grid' must map keys to lists of values");
        std::vector<nlohmann::json> partial{nlohmann::json::object()};
        for (const auto& [key, values] : axes.items()) {
            if (!values.is_array() || values.empty()) throw ConfigError("grid key '" + key + "' needs a non-empty list");
            std::vector<nlohmann::json> next;
            for (const auto& p : partial) {
                for (const auto& v : values) {
                    auto q = p;
                    q[key] = v;
                    next.push_back(std::move(q));
                }
            }
            partial = std::move(next);
        }
        out = std::move(partial);
    }
    if (grid.contains("runs")) {
        if (!grid["runs"].is_array()) throw ConfigError("'runs' must be a list of objects");
        for (const auto& r : grid["runs"]) {
            if (!r.is_object()) throw ConfigError("'runs' must be a list of objects");
            out.push_back(r);
        }
    }
    if (out.empty()) throw ConfigError("grid file defines no runs");
    return out;
}

namespace {

struct SweepRow {
    nlohmann::json overrides;
    nlohmann::json record;
};

std::string group_label(const nlohmann::json& row) {
    return row.value("reservoir_kind", std::string("?")) + "/" + row.value("mode", std::string("?"));
}

void write_sweep_outputs(const fs::path& dir, const std::vector<nlohmann::json>& records) {
    // One table per (variant, readout kind); rows are sizes, column groups
    // are reservoir kind / execution mode.
    std::map<std::pair<std::string, std::string>, std::vector<const nlohmann::json*>> tables;
    for (const auto& r : records) {
        if (!r.contains("row")) continue;
        tables[{r["row"]["variant"].get<std::string>(), r["row"]["readout_kind"].get<std::string>()}].push_back(&r);
    }
    static const std::vector<std::string> preferred{"classical/ideal", "quantum/ideal", "quantum/noisy",
                                                    "classical/noisy"};
    for (const auto& [key, rows] : tables) {
        std::set<std::string> present;
        for (const auto* r : rows) present.insert(group_label((*r)["row"]));
        std::vector<std::string> groups;
        for (const auto& g : preferred) {
            if (present.count(g)) groups.push_back(g);
        }
        for (const auto& g : present) {
            if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(g);
        }
        using SizeKey = std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>;
        std::map<SizeKey, std::map<std::string, const nlohmann::json*>> grid;
        for (const auto* r : rows) {
            const auto& row = (*r)["row"];
            const auto res = row["reservoirs"].get<std::size_t>();
            const auto npr = row["neurons_per_reservoir"].get<std::size_t>();
            grid[{res * npr, res, row["ridge_instances"].get<std::size_t>(), row["kernel_qubits"].get<std::size_t>()}]
                [group_label(row)] = r;
        }
        std::vector<std::string> header{"total_neurons", "reservoirs_x_neurons", "ridge_instances", "kernel_qubits"};
        for (const auto& g : groups) {
            for (const char* m : {"MAE", "RMSE", "R2"}) header.push_back(g + ":" + m);
        }
        std::string text = join(header, '\t') + "\n";
        for (const auto& [size, cells] : grid) {
            const auto& [total, res, inst, nq] = size;
            std::vector<std::string> line{std::to_string(total), std::to_string(res) + "x" + std::to_string(total / res),
                                          std::to_string(inst), std::to_string(nq)};
            for (const auto& g : groups) {
                const auto it = cells.find(g);
                if (it == cells.end()) {
                    line.insert(line.end(), {"", "", ""});
                } else if (it->second->value("status", std::string()) != "ok") {
                    line.insert(line.end(), {"failed", "failed", "failed"});
                } else {
                    const auto& row = (*it->second)["row"];
                    line.insert(line.end(), {row["MAE"].get<std::string>(), row["RMSE"].get<std::string>(),
                                             row["R2"].get<std::string>()});
                }
            }
            text += join(line, '\t') + "\n";
        }
        write_text(dir / (key.first + "_" + key.second + "-readout.tsv"), text);
    }

    std::string curves =
        "variant,readout_kind,reservoir_kind,mode,reservoirs,neurons_per_reservoir,total_neurons,ridge_instances,"
        "metric,value\n";
    for (const auto& r : records) {
        if (r.value("status", std::string()) != "ok") continue;
        const auto& row = r["row"];
        const auto res = row["reservoirs"].get<std::size_t>();
        const auto npr = row["neurons_per_reservoir"].get<std::size_t>();
        for (const char* m : {"MAE", "RMSE", "R2"}) {
            curves += row["variant"].get<std::string>() + "," + row["readout_kind"].get<std::string>() + "," +
                      row["reservoir_kind"].get<std::string>() + "," + row["mode"].get<std::string>() + "," +
                      std::to_string(res) + "," + std::to_string(npr) + "," + std::to_string(res * npr) + "," +
                      std::to_string(row["ridge_instances"].get<std::size_t>()) + "," + m + "," +
                      row[m].get<std::string>() + "\n";
        }
    }
    write_text(dir / "curves.csv", curves);
}

nlohmann::json row_object(const std::vector<std::string>& cells) {
    nlohmann::json row = nlohmann::json::object();
    const auto& cols = result_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) {
        const bool numeric = cols[i] == "reservoirs" || cols[i] == "neurons_per_reservoir" ||
                             cols[i] == "ridge_instances" || cols[i] == "kernel_qubits";
        row[cols[i]] = numeric ? nlohmann::json(std::stoull(cells[i])) : nlohmann::json(cells[i]);
    }
    return row;
}

}  // namespace

SweepSummary cmd_sweep(const SweepOptions& o, std::ostream& log) {
    const auto grid = read_json_file(o.grid);
    if (!grid.is_object()) throw ConfigError(o.grid.string() + ": grid file must be a JSON object");
    const nlohmann::json base = grid.value("base", nlohmann::json::object());
    const auto runs = expand_grid(grid);
    const auto data = load_dataset(o.dataset);
    fs::create_directories(o.out_dir);
    const fs::path journal = o.out_dir / "runs.jsonl";

    std::map<std::string, nlohmann::json> done;
    if (o.resume && fs::exists(journal)) {
        std::ifstream in(journal);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            try {
                auto rec = nlohmann::json::parse(line);
                if (rec.value("status", std::string()) == "ok") done[rec.at("key").get<std::string>()] = rec;
            } catch (const nlohmann::json::exception&) {
                // A line cut short by an interruption; the run is redone.
            }
        }
    }

    // The journal is rewritten with completed rows first so that a rerun
    // never duplicates entries.
    {
        std::ofstream out(journal, std::ios::trunc);
        for (const auto& r : runs) {
            const auto it = done.find(r.dump());
            if (it != done.end()) out << it->second.dump() << '\n';
        }
    }

    SweepSummary summary;
    summary.total = runs.size();
    std::vector<nlohmann::json> records;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const std::string key = runs[i].dump();
        if (const auto it = done.find(key); it != done.end()) {
            records.push_back(it->second);
            ++summary.skipped;
            log << "[" << i + 1 << "/" << runs.size() << "] " << key << " (done)\n";
            continue;
        }
        nlohmann::json rec{{"key", key}, {"overrides", runs[i]}};
        try {
            auto config = experiment_config_from_json(merge(base, runs[i]));
            if (o.workers) config.execution.workers = std::max<std::size_t>(1, *o.workers);
            const auto result = run_experiment(config, data, {"test"});
            rec["status"] = "ok";
            rec["row"] = row_object(result.table_row);
            rec["metrics"] = result.document["metrics"];
            rec["dispatch"] = result.document["dispatch"];
            log << "[" << i + 1 << "/" << runs.size() << "] " << key << " MAE " << result.table_row[8] << " ("
                << format_metric(result.seconds) << " s)\n";
            ++summary.computed;
        } catch (const std::exception& e) {
            rec["status"] = "failed";
            rec["error"] = e.what();
            rec["exit_code"] = exit_code_for(e);
            try {
                auto config = merge(base, runs[i]);
                rec["row"] = {{"variant", config.value("variant", std::string("SRSR"))},
                              {"reservoirs", config.value("reservoirs", std::size_t{1})},
                              {"neurons_per_reservoir", config.value("neurons_per_reservoir", std::size_t{10})},
                              {"ridge_instances", config["ridge_instances"].is_number() ? config["ridge_instances"].get<std::size_t>() : 0},
                              {"kernel_qubits", config["kernel_qubits"].is_number() ? config["kernel_qubits"].get<std::size_t>() : 0},
                              {"reservoir_kind", config.value("reservoir_kind", std::string("quantum"))},
                              {"readout_kind", config.value("readout_kind", std::string("quantum"))},
                              {"mode", config.value("mode", std::string("ideal"))}};
            } catch (const nlohmann::json::exception&) {
                rec.erase("row");
            }
            log << "[" << i + 1 << "/" << runs.size() << "] " << key << " FAILED: " << e.what() << "\n";
            ++summary.failed;
        }
        std::ofstream(journal, std::ios::app) << rec.dump() << '\n';
        records.push_back(std::move(rec));
    }
    write_sweep_outputs(o.out_dir, records);
    return summary;
}

void cmd_worker(const WorkerCommandOptions& o, std::ostream& log) {
    if (o.stdio == o.listen.has_value()) throw ConfigError("worker needs exactly one of --listen or --stdio");
    WorkerOptions options;
    if (o.calibration) options.default_noise = resolve_calibration(*o.calibration).noise_model();
    options.max_requests = o.max_requests;
    if (o.stdio) {
        worker_serve(0, 1, options);
        return;
    }
    TcpWorkerServer server(*o.listen, options);
    const auto colon = o.listen->rfind(':');
    log << "listening on " << o.listen->substr(0, colon) << ":" << server.port() << std::endl;
    server.serve();
}

}  // namespace dqrc::cli
