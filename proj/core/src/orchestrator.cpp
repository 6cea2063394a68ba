#include "dqrc/orchestrator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "dqrc/error.hpp"
#include "dqrc/parallel.hpp"
#include "dqrc/seed.hpp"

namespace dqrc {

namespace {

constexpr std::size_t kSampleBlock = 32;

std::vector<Backend*> placed(const Assignment& a, BackendList backends) {
    std::vector<Backend*> out;
    out.reserve(a.backend_of.size());
    for (std::size_t b : a.backend_of) out.push_back(backends[b].get());
    return out;
}

bool quantum_readout(const ArchitectureConfig& c) { return c.readout_kind == ReadoutKind::quantum; }

ReadoutSettings readout_settings(const ArchitectureConfig& c) {
    return {c.readout_kind, c.lambda, c.kernel_qubits, c.kernel_blocks};
}

}  // namespace

std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::SRSR: return "SRSR";
        case Variant::MRSR: return "MRSR";
        case Variant::SRMR: return "SRMR";
        case Variant::MRMR: return "MRMR";
    }
    return "?";
}

Variant variant_from_string(std::string_view s) {
    for (Variant v : {Variant::SRSR, Variant::MRSR, Variant::SRMR, Variant::MRMR}) {
        if (s == to_string(v)) return v;
    }
    throw ConfigError("unknown variant '" + std::string(s) + "' (expected SRSR, MRSR, SRMR or MRMR)");
}

void ArchitectureConfig::validate() const {
    const std::string v(to_string(variant));
    if (num_reservoirs == 0) throw ConfigError("reservoirs must be >= 1");
    if (neurons_per_reservoir == 0) throw ConfigError("neurons_per_reservoir must be >= 1");
    if (ridge_instances == 0) throw ConfigError("ridge_instances must be >= 1");
    if ((variant == Variant::SRSR || variant == Variant::SRMR) && num_reservoirs != 1) {
        throw ConfigError(v + " requires reservoirs = 1");
    }
    if ((variant == Variant::SRSR || variant == Variant::MRSR) && ridge_instances != 1) {
        throw ConfigError(v + " requires ridge_instances = 1");
    }
    if (variant == Variant::MRMR && ridge_instances != num_reservoirs) {
        throw ConfigError("MRMR requires ridge_instances = reservoirs (each reservoir feeds one ridge instance)");
    }
    if (ridge_instances > total_neurons()) throw ConfigError("ridge_instances exceeds the total neuron count");
    if (kernel_qubits == 0 || kernel_qubits > kMaxCircuitQubits) {
        throw ConfigError("kernel_qubits must be in [1, " + std::to_string(kMaxCircuitQubits) + "]");
    }
    if (kernel_blocks == 0) throw ConfigError("kernel_blocks must be >= 1");
    if (passes == 0) throw ConfigError("passes must be >= 1");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be positive");
}

void apply_default_readout_sizing(ArchitectureConfig& c) {
    const std::size_t total = c.total_neurons();
    const bool small = total == 10 || total == 15 || total == 25;
    switch (c.variant) {
        case Variant::SRSR:
        case Variant::MRSR:
            c.ridge_instances = 1;
            c.kernel_qubits = 10;
            break;
        case Variant::SRMR:
            c.kernel_qubits = small ? 5 : 10;
            c.ridge_instances = std::max<std::size_t>(1, total / c.kernel_qubits);
            break;
        case Variant::MRMR:
            c.kernel_qubits = small ? 5 : 10;
            c.ridge_instances = c.num_reservoirs;
            break;
    }
}

void to_json(nlohmann::json& j, const ArchitectureConfig& c) {
    j = nlohmann::json{{"variant", to_string(c.variant)},
                       {"reservoirs", c.num_reservoirs},
                       {"neurons_per_reservoir", c.neurons_per_reservoir},
                       {"ridge_instances", c.ridge_instances},
                       {"kernel_qubits", c.kernel_qubits},
                       {"kernel_blocks", c.kernel_blocks},
                       {"reservoir_kind", to_string(c.reservoir_kind)},
                       {"readout_kind", to_string(c.readout_kind)},
                       {"lambda", c.lambda},
                       {"passes", c.passes},
                       {"seed", c.seed}};
}

std::vector<std::size_t> Assignment::counts(std::size_t num_backends) const {
    std::vector<std::size_t> out(num_backends, 0);
    for (std::size_t b : backend_of) ++out.at(b);
    return out;
}

Assignment assign_backends(std::size_t num_units, std::size_t num_backends) {
    if (num_backends == 0) throw ConfigError("no backends to assign work to");
    Assignment a;
    if (num_backends == 3) {
        static const std::array<std::pair<std::size_t, std::array<std::size_t, 3>>, 4> table{{
            {1, {0, 1, 0}},
            {2, {1, 1, 0}},
            {3, {1, 1, 1}},
            {5, {2, 2, 1}},
        }};
        for (const auto& [units, counts] : table) {
            if (units != num_units) continue;
            for (std::size_t b = 0; b < 3; ++b) a.backend_of.insert(a.backend_of.end(), counts[b], b);
            return a;
        }
    }
    for (std::size_t u = 0; u < num_units; ++u) a.backend_of.push_back(u % num_backends);
    return a;
}

Pipeline build_pipeline(const ArchitectureConfig& config, std::size_t window_size) {
    config.validate();
    if (window_size == 0) throw ConfigError("window size must be >= 1");
    Pipeline p{config, window_size, {}, split_features(config.total_neurons(), config.ridge_instances)};
    for (std::size_t r = 0; r < config.num_reservoirs; ++r) {
        p.reservoirs.push_back(generate_reservoir(config.neurons_per_reservoir, window_size, config.reservoir_kind,
                                                  derive_seed(config.seed, "reservoir", {r}), config.passes));
    }
    return p;
}

Eigen::MatrixXd reservoir_features(const Pipeline& pipeline, const WindowedDataset& data, BackendList backends,
                                   const ExecutionOptions& options, std::string_view phase) {
    if (data.window != pipeline.window_size) {
        throw DataError("dataset window " + std::to_string(data.window) + " does not match pipeline window " +
                        std::to_string(pipeline.window_size));
    }
    const auto& cfg = pipeline.config;
    const std::size_t m = data.size();
    const std::size_t reservoirs = pipeline.reservoirs.size();
    const std::size_t width = cfg.neurons_per_reservoir;
    const bool quantum = cfg.reservoir_kind == NeuronKind::quantum;
    if (quantum && backends.empty()) throw ConfigError("quantum reservoirs need at least one backend");

    std::vector<Backend*> target(reservoirs, nullptr);
    if (quantum) target = placed(assign_backends(reservoirs, backends.size()), backends);

    Eigen::MatrixXd features(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(reservoirs * width));
    const std::size_t blocks = (m + kSampleBlock - 1) / kSampleBlock;
    const std::uint64_t phase_seed = derive_seed(cfg.seed, phase);
    parallel_for(reservoirs * blocks, options.workers, [&](std::size_t unit) {
        const std::size_t r = unit / blocks;
        const std::size_t begin = (unit % blocks) * kSampleBlock;
        const std::size_t end = std::min(m, begin + kSampleBlock);
        for (std::size_t s = begin; s < end; ++s) {
            ReservoirState state;
            try {
                state = reservoir_forward(pipeline.reservoirs[r], data.row(s), target[r],
                                          derive_seed(phase_seed, "sample", {r, s}));
            } catch (const ServiceError& e) {
                throw ServiceError("reservoir " + std::to_string(r) + " on backend '" + target[r]->name() +
                                   "', sample " + std::to_string(s) + ": " + e.what());
            }
            for (std::size_t i = 0; i < width; ++i) {
                features(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(r * width + i)) = state.values[i];
            }
        }
    });
    return features;
}

TrainedPipeline train(const Pipeline& pipeline, const WindowedDataset& data, BackendList backends,
                      const ExecutionOptions& options) {
    if (data.size() == 0) throw DataError("training split is empty");
    const auto& cfg = pipeline.config;
    TrainedPipeline out;
    out.pipeline = pipeline;
    out.train_samples = data.size();
    if (cfg.reservoir_kind == NeuronKind::quantum) {
        out.reservoir_placement = assign_backends(pipeline.reservoirs.size(), backends.size());
    }

    const Eigen::MatrixXd features = reservoir_features(pipeline, data, backends, options, "train");
    const Eigen::VectorXd targets =
        Eigen::Map<const Eigen::VectorXd>(data.targets.data(), static_cast<Eigen::Index>(data.targets.size()));

    std::vector<Backend*> readout_backends;
    if (quantum_readout(cfg)) {
        if (backends.empty()) throw ConfigError("quantum readout needs at least one backend");
        out.readout_placement = assign_backends(pipeline.slices.size(), backends.size());
        readout_backends = placed(out.readout_placement, backends);
    }

    const std::uint64_t fit_seed = derive_seed(cfg.seed, "readout-fit");
    const std::size_t cap = std::max<std::size_t>(1, options.max_train_samples);
    if (quantum_readout(cfg) && data.size() > cap) {
        out.kernel_stride = (data.size() + cap - 1) / cap;
        std::vector<Eigen::Index> rows;
        for (std::size_t i = 0; i < data.size(); i += out.kernel_stride) rows.push_back(static_cast<Eigen::Index>(i));
        const Eigen::MatrixXd sub_features = features(rows, Eigen::all);
        const Eigen::VectorXd sub_targets = targets(rows);
        out.readout = multi_readout_fit(sub_features, sub_targets, pipeline.slices, readout_settings(cfg),
                                        readout_backends, fit_seed, options.workers);
    } else {
        out.readout = multi_readout_fit(features, targets, pipeline.slices, readout_settings(cfg), readout_backends,
                                        fit_seed, options.workers);
    }
    return out;
}

std::vector<double> predict(const TrainedPipeline& trained, const WindowedDataset& data, BackendList backends,
                            const ExecutionOptions& options, std::string_view phase) {
    if (data.size() == 0) return {};
    const auto& cfg = trained.pipeline.config;
    const Eigen::MatrixXd features = reservoir_features(trained.pipeline, data, backends, options, phase);
    std::vector<Backend*> readout_backends;
    if (quantum_readout(cfg)) {
        if (backends.empty()) throw ConfigError("quantum readout needs at least one backend");
        readout_backends = placed(assign_backends(trained.readout.models.size(), backends.size()), backends);
    }
    const Eigen::VectorXd pred = multi_readout_predict(trained.readout, features, readout_backends,
                                                       derive_seed(cfg.seed, "readout-predict", {fnv1a(phase)}),
                                                       options.workers);
    return {pred.begin(), pred.end()};
}

nlohmann::json trained_pipeline_to_json(const TrainedPipeline& t) {
    return nlohmann::json{{"config", t.pipeline.config},
                          {"window", t.pipeline.window_size},
                          {"reservoirs", t.pipeline.reservoirs},
                          {"readout", t.readout},
                          {"fingerprint",
                           {{"seed", t.pipeline.config.seed},
                            {"train_samples", t.train_samples},
                            {"kernel_stride", t.kernel_stride}}}};
}

bool ExperimentConfig::noisy() const {
    return std::any_of(backends.begin(), backends.end(),
                       [](const BackendSpec& b) { return b.mode == BackendMode::noisy; });
}

namespace {

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
    if (!j.contains(key) || j[key].is_null()) return fallback;
    try {
        return j[key].get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
}

BackendMode mode_from_string(const std::string& s) {
    if (s == "ideal") return BackendMode::ideal;
    if (s == "noisy") return BackendMode::noisy;
    throw ConfigError("unknown backend mode '" + s + "' (expected ideal or noisy)");
}

BackendSpec backend_from_json(const nlohmann::json& j, BackendMode default_mode) {
    BackendSpec b;
    if (j.is_string()) {
        b.name = j.get<std::string>();
        b.mode = default_mode;
    } else if (j.is_object()) {
        b.name = get_or<std::string>(j, "name", "local");
        b.mode = mode_from_string(get_or<std::string>(j, "mode", default_mode == BackendMode::noisy ? "noisy" : "ideal"));
        if (j.contains("shots") && !j["shots"].is_null()) b.shots = j["shots"].get<std::uint32_t>();
        b.endpoint = get_or<std::string>(j, "endpoint", "");
    } else {
        throw ConfigError("backend entries must be names or objects");
    }
    if (b.mode == BackendMode::noisy) {
        const std::string cal = j.is_object() ? get_or<std::string>(j, "calibration", b.name) : b.name;
        try {
            b.noise = resolve_calibration(cal).noise_model();
        } catch (const DataError& e) {
            throw ConfigError("backend '" + b.name + "': " + e.what());
        }
    }
    return b;
}

}  // namespace

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
    ExperimentConfig c;
    auto& a = c.architecture;
    a.variant = variant_from_string(get_or<std::string>(j, "variant", "SRSR"));
    a.num_reservoirs = get_or<std::size_t>(j, "reservoirs", 1);
    a.neurons_per_reservoir = get_or<std::size_t>(j, "neurons_per_reservoir", 10);
    a.reservoir_kind = neuron_kind_from_string(get_or<std::string>(j, "reservoir_kind", "quantum"));
    a.readout_kind = readout_kind_from_string(get_or<std::string>(j, "readout_kind", "quantum"));
    a.lambda = get_or<double>(j, "lambda", kDefaultLambda);
    a.passes = get_or<std::size_t>(j, "passes", 3);
    a.seed = get_or<std::uint64_t>(j, "seed", 0);
    a.kernel_blocks = get_or<std::size_t>(j, "kernel_blocks", 2);

    apply_default_readout_sizing(a);
    if (j.contains("ridge_instances") && j["ridge_instances"] != "auto") {
        a.ridge_instances = get_or<std::size_t>(j, "ridge_instances", a.ridge_instances);
    }
    if (j.contains("kernel_qubits") && j["kernel_qubits"] != "auto") {
        a.kernel_qubits = get_or<std::size_t>(j, "kernel_qubits", a.kernel_qubits);
    }
    a.validate();

    if (j.contains("shots") && !j["shots"].is_null()) c.shots = get_or<std::uint32_t>(j, "shots", 0);
    c.execution.max_train_samples = get_or<std::size_t>(j, "max_train_samples", 2000);
    c.execution.workers = std::max<std::size_t>(1, get_or<std::size_t>(j, "workers", 1));
    if (j.contains("dataset")) c.dataset = j["dataset"];

    const BackendMode default_mode = mode_from_string(get_or<std::string>(j, "mode", "ideal"));
    if (j.contains("backends")) {
        for (const auto& b : j["backends"]) c.backends.push_back(backend_from_json(b, default_mode));
    } else {
        for (const char* name : {"ibm_marrakesh", "ibm_brisbane", "ionq_aria1"}) {
            c.backends.push_back(backend_from_json(name, default_mode));
        }
    }
    for (auto& b : c.backends) {
        if (!b.shots) b.shots = c.shots;
        try {
            b.validate();
        } catch (const ValidationError& e) {
            throw ConfigError(e.what());
        }
    }
    return c;
}

nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json j = c.architecture;
    j["reservoirs"] = c.architecture.num_reservoirs;
    nlohmann::json backends = nlohmann::json::array();
    for (const auto& b : c.backends) {
        nlohmann::json bj{{"name", b.name}, {"mode", b.mode == BackendMode::noisy ? "noisy" : "ideal"}};
        if (b.noise) bj["noise"] = *b.noise;
        if (b.shots) bj["shots"] = *b.shots;
        if (!b.endpoint.empty()) bj["endpoint"] = b.endpoint;
        backends.push_back(std::move(bj));
    }
    j["backends"] = backends;
    j["shots"] = c.shots ? nlohmann::json(*c.shots) : nlohmann::json(nullptr);
    j["max_train_samples"] = c.execution.max_train_samples;
    j["dataset"] = c.dataset;
    return j;
}

std::vector<std::shared_ptr<Backend>> make_backends(const std::vector<BackendSpec>& specs) {
    std::vector<std::shared_ptr<Backend>> out;
    out.reserve(specs.size());
    for (const auto& s : specs) out.push_back(std::make_shared<Backend>(s));
    return out;
}

}  // namespace dqrc
