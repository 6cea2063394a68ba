#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "dqrc/backend.hpp"
#include "dqrc/data.hpp"
#include "dqrc/readout.hpp"
#include "dqrc/reservoir.hpp"

namespace dqrc {

/// Single/multiple reservoirs crossed with single/multiple ridge instances.
enum class Variant { SRSR, MRSR, SRMR, MRMR };

std::string_view to_string(Variant v);
Variant variant_from_string(std::string_view s);

struct ArchitectureConfig {
    Variant variant = Variant::SRSR;
    std::size_t num_reservoirs = 1;
    std::size_t neurons_per_reservoir = 10;
    std::size_t ridge_instances = 1;
    std::size_t kernel_qubits = 10;
    std::size_t kernel_blocks = 2;
    NeuronKind reservoir_kind = NeuronKind::quantum;
    ReadoutKind readout_kind = ReadoutKind::quantum;
    double lambda = kDefaultLambda;
    std::size_t passes = 3;
    std::uint64_t seed = 0;

    std::size_t total_neurons() const { return num_reservoirs * neurons_per_reservoir; }
    /// Throws ConfigError naming the violated rule.
    void validate() const;
};

/// Readout sizing used for the published grids: SRSR/MRSR use one instance
/// with n = 10; SRMR uses n = 5 when the reservoir has 10, 15 or 25 neurons
/// (giving 2, 3 or 5 instances) and n = 10 otherwise; MRMR uses one
/// instance per reservoir with the same n rule on the total neuron count.
void apply_default_readout_sizing(ArchitectureConfig& config);

void to_json(nlohmann::json& j, const ArchitectureConfig& c);

/// Work-unit placement: backend_of[unit] indexes the backend list.
struct Assignment {
    std::vector<std::size_t> backend_of;
    std::vector<std::size_t> counts(std::size_t num_backends) const;
};

/// With three backends and 1, 2, 3 or 5 units, reproduces the fixed
/// distribution (0,1,0), (1,1,0), (1,1,1), (2,2,1); otherwise round-robin
/// from backend 0.
Assignment assign_backends(std::size_t num_units, std::size_t num_backends);

struct Pipeline {
    ArchitectureConfig config;
    std::size_t window_size = 4;
    std::vector<ReservoirSpec> reservoirs;
    std::vector<FeatureSlice> slices;
};

/// Reservoir r is generated from derive_seed(config.seed, "reservoir", {r}).
/// Readout slices split the concatenated reservoir outputs contiguously, so
/// MRMR instance i reads exactly reservoir i.
Pipeline build_pipeline(const ArchitectureConfig& config, std::size_t window_size);

using BackendList = std::span<const std::shared_ptr<Backend>>;

struct ExecutionOptions {
    std::size_t workers = 1;
    std::size_t max_train_samples = 2000;
};

struct TrainedPipeline {
    Pipeline pipeline;
    MultiReadout readout;
    Assignment reservoir_placement;
    Assignment readout_placement;
    std::size_t train_samples = 0;
    std::size_t kernel_stride = 1;
};

/// Reservoir outputs for every sample, m x total_neurons. Reservoirs are
/// placed with assign_backends and executed as (reservoir, sample-block)
/// work units on `options.workers` threads. Shot seeds are derived from
/// (config seed, phase, reservoir, sample) only.
Eigen::MatrixXd reservoir_features(const Pipeline& pipeline, const WindowedDataset& data, BackendList backends,
                                   const ExecutionOptions& options, std::string_view phase);

TrainedPipeline train(const Pipeline& pipeline, const WindowedDataset& data, BackendList backends,
                      const ExecutionOptions& options);

std::vector<double> predict(const TrainedPipeline& trained, const WindowedDataset& data, BackendList backends,
                            const ExecutionOptions& options, std::string_view phase = "predict");

nlohmann::json trained_pipeline_to_json(const TrainedPipeline& trained);

/// Experiment config file. Keys: variant, reservoirs, neurons_per_reservoir,
/// ridge_instances, kernel_qubits, reservoir_kind, readout_kind, lambda,
/// passes, seed, backends[], shots, max_train_samples, dataset{...}; plus
/// optional workers and mode.
struct ExperimentConfig {
    ArchitectureConfig architecture;
    std::vector<BackendSpec> backends;
    std::optional<std::uint32_t> shots;
    ExecutionOptions execution;
    nlohmann::json dataset = nlohmann::json::object();

    bool noisy() const;
};

/// Throws ConfigError on unknown values or violated architecture rules.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& c);

/// Constructs the backends of a config (in-process or remote per endpoint).
std::vector<std::shared_ptr<Backend>> make_backends(const std::vector<BackendSpec>& specs);

}  // namespace dqrc
