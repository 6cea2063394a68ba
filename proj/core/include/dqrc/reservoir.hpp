#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "dqrc/backend.hpp"
#include "dqrc/qneuron.hpp"

namespace dqrc {

inline constexpr std::size_t kNeuronInputs = 4;
inline constexpr std::size_t kMaxRecurrentInputs = 2;

enum class NeuronKind { quantum, classical };

std::string_view to_string(NeuronKind k);
NeuronKind neuron_kind_from_string(std::string_view s);

/// Where a neuron's four inputs come from: feature taps (window slots) fill
/// the low qubits, recurrent sources (other neurons' previous outputs) the rest.
struct NeuronWiring {
    std::vector<std::size_t> sources;
    std::vector<std::size_t> feature_taps;

    std::size_t recurrent_degree() const { return sources.size(); }
    friend bool operator==(const NeuronWiring&, const NeuronWiring&) = default;
};

struct ReservoirSpec {
    std::size_t num_neurons = 0;
    std::size_t window_size = 0;
    NeuronKind kind = NeuronKind::quantum;
    std::vector<NeuronWiring> wiring;
    std::vector<NeuronParams> quantum_params;                          // quantum kind
    std::vector<std::array<double, kNeuronInputs>> classical_weights;  // classical kind
    std::size_t passes = 3;
    std::size_t observable_qubit = 0;
    std::uint64_t seed = 0;

    void validate() const;
    friend bool operator==(const ReservoirSpec&, const ReservoirSpec&) = default;
};

void to_json(nlohmann::json& j, const ReservoirSpec& s);
void from_json(const nlohmann::json& j, ReservoirSpec& s);

struct ReservoirState {
    std::vector<double> values;
    friend bool operator==(const ReservoirState&, const ReservoirState&) = default;
};

/// Random fixed topology. Per neuron: recurrent degree k uniform on {0,1,2}
/// (capped at N-1), k distinct sources among the other neurons, 4-k feature
/// taps drawn with replacement from the window. Fully determined by `seed`.
ReservoirSpec generate_reservoir(std::size_t num_neurons, std::size_t window_size, NeuronKind kind,
                                 std::uint64_t seed, std::size_t passes = 3);

/// The four input angles of `neuron` given the window and the previous pass.
std::array<double, kNeuronInputs> neuron_inputs(const NeuronWiring& wiring, std::span<const double> window,
                                                std::span<const double> previous);

/// Synchronous multi-pass propagation from an all-zero state. Quantum
/// reservoirs dispatch one batch of N circuits per pass to `backend`; the
/// shot seed of neuron i in pass p is derive_seed(sample_seed, "neuron", {p, i}).
/// Classical reservoirs ignore the backend (may be null).
ReservoirState reservoir_forward(const ReservoirSpec& spec, std::span<const double> window, Backend* backend,
                                 std::uint64_t sample_seed = 0);

/// Vertical concatenation in reservoir order.
ReservoirState concat_states(std::span<const ReservoirState> states);

}  // namespace dqrc
