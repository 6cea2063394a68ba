#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "dqrc/backend.hpp"
#include "dqrc/circuit.hpp"

namespace dqrc {

/// Fixed ansatz weights of one quantum neuron, row-major num_blocks x num_qubits.
struct NeuronParams {
    std::size_t num_qubits = 4;
    std::size_t num_blocks = 2;
    std::vector<double> weights;

    double weight(std::size_t block, std::size_t qubit) const { return weights[block * num_qubits + qubit]; }
    void validate() const;

    static NeuronParams zeros(std::size_t num_qubits = 4, std::size_t num_blocks = 2);
    /// Weights uniform in [0, 2*pi) from a stream seeded by `seed`.
    static NeuronParams random(std::uint64_t seed, std::size_t num_qubits = 4, std::size_t num_blocks = 2);

    friend bool operator==(const NeuronParams&, const NeuronParams&) = default;
};

void to_json(nlohmann::json& j, const NeuronParams& p);
void from_json(const nlohmann::json& j, NeuronParams& p);

/// Angle-encoding feature map: RX(angles[q]) on qubit q, in qubit order.
Circuit build_feature_map(std::span<const double> angles, std::size_t num_qubits);

/// For each block: RX(w_j) on every qubit, then for each adjacent pair
/// (i-1, i): CNOT(i-1 -> i), RZ(w_i - w_{i-1}) on i, CNOT(i-1 -> i).
Circuit build_ansatz(const NeuronParams& params);

/// Feature map followed by ansatz.
Circuit build_neuron_circuit(const NeuronParams& params, std::span<const double> angles);

/// <Z> of `observable_qubit` after feature map and ansatz, evaluated on `backend`.
double neuron_forward(const NeuronParams& params, std::span<const double> angles, Backend& backend,
                      std::uint64_t seed = 0, std::size_t observable_qubit = 0);

}  // namespace dqrc
