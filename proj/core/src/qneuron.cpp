#include "dqrc/qneuron.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include <nlohmann/json.hpp>

#include "dqrc/error.hpp"

namespace dqrc {

void NeuronParams::validate() const {
    if (num_qubits == 0 || num_blocks == 0) throw ValidationError("neuron needs at least one qubit and one block");
    if (weights.size() != num_qubits * num_blocks) {
        throw ValidationError("neuron weights must have shape " + std::to_string(num_blocks) + " x " +
                              std::to_string(num_qubits));
    }
    for (double w : weights) {
        if (!std::isfinite(w)) throw ValidationError("neuron weight is not finite");
    }
}

NeuronParams NeuronParams::zeros(std::size_t num_qubits, std::size_t num_blocks) {
    return {num_qubits, num_blocks, std::vector<double>(num_qubits * num_blocks, 0.0)};
}

NeuronParams NeuronParams::random(std::uint64_t seed, std::size_t num_qubits, std::size_t num_blocks) {
    NeuronParams p{num_qubits, num_blocks, std::vector<double>(num_qubits * num_blocks)};
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    for (double& w : p.weights) w = angle(rng);
    return p;
}

void to_json(nlohmann::json& j, const NeuronParams& p) {
    j = nlohmann::json{{"qubits", p.num_qubits}, {"blocks", p.num_blocks}, {"weights", p.weights}};
}

void from_json(const nlohmann::json& j, NeuronParams& p) {
    p.num_qubits = j.at("qubits").get<std::size_t>();
    p.num_blocks = j.at("blocks").get<std::size_t>();
    p.weights = j.at("weights").get<std::vector<double>>();
    p.validate();
}

Circuit build_feature_map(std::span<const double> angles, std::size_t num_qubits) {
    if (angles.size() != num_qubits) {
        throw ValidationError("neuron expects " + std::to_string(num_qubits) + " input angles, got " +
                              std::to_string(angles.size()));
    }
    Circuit c(num_qubits);
    for (std::size_t q = 0; q < num_qubits; ++q) c.add(Gate::rx(q, angles[q]));
    return c;
}

Circuit build_ansatz(const NeuronParams& params) {
    params.validate();
    const std::size_t n = params.num_qubits;
    Circuit c(n);
    for (std::size_t k = 0; k < params.num_blocks; ++k) {
        for (std::size_t j = 0; j < n; ++j) c.add(Gate::rx(j, params.weight(k, j)));
        for (std::size_t i = 1; i < n; ++i) {
            c.add(Gate::cnot(i - 1, i));
            c.add(Gate::rz(i, params.weight(k, i) - params.weight(k, i - 1)));
            c.add(Gate::cnot(i - 1, i));
        }
    }
    return c;
}

Circuit build_neuron_circuit(const NeuronParams& params, std::span<const double> angles) {
    Circuit c = build_feature_map(angles, params.num_qubits);
    c.append(build_ansatz(params));
    return c;
}

double neuron_forward(const NeuronParams& params, std::span<const double> angles, Backend& backend,
                      std::uint64_t seed, std::size_t observable_qubit) {
    return backend.expectation(build_neuron_circuit(params, angles), observable_qubit, seed);
}

}  // namespace dqrc
