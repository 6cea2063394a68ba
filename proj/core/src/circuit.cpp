#include "dqrc/circuit.hpp"

#include <cmath>
#include <string>

#include <nlohmann/json.hpp>

#include "dqrc/error.hpp"

namespace dqrc {

Gate Gate::inverse() const {
    Gate g = *this;
    if (is_parameterized()) g.theta = -theta;
    return g;
}

void validate_gate(const Gate& g, std::size_t num_qubits) {
    if (g.target >= num_qubits) {
        throw StructuralError("gate target " + std::to_string(g.target) + " out of range for " +
                              std::to_string(num_qubits) + " qubits");
    }
    if (g.is_two_qubit()) {
        if (g.control >= num_qubits) {
            throw StructuralError("gate control " + std::to_string(g.control) +
                                  " out of range for " + std::to_string(num_qubits) + " qubits");
        }
        if (g.control == g.target) throw StructuralError("CNOT control equals target");
    }
    if (!std::isfinite(g.theta)) throw ValidationError("gate angle is not finite");
}

Circuit::Circuit(std::size_t num_qubits) : num_qubits_(num_qubits) {
    if (num_qubits == 0 || num_qubits > kMaxCircuitQubits) {
        throw CapacityError("circuit width must be in [1, " + std::to_string(kMaxCircuitQubits) +
                            "], got " + std::to_string(num_qubits));
    }
}

Circuit& Circuit::add(const Gate& g) {
    validate_gate(g, num_qubits_);
    gates_.push_back(g);
    return *this;
}

Circuit& Circuit::append(const Circuit& other) {
    if (other.num_qubits_ != num_qubits_) throw StructuralError("circuit width mismatch");
    gates_.insert(gates_.end(), other.gates_.begin(), other.gates_.end());
    return *this;
}

Circuit Circuit::inverse() const {
    Circuit out(num_qubits_);
    out.gates_.reserve(gates_.size());
    for (auto it = gates_.rbegin(); it != gates_.rend(); ++it) out.gates_.push_back(it->inverse());
    return out;
}

namespace {

const char* gate_tag(GateKind k) {
    switch (k) {
        case GateKind::RX: return "rx";
        case GateKind::RZ: return "rz";
        case GateKind::H: return "h";
        case GateKind::PHASE: return "p";
        case GateKind::CNOT: return "cx";
    }
    return "?";
}

}  // namespace

void to_json(nlohmann::json& j, const Gate& g) {
    j = nlohmann::json::object();
    j["g"] = gate_tag(g.kind);
    if (g.kind == GateKind::CNOT) {
        j["c"] = g.control;
        j["t"] = g.target;
    } else {
        j["q"] = g.target;
        if (g.is_parameterized()) j["theta"] = g.theta;
    }
}

void from_json(const nlohmann::json& j, Gate& g) {
    if (!j.is_object() || !j.contains("g")) throw ValidationError("gate must be an object with a \"g\" tag");
    const auto tag = j.at("g").get<std::string>();
    if (tag == "cx") {
        g = Gate::cnot(j.at("c").get<std::size_t>(), j.at("t").get<std::size_t>());
        return;
    }
    const auto q = j.at("q").get<std::size_t>();
    if (tag == "h") {
        g = Gate::h(q);
    } else if (tag == "rx") {
        g = Gate::rx(q, j.at("theta").get<double>());
    } else if (tag == "rz") {
        g = Gate::rz(q, j.at("theta").get<double>());
    } else if (tag == "p") {
        g = Gate::phase(q, j.at("theta").get<double>());
    } else {
        throw ValidationError("unknown gate tag '" + tag + "'");
    }
}

void to_json(nlohmann::json& j, const Circuit& c) {
    j = nlohmann::json{{"qubits", c.num_qubits()}, {"gates", c.gates()}};
}

Circuit circuit_from_json(const nlohmann::json& j) {
    try {
        Circuit c(j.at("qubits").get<std::size_t>());
        for (const auto& gj : j.at("gates")) c.add(gj.get<Gate>());
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed circuit: ") + e.what());
    }
}

}  // namespace dqrc
