#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace dqrc {

enum class GateKind { RX, RZ, H, PHASE, CNOT };

/// Single gate. `theta` is meaningful for RX/RZ/PHASE, `control` for CNOT.
///
/// Conventions: RX(t) = exp(-i t X / 2), RZ(t) = exp(-i t Z / 2),
/// PHASE(t) = diag(1, e^{it}). Qubit q is bit q of the basis index.
struct Gate {
    GateKind kind = GateKind::H;
    double theta = 0.0;
    std::size_t target = 0;
    std::size_t control = 0;

    static Gate rx(std::size_t q, double theta) { return {GateKind::RX, theta, q, 0}; }
    static Gate rz(std::size_t q, double theta) { return {GateKind::RZ, theta, q, 0}; }
    static Gate h(std::size_t q) { return {GateKind::H, 0.0, q, 0}; }
    static Gate phase(std::size_t q, double theta) { return {GateKind::PHASE, theta, q, 0}; }
    static Gate cnot(std::size_t c, std::size_t t) { return {GateKind::CNOT, 0.0, t, c}; }

    bool is_two_qubit() const { return kind == GateKind::CNOT; }
    bool is_parameterized() const {
        return kind == GateKind::RX || kind == GateKind::RZ || kind == GateKind::PHASE;
    }
    Gate inverse() const;

    friend bool operator==(const Gate&, const Gate&) = default;
};

inline constexpr std::size_t kMaxCircuitQubits = 12;

/// Ordered gate list on a fixed register. Gates are validated on insertion:
/// a Circuit is always well formed.
class Circuit {
  public:
    explicit Circuit(std::size_t num_qubits);

    std::size_t num_qubits() const { return num_qubits_; }
    const std::vector<Gate>& gates() const { return gates_; }
    std::size_t size() const { return gates_.size(); }
    bool empty() const { return gates_.empty(); }

    Circuit& add(const Gate& g);
    Circuit& append(const Circuit& other);

    /// Gate-wise inverse in reverse order.
    Circuit inverse() const;

    friend bool operator==(const Circuit&, const Circuit&) = default;

  private:
    std::size_t num_qubits_;
    std::vector<Gate> gates_;
};

/// Checks a gate against a register width; throws StructuralError or ValidationError.
void validate_gate(const Gate& g, std::size_t num_qubits);

// Wire format: {"qubits": n, "gates": [{"g":"rx","q":0,"theta":1.57}, {"g":"cx","c":0,"t":1}, ...]}
void to_json(nlohmann::json& j, const Gate& g);
void from_json(const nlohmann::json& j, Gate& g);
void to_json(nlohmann::json& j, const Circuit& c);
Circuit circuit_from_json(const nlohmann::json& j);

}  // namespace dqrc
