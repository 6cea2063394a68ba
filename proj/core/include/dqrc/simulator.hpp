#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dqrc/circuit.hpp"
#include "dqrc/noise.hpp"

namespace dqrc {

using cplx = std::complex<double>;

class StateVector {
  public:
    /// |0...0> on `num_qubits` qubits.
    explicit StateVector(std::size_t num_qubits);
    /// Takes ownership of explicit amplitudes; size must be a power of two.
    static StateVector from_amplitudes(std::vector<cplx> amplitudes);

    std::size_t num_qubits() const { return num_qubits_; }
    std::size_t dim() const { return amps_.size(); }
    std::span<const cplx> amplitudes() const { return amps_; }
    std::span<cplx> amplitudes() { return amps_; }
    double norm_sq() const;

  private:
    std::size_t num_qubits_;
    std::vector<cplx> amps_;
};

inline constexpr std::size_t kMaxDensityQubits = 10;

/// Dense row-major density matrix. Internally the 4^n entries are addressed
/// as a 2n-qubit vector (row bits high, column bits low) so gates reuse the
/// statevector kernels: U on the row bits, conj(U) on the column bits.
class DensityMatrix {
  public:
    explicit DensityMatrix(std::size_t num_qubits);
    static DensityMatrix pure(const StateVector& psi);

    std::size_t num_qubits() const { return num_qubits_; }
    std::size_t dim() const { return std::size_t{1} << num_qubits_; }
    cplx operator()(std::size_t row, std::size_t col) const { return entries_[row * dim() + col]; }
    std::span<const cplx> entries() const { return entries_; }
    std::span<cplx> entries() { return entries_; }

    cplx trace() const;
    /// Real part of the diagonal.
    std::vector<double> probabilities() const;

  private:
    std::size_t num_qubits_;
    std::vector<cplx> entries_;
};

// Statevector path.
void apply_gate(StateVector& state, const Gate& gate);
StateVector run_circuit(const Circuit& circuit);
/// Applies the circuit on top of an existing state.
void run_circuit(const Circuit& circuit, StateVector& state);
double expectation_z(const StateVector& state, std::size_t qubit);
/// |<a|b>|^2 clamped to [0, 1].
double overlap_sq(const StateVector& a, const StateVector& b);

// Density-matrix path.
void apply_gate(DensityMatrix& rho, const Gate& gate);
/// rho -> (1 - p) rho + p * (I/2^k (x) Tr_{qubits} rho), k = qubits.size() in {1, 2}.
void apply_depolarizing(DensityMatrix& rho, std::span<const std::size_t> qubits, double p);
DensityMatrix run_circuit_noisy(const Circuit& circuit, const NoiseModel& noise);

/// <Z_qubit> with each outcome passed through the symmetric readout
/// confusion. With `shots`, draws a seeded binomial sample instead.
double noisy_expectation_z(const DensityMatrix& rho, std::size_t qubit, const NoiseModel& noise,
                           std::optional<std::uint32_t> shots, std::uint64_t seed);

/// Compute-uncompute estimate of |<a|b>|^2: runs b followed by a^dagger and
/// reads the all-zeros probability. Without noise this is the exact
/// statevector probability; with noise the composed circuit is evolved as a
/// density matrix and each qubit's readout passes through the confusion map.
double fidelity_via_uncompute(const Circuit& a, const Circuit& b,
                              const std::optional<NoiseModel>& noise,
                              std::optional<std::uint32_t> shots, std::uint64_t seed);

}  // namespace dqrc
