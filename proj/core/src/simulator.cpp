#include "dqrc/simulator.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <string>

#include "dqrc/error.hpp"

namespace dqrc {

namespace {

struct Mat2 {
    cplx m00, m01, m10, m11;
    Mat2 conj() const { return {std::conj(m00), std::conj(m01), std::conj(m10), std::conj(m11)}; }
};

// Kernels over a raw amplitude array; `bit` addresses the basis-index bit.

void apply_dense(std::span<cplx> amps, std::size_t bit, const Mat2& m) {
    const std::size_t stride = std::size_t{1} << bit;
    const std::size_t n = amps.size();
    for (std::size_t base = 0; base < n; base += 2 * stride) {
        for (std::size_t i = base; i < base + stride; ++i) {
            const cplx a = amps[i];
            const cplx b = amps[i + stride];
            amps[i] = m.m00 * a + m.m01 * b;
            amps[i + stride] = m.m10 * a + m.m11 * b;
        }
    }
}

void apply_diag(std::span<cplx> amps, std::size_t bit, cplx d0, cplx d1) {
    const std::size_t stride = std::size_t{1} << bit;
    const std::size_t n = amps.size();
    for (std::size_t base = 0; base < n; base += 2 * stride) {
        for (std::size_t i = base; i < base + stride; ++i) {
            amps[i] *= d0;
            amps[i + stride] *= d1;
        }
    }
}

// PHASE leaves the |0> amplitude untouched.
void apply_phase(std::span<cplx> amps, std::size_t bit, cplx d1) {
    const std::size_t stride = std::size_t{1} << bit;
    const std::size_t n = amps.size();
    for (std::size_t base = 0; base < n; base += 2 * stride) {
        for (std::size_t i = base + stride; i < base + 2 * stride; ++i) amps[i] *= d1;
    }
}

void apply_cnot(std::span<cplx> amps, std::size_t cbit, std::size_t tbit) {
    const std::size_t cmask = std::size_t{1} << cbit;
    const std::size_t tmask = std::size_t{1} << tbit;
    for (std::size_t i = 0; i < amps.size(); ++i) {
        if ((i & cmask) && !(i & tmask)) std::swap(amps[i], amps[i | tmask]);
    }
}

Mat2 rx_matrix(double theta) {
    const double c = std::cos(theta / 2);
    const double s = std::sin(theta / 2);
    return {c, cplx(0, -s), cplx(0, -s), c};
}

void apply_on_bits(std::span<cplx> amps, const Gate& g, std::size_t offset, bool conjugate) {
    const std::size_t t = g.target + offset;
    switch (g.kind) {
        case GateKind::RX: {
            const Mat2 m = rx_matrix(g.theta);
            apply_dense(amps, t, conjugate ? m.conj() : m);
            break;
        }
        case GateKind::H: {
            const double r = 1.0 / std::sqrt(2.0);
            apply_dense(amps, t, {r, r, r, -r});
            break;
        }
        case GateKind::RZ: {
            cplx d0 = std::polar(1.0, -g.theta / 2);
            cplx d1 = std::polar(1.0, g.theta / 2);
            if (conjugate) std::swap(d0, d1);
            apply_diag(amps, t, d0, d1);
            break;
        }
        case GateKind::PHASE: {
            const cplx d1 = std::polar(1.0, conjugate ? -g.theta : g.theta);
            apply_phase(amps, t, d1);
            break;
        }
        case GateKind::CNOT:
            apply_cnot(amps, g.control + offset, t);
            break;
    }
}

void check_qubit(std::size_t qubit, std::size_t n) {
    if (qubit >= n) {
        throw StructuralError("qubit " + std::to_string(qubit) + " out of range for " +
                              std::to_string(n) + " qubits");
    }
}

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

double confused(double p, double p_ro) { return p * (1.0 - p_ro) + (1.0 - p) * p_ro; }

std::uint64_t sample_count(double p, std::uint32_t shots, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::binomial_distribution<std::uint64_t> dist(shots, clamp01(p));
    return dist(rng);
}

void check_shots(const std::optional<std::uint32_t>& shots) {
    if (shots && *shots == 0) throw ValidationError("shots must be positive");
}

}  // namespace

StateVector::StateVector(std::size_t num_qubits)
    : num_qubits_(num_qubits), amps_(std::size_t{1} << num_qubits) {
    if (num_qubits == 0 || num_qubits > kMaxCircuitQubits) {
        throw CapacityError("state width must be in [1, " + std::to_string(kMaxCircuitQubits) + "]");
    }
    amps_[0] = 1.0;
}

StateVector StateVector::from_amplitudes(std::vector<cplx> amplitudes) {
    const std::size_t n = amplitudes.size();
    if (n < 2 || !std::has_single_bit(n)) throw ValidationError("amplitude count must be a power of two >= 2");
    StateVector s(static_cast<std::size_t>(std::countr_zero(n)));
    s.amps_ = std::move(amplitudes);
    return s;
}

double StateVector::norm_sq() const {
    double acc = 0.0;
    for (const cplx& a : amps_) acc += std::norm(a);
    return acc;
}

DensityMatrix::DensityMatrix(std::size_t num_qubits) : num_qubits_(num_qubits) {
    if (num_qubits == 0 || num_qubits > kMaxDensityQubits) {
        throw CapacityError("density-matrix width must be in [1, " + std::to_string(kMaxDensityQubits) +
                            "], got " + std::to_string(num_qubits));
    }
    entries_.assign(dim() * dim(), cplx{});
    entries_[0] = 1.0;
}

DensityMatrix DensityMatrix::pure(const StateVector& psi) {
    DensityMatrix rho(psi.num_qubits());
    const auto a = psi.amplitudes();
    const std::size_t d = rho.dim();
    for (std::size_t r = 0; r < d; ++r) {
        for (std::size_t c = 0; c < d; ++c) rho.entries_[r * d + c] = a[r] * std::conj(a[c]);
    }
    return rho;
}

cplx DensityMatrix::trace() const {
    cplx t{};
    for (std::size_t i = 0; i < dim(); ++i) t += entries_[i * dim() + i];
    return t;
}

std::vector<double> DensityMatrix::probabilities() const {
    std::vector<double> p(dim());
    for (std::size_t i = 0; i < dim(); ++i) p[i] = entries_[i * dim() + i].real();
    return p;
}

void apply_gate(StateVector& state, const Gate& gate) {
    validate_gate(gate, state.num_qubits());
    apply_on_bits(state.amplitudes(), gate, 0, false);
}

void run_circuit(const Circuit& circuit, StateVector& state) {
    if (circuit.num_qubits() != state.num_qubits()) throw StructuralError("circuit/state width mismatch");
    // Gates were validated when added to the circuit.
    for (const Gate& g : circuit.gates()) apply_on_bits(state.amplitudes(), g, 0, false);
}

StateVector run_circuit(const Circuit& circuit) {
    StateVector s(circuit.num_qubits());
    run_circuit(circuit, s);
    return s;
}

double expectation_z(const StateVector& state, std::size_t qubit) {
    check_qubit(qubit, state.num_qubits());
    const std::size_t mask = std::size_t{1} << qubit;
    const auto a = state.amplitudes();
    double acc = 0.0;
    for (std::size_t b = 0; b < a.size(); ++b) acc += (b & mask) ? -std::norm(a[b]) : std::norm(a[b]);
    return std::clamp(acc, -1.0, 1.0);
}

double overlap_sq(const StateVector& a, const StateVector& b) {
    if (a.num_qubits() != b.num_qubits()) throw StructuralError("overlap of states with different widths");
    const auto x = a.amplitudes();
    const auto y = b.amplitudes();
    cplx acc{};
    for (std::size_t i = 0; i < x.size(); ++i) acc += std::conj(x[i]) * y[i];
    return clamp01(std::norm(acc));
}

void apply_gate(DensityMatrix& rho, const Gate& gate) {
    validate_gate(gate, rho.num_qubits());
    const std::size_t n = rho.num_qubits();
    apply_on_bits(rho.entries(), gate, n, false);
    apply_on_bits(rho.entries(), gate, 0, true);
}

void apply_depolarizing(DensityMatrix& rho, std::span<const std::size_t> qubits, double p) {
    if (qubits.empty() || qubits.size() > 2) throw ValidationError("depolarizing acts on 1 or 2 qubits");
    if (!(p >= 0.0 && p < 1.0)) throw ValidationError("depolarizing probability must lie in [0, 1)");
    const std::size_t n = rho.num_qubits();
    std::size_t mask = 0;
    for (std::size_t q : qubits) {
        check_qubit(q, n);
        mask |= std::size_t{1} << q;
    }
    if (qubits.size() == 2 && qubits[0] == qubits[1]) throw StructuralError("depolarizing qubits must differ");
    if (p == 0.0) return;

    // Enumerate the 2^k settings of the masked bits.
    std::vector<std::size_t> settings{0};
    for (std::size_t q : qubits) {
        const std::size_t count = settings.size();
        for (std::size_t i = 0; i < count; ++i) settings.push_back(settings[i] | (std::size_t{1} << q));
    }
    const double share = p / static_cast<double>(settings.size());
    const std::size_t d = rho.dim();
    auto e = rho.entries();
    for (std::size_t r = 0; r < d; ++r) {
        if (r & mask) continue;
        for (std::size_t c = 0; c < d; ++c) {
            if (c & mask) continue;
            cplx partial{};
            for (std::size_t s : settings) partial += e[(r | s) * d + (c | s)];
            for (std::size_t s1 : settings) {
                for (std::size_t s2 : settings) {
                    cplx& v = e[(r | s1) * d + (c | s2)];
                    v *= (1.0 - p);
                    if (s1 == s2) v += share * partial;
                }
            }
        }
    }
}

DensityMatrix run_circuit_noisy(const Circuit& circuit, const NoiseModel& noise) {
    noise.validate();
    DensityMatrix rho(circuit.num_qubits());
    for (const Gate& g : circuit.gates()) {
        apply_gate(rho, g);
        if (g.is_two_qubit()) {
            const std::size_t qs[2] = {g.control, g.target};
            apply_depolarizing(rho, qs, noise.p2);
        } else {
            const std::size_t qs[1] = {g.target};
            apply_depolarizing(rho, qs, noise.p1);
        }
    }
    return rho;
}

double noisy_expectation_z(const DensityMatrix& rho, std::size_t qubit, const NoiseModel& noise,
                           std::optional<std::uint32_t> shots, std::uint64_t seed) {
    check_qubit(qubit, rho.num_qubits());
    check_shots(shots);
    noise.validate();
    const std::size_t mask = std::size_t{1} << qubit;
    const auto probs = rho.probabilities();
    double p0 = 0.0;
    for (std::size_t b = 0; b < probs.size(); ++b) {
        if (!(b & mask)) p0 += probs[b];
    }
    const double observed = confused(clamp01(p0), noise.p_readout);
    if (!shots) return 2.0 * observed - 1.0;
    const auto zeros = sample_count(observed, *shots, seed);
    return (2.0 * static_cast<double>(zeros) - *shots) / *shots;
}

double fidelity_via_uncompute(const Circuit& a, const Circuit& b, const std::optional<NoiseModel>& noise,
                              std::optional<std::uint32_t> shots, std::uint64_t seed) {
    if (a.num_qubits() != b.num_qubits()) throw StructuralError("fidelity of circuits with different widths");
    check_shots(shots);
    Circuit composed = b;
    composed.append(a.inverse());

    double p_zero = 0.0;
    if (!noise) {
        p_zero = clamp01(std::norm(run_circuit(composed).amplitudes()[0]));
    } else {
        const DensityMatrix rho = run_circuit_noisy(composed, *noise);
        const auto probs = rho.probabilities();
        const std::size_t n = composed.num_qubits();
        for (std::size_t s = 0; s < probs.size(); ++s) {
            const int ones = std::popcount(s);
            p_zero += probs[s] * std::pow(noise->p_readout, ones) *
                      std::pow(1.0 - noise->p_readout, static_cast<int>(n) - ones);
        }
        p_zero = clamp01(p_zero);
    }
    if (!shots) return p_zero;
    return static_cast<double>(sample_count(p_zero, *shots, seed)) / *shots;
}

}  // namespace dqrc
