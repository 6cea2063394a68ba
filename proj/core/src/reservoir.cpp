#include "dqrc/reservoir.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include <nlohmann/json.hpp>

#include "dqrc/error.hpp"
#include "dqrc/seed.hpp"

namespace dqrc {

std::string_view to_string(NeuronKind k) { return k == NeuronKind::quantum ? "quantum" : "classical"; }

NeuronKind neuron_kind_from_string(std::string_view s) {
    if (s == "quantum") return NeuronKind::quantum;
    if (s == "classical") return NeuronKind::classical;
    throw ConfigError("unknown kind '" + std::string(s) + "' (expected quantum or classical)");
}

void ReservoirSpec::validate() const {
    if (num_neurons == 0) throw ValidationError("reservoir needs at least one neuron");
    if (window_size == 0) throw ValidationError("reservoir window size must be positive");
    if (passes == 0) throw ValidationError("reservoir needs at least one pass");
    if (wiring.size() != num_neurons) throw ValidationError("wiring count does not match neuron count");
    if (observable_qubit >= kNeuronInputs) throw ValidationError("observable qubit out of range");
    for (std::size_t i = 0; i < num_neurons; ++i) {
        const auto& w = wiring[i];
        if (w.sources.size() + w.feature_taps.size() != kNeuronInputs) {
            throw ValidationError("neuron " + std::to_string(i) + " does not have exactly 4 inputs");
        }
        if (w.sources.size() > kMaxRecurrentInputs) {
            throw ValidationError("neuron " + std::to_string(i) + " has more than 2 recurrent inputs");
        }
        for (std::size_t s : w.sources) {
            if (s >= num_neurons || s == i) throw ValidationError("neuron " + std::to_string(i) + " has an invalid source");
        }
        if (w.sources.size() == 2 && w.sources[0] == w.sources[1]) {
            throw ValidationError("neuron " + std::to_string(i) + " has duplicate sources");
        }
        for (std::size_t t : w.feature_taps) {
            if (t >= window_size) throw ValidationError("neuron " + std::to_string(i) + " taps outside the window");
        }
    }
    if (kind == NeuronKind::quantum) {
        if (quantum_params.size() != num_neurons) throw ValidationError("quantum params count mismatch");
        for (const auto& p : quantum_params) {
            p.validate();
            if (p.num_qubits != kNeuronInputs) throw ValidationError("quantum neurons must have 4 qubits");
        }
    } else {
        if (classical_weights.size() != num_neurons) throw ValidationError("classical weights count mismatch");
    }
}

ReservoirSpec generate_reservoir(std::size_t num_neurons, std::size_t window_size, NeuronKind kind,
                                 std::uint64_t seed, std::size_t passes) {
    if (num_neurons == 0) throw ValidationError("reservoir needs at least one neuron");
    if (window_size == 0) throw ValidationError("reservoir window size must be positive");
    ReservoirSpec spec;
    spec.num_neurons = num_neurons;
    spec.window_size = window_size;
    spec.kind = kind;
    spec.passes = passes;
    spec.seed = seed;

    std::mt19937_64 topo(derive_seed(seed, "topology"));
    const std::size_t max_k = std::min(kMaxRecurrentInputs, num_neurons - 1);
    for (std::size_t i = 0; i < num_neurons; ++i) {
        NeuronWiring w;
        std::size_t k = std::uniform_int_distribution<std::size_t>(0, kMaxRecurrentInputs)(topo);
        k = std::min(k, max_k);
        std::vector<std::size_t> others;
        others.reserve(num_neurons - 1);
        for (std::size_t j = 0; j < num_neurons; ++j) {
            if (j != i) others.push_back(j);
        }
        // Partial Fisher-Yates: first k entries are a uniform draw without replacement.
        for (std::size_t s = 0; s < k; ++s) {
            const std::size_t pick = std::uniform_int_distribution<std::size_t>(s, others.size() - 1)(topo);
            std::swap(others[s], others[pick]);
            w.sources.push_back(others[s]);
        }
        std::uniform_int_distribution<std::size_t> tap(0, window_size - 1);
        for (std::size_t t = 0; t < kNeuronInputs - k; ++t) w.feature_taps.push_back(tap(topo));
        spec.wiring.push_back(std::move(w));
    }

    for (std::size_t i = 0; i < num_neurons; ++i) {
        const std::uint64_t ns = derive_seed(seed, "weights", {i});
        if (kind == NeuronKind::quantum) {
            spec.quantum_params.push_back(NeuronParams::random(ns, kNeuronInputs, 2));
        } else {
            std::mt19937_64 rng(ns);
            std::uniform_real_distribution<double> u(-1.0, 1.0);
            std::array<double, kNeuronInputs> w{};
            for (double& x : w) x = u(rng);
            spec.classical_weights.push_back(w);
        }
    }
    return spec;
}

std::array<double, kNeuronInputs> neuron_inputs(const NeuronWiring& wiring, std::span<const double> window,
                                                std::span<const double> previous) {
    std::array<double, kNeuronInputs> in{};
    std::size_t q = 0;
    for (std::size_t t : wiring.feature_taps) in[q++] = window[t];
    for (std::size_t s : wiring.sources) in[q++] = previous[s];
    return in;
}

ReservoirState reservoir_forward(const ReservoirSpec& spec, std::span<const double> window, Backend* backend,
                                 std::uint64_t sample_seed) {
    if (window.size() != spec.window_size) {
        throw ValidationError("window has " + std::to_string(window.size()) + " values, reservoir expects " +
                              std::to_string(spec.window_size));
    }
    for (double v : window) {
        if (!std::isfinite(v)) throw ValidationError("window value is not finite");
    }
    const std::size_t n = spec.num_neurons;
    if (spec.kind == NeuronKind::quantum && !backend) throw ConfigError("quantum reservoir needs a backend");

    std::vector<double> prev(n, 0.0);
    std::vector<double> next(n, 0.0);
    std::vector<Circuit> circuits;
    std::vector<std::uint64_t> seeds(n);
    for (std::size_t pass = 0; pass < spec.passes; ++pass) {
        if (spec.kind == NeuronKind::classical) {
            for (std::size_t i = 0; i < n; ++i) {
                const auto in = neuron_inputs(spec.wiring[i], window, prev);
                const auto& w = spec.classical_weights[i];
                next[i] = std::tanh(std::inner_product(w.begin(), w.end(), in.begin(), 0.0));
            }
        } else {
            circuits.clear();
            for (std::size_t i = 0; i < n; ++i) {
                const auto in = neuron_inputs(spec.wiring[i], window, prev);
                circuits.push_back(build_neuron_circuit(spec.quantum_params[i], in));
                seeds[i] = derive_seed(sample_seed, "neuron", {pass, i});
            }
            try {
                const auto values = backend->expectations(circuits, spec.observable_qubit, seeds);
                std::copy(values.begin(), values.end(), next.begin());
            } catch (const ServiceError& e) {
                throw ServiceError(std::string("reservoir pass ") + std::to_string(pass) + ": " + e.what());
            }
        }
        std::swap(prev, next);
    }
    return {std::move(prev)};
}

ReservoirState concat_states(std::span<const ReservoirState> states) {
    if (states.empty()) throw ValidationError("nothing to concatenate");
    ReservoirState out;
    for (const auto& s : states) out.values.insert(out.values.end(), s.values.begin(), s.values.end());
    return out;
}

void to_json(nlohmann::json& j, const ReservoirSpec& s) {
    nlohmann::json wiring = nlohmann::json::array();
    for (const auto& w : s.wiring) wiring.push_back({{"sources", w.sources}, {"taps", w.feature_taps}});
    j = nlohmann::json{{"neurons", s.num_neurons},  {"window", s.window_size},
                       {"kind", to_string(s.kind)}, {"passes", s.passes},
                       {"observable_qubit", s.observable_qubit}, {"seed", s.seed},
                       {"wiring", wiring}};
    if (s.kind == NeuronKind::quantum) {
        j["params"] = s.quantum_params;
    } else {
        j["weights"] = s.classical_weights;
    }
}

void from_json(const nlohmann::json& j, ReservoirSpec& s) {
    s.num_neurons = j.at("neurons").get<std::size_t>();
    s.window_size = j.at("window").get<std::size_t>();
    s.kind = neuron_kind_from_string(j.at("kind").get<std::string>());
    s.passes = j.at("passes").get<std::size_t>();
    s.observable_qubit = j.value("observable_qubit", std::size_t{0});
    s.seed = j.at("seed").get<std::uint64_t>();
    s.wiring.clear();
    for (const auto& w : j.at("wiring")) {
        s.wiring.push_back({w.at("sources").get<std::vector<std::size_t>>(),
                            w.at("taps").get<std::vector<std::size_t>>()});
    }
    s.quantum_params.clear();
    s.classical_weights.clear();
    if (s.kind == NeuronKind::quantum) {
        s.quantum_params = j.at("params").get<std::vector<NeuronParams>>();
    } else {
        s.classical_weights = j.at("weights").get<std::vector<std::array<double, kNeuronInputs>>>();
    }
    s.validate();
}

}  // namespace dqrc
