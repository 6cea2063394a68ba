#include "dqrc/backend.hpp"

#include <algorithm>
#include <string>

#include "dqrc/error.hpp"
#include "dqrc/parallel.hpp"
#include "dqrc/seed.hpp"
#include "dqrc/simulator.hpp"
#include "dqrc/worker.hpp"

namespace dqrc {

namespace {

constexpr std::size_t kPairBatch = 512;

bool exact(const Request& r) { return !r.noise && !r.shots; }

}  // namespace

double evaluate(const Request& request) {
    switch (request.kind) {
        case RequestKind::expectation: {
            if (request.circuits.size() != 1) throw ValidationError("expectation request needs exactly one circuit");
            const Circuit& c = request.circuits.front();
            if (exact(request)) return expectation_z(run_circuit(c), request.qubit);
            if (!request.noise) {
                // Shot sampling of the exact state.
                return noisy_expectation_z(DensityMatrix::pure(run_circuit(c)), request.qubit, NoiseModel{},
                                           request.shots, request.seed);
            }
            return noisy_expectation_z(run_circuit_noisy(c, *request.noise), request.qubit, *request.noise,
                                       request.shots, request.seed);
        }
        case RequestKind::overlap: {
            if (request.circuits.size() != 2) throw ValidationError("overlap request needs exactly two circuits");
            const Circuit& a = request.circuits[0];
            const Circuit& b = request.circuits[1];
            if (a.num_qubits() != b.num_qubits()) throw StructuralError("overlap of circuits with different widths");
            if (exact(request)) return overlap_sq(run_circuit(a), run_circuit(b));
            return fidelity_via_uncompute(a, b, request.noise, request.shots, request.seed);
        }
    }
    throw ValidationError("unknown request kind");
}

std::vector<Response> LocalChannel::execute(std::span<const Request> batch) {
    std::vector<Response> out;
    out.reserve(batch.size());
    for (const Request& r : batch) {
        Response resp{r.id, std::nullopt, {}};
        try {
            resp.value = evaluate(r);
        } catch (const std::exception& e) {
            resp.error = e.what();
        }
        out.push_back(std::move(resp));
    }
    return out;
}

void BackendSpec::validate() const {
    if (mode == BackendMode::noisy && !noise) {
        throw ConfigError("backend '" + name + "' is noisy but has no calibration");
    }
    if (noise) noise->validate();
    if (shots && *shots == 0) throw ConfigError("backend '" + name + "': shots must be positive");
}

Backend::Backend(BackendSpec spec, std::shared_ptr<Channel> channel)
    : spec_(std::move(spec)), channel_(std::move(channel)) {
    spec_.validate();
    if (!channel_) channel_ = make_channel(spec_.endpoint);
}

void Backend::reset_counters() {
    dispatched_ = 0;
    retries_ = 0;
}

Request Backend::make_request(RequestKind kind, std::uint64_t seed) {
    Request r;
    r.id = next_id_.fetch_add(1);
    r.kind = kind;
    if (spec_.mode == BackendMode::noisy) r.noise = spec_.noise;
    r.shots = spec_.shots;
    r.seed = seed;
    return r;
}

std::vector<double> Backend::run(std::vector<Request>& batch) {
    dispatched_ += batch.size();
    std::vector<Response> responses;
    try {
        responses = channel_->execute(batch);
    } catch (const ServiceError& first) {
        ++retries_;
        try {
            channel_->reset();
            responses = channel_->execute(batch);
        } catch (const ServiceError& second) {
            throw ServiceError("backend '" + spec_.name + "' failed after retry: " + second.what());
        }
    }
    if (responses.size() != batch.size()) {
        throw ServiceError("backend '" + spec_.name + "' returned " + std::to_string(responses.size()) +
                           " responses for " + std::to_string(batch.size()) + " requests");
    }
    std::vector<double> values(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (!responses[i].ok()) {
            throw ServiceError("backend '" + spec_.name + "' request " + std::to_string(i) + ": " +
                               responses[i].error);
        }
        values[i] = *responses[i].value;
    }
    return values;
}

std::vector<double> Backend::expectations(std::span<const Circuit> circuits, std::size_t qubit,
                                          std::span<const std::uint64_t> seeds) {
    if (seeds.size() != circuits.size()) throw ValidationError("one seed per circuit required");
    std::vector<Request> batch;
    batch.reserve(circuits.size());
    for (std::size_t i = 0; i < circuits.size(); ++i) {
        Request r = make_request(RequestKind::expectation, seeds[i]);
        r.circuits = {circuits[i]};
        r.qubit = qubit;
        batch.push_back(std::move(r));
    }
    return run(batch);
}

double Backend::expectation(const Circuit& circuit, std::size_t qubit, std::uint64_t seed) {
    const std::uint64_t seeds[1] = {seed};
    return expectations(std::span(&circuit, 1), qubit, seeds).front();
}

double Backend::overlap(const Circuit& a, const Circuit& b, std::uint64_t seed) {
    std::vector<Request> batch;
    Request r = make_request(RequestKind::overlap, seed);
    r.circuits = {a, b};
    batch.push_back(std::move(r));
    return run(batch).front();
}

Eigen::MatrixXd Backend::kernel_matrix(std::span<const Circuit> rows, std::span<const Circuit> cols,
                                       bool symmetric, std::uint64_t seed, std::size_t threads) {
    if (symmetric && rows.size() != cols.size()) throw StructuralError("symmetric kernel needs rows == cols");
    const std::size_t m = rows.size();
    const std::size_t n = cols.size();
    Eigen::MatrixXd k(m, n);

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    pairs.reserve(symmetric ? m * (m + 1) / 2 : m * n);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = symmetric ? i : 0; j < n; ++j) pairs.emplace_back(i, j);
    }

    const bool cacheable = channel_->in_process() && ideal() && !spec_.shots;
    if (cacheable) {
        // Same arithmetic as evaluate() on an overlap request, with each
        // feature state prepared once.
        std::vector<std::optional<StateVector>> row_states(m), col_states(symmetric ? 0 : n);
        parallel_for(m, threads, [&](std::size_t i) { row_states[i] = run_circuit(rows[i]); });
        if (!symmetric) parallel_for(n, threads, [&](std::size_t j) { col_states[j] = run_circuit(cols[j]); });
        auto& right = symmetric ? row_states : col_states;
        parallel_for(m, threads, [&](std::size_t i) {
            for (std::size_t j = symmetric ? i : 0; j < n; ++j) k(i, j) = overlap_sq(*row_states[i], *right[j]);
        });
        dispatched_ += pairs.size();
    } else {
        const std::size_t chunks = (pairs.size() + kPairBatch - 1) / kPairBatch;
        parallel_for(chunks, threads, [&](std::size_t c) {
            const std::size_t begin = c * kPairBatch;
            const std::size_t end = std::min(pairs.size(), begin + kPairBatch);
            std::vector<Request> batch;
            batch.reserve(end - begin);
            for (std::size_t p = begin; p < end; ++p) {
                const auto [i, j] = pairs[p];
                Request r = make_request(RequestKind::overlap, derive_seed(seed, "pair", {i, j}));
                r.circuits = {rows[i], cols[j]};
                batch.push_back(std::move(r));
            }
            const auto values = run(batch);
            for (std::size_t p = begin; p < end; ++p) k(pairs[p].first, pairs[p].second) = values[p - begin];
        });
    }
    if (symmetric) {
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < i; ++j) k(i, j) = k(j, i);
        }
    }
    return k;
}

std::shared_ptr<Channel> make_channel(const std::string& endpoint) {
    if (endpoint.empty() || endpoint == "local") return std::make_shared<LocalChannel>();
    return std::make_shared<RemoteChannel>(connector_for(endpoint));
}

}  // namespace dqrc
