#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dqrc/circuit.hpp"
#include "dqrc/noise.hpp"

namespace dqrc {

enum class RequestKind { expectation, overlap };

/// One unit of quantum work. `expectation` carries a single circuit and a
/// qubit; `overlap` carries two circuits (a, b) and asks for |<a|b>|^2.
/// Without `noise` the evaluation is exact.
struct Request {
    std::uint64_t id = 0;
    RequestKind kind = RequestKind::expectation;
    std::vector<Circuit> circuits;
    std::size_t qubit = 0;
    std::optional<NoiseModel> noise;
    std::optional<std::uint32_t> shots;
    std::uint64_t seed = 0;
};

struct Response {
    std::uint64_t id = 0;
    std::optional<double> value;
    std::string error;

    bool ok() const { return value.has_value(); }
};

/// Evaluates a request against the local simulator. Throws on invalid input.
double evaluate(const Request& request);

/// Something that turns requests into responses, in order. Implementations
/// must be safe to call from several threads.
class Channel {
  public:
    virtual ~Channel() = default;
    /// Throws ServiceError on transport failure; per-request problems come
    /// back as error responses.
    virtual std::vector<Response> execute(std::span<const Request> batch) = 0;
    /// True when requests are evaluated by `evaluate` in this process.
    virtual bool in_process() const { return false; }
    /// Drops and re-establishes the underlying transport.
    virtual void reset() {}
};

class LocalChannel final : public Channel {
  public:
    std::vector<Response> execute(std::span<const Request> batch) override;
    bool in_process() const override { return true; }
};

enum class BackendMode { ideal, noisy };

struct BackendSpec {
    std::string name = "local";
    BackendMode mode = BackendMode::ideal;
    std::optional<NoiseModel> noise;
    std::optional<std::uint32_t> shots;
    /// Empty for in-process; otherwise "tcp://host:port" or "spawn:<command line>".
    std::string endpoint;

    void validate() const;
};

/// Execution target for neurons and kernels. Attaches the spec's noise and
/// shots to every request, counts logical dispatches, and retries a batch
/// once after a transport failure.
class Backend {
  public:
    explicit Backend(BackendSpec spec, std::shared_ptr<Channel> channel = nullptr);

    const BackendSpec& spec() const { return spec_; }
    const std::string& name() const { return spec_.name; }
    bool ideal() const { return spec_.mode == BackendMode::ideal; }

    std::vector<double> expectations(std::span<const Circuit> circuits, std::size_t qubit,
                                     std::span<const std::uint64_t> seeds);
    double expectation(const Circuit& circuit, std::size_t qubit, std::uint64_t seed);
    double overlap(const Circuit& a, const Circuit& b, std::uint64_t seed);

    /// K(i, j) = |<rows_i|cols_j>|^2. With `symmetric` (rows == cols) only the
    /// upper triangle is evaluated and mirrored. Pair seeds are
    /// derive_seed(seed, "pair", {i, j}).
    Eigen::MatrixXd kernel_matrix(std::span<const Circuit> rows, std::span<const Circuit> cols,
                                  bool symmetric, std::uint64_t seed, std::size_t threads = 1);

    std::uint64_t dispatch_count() const { return dispatched_.load(); }
    std::uint64_t retry_count() const { return retries_.load(); }
    void reset_counters();

  private:
    std::vector<double> run(std::vector<Request>& batch);
    Request make_request(RequestKind kind, std::uint64_t seed);

    BackendSpec spec_;
    std::shared_ptr<Channel> channel_;
    std::atomic<std::uint64_t> next_id_{1};
    std::atomic<std::uint64_t> dispatched_{0};
    std::atomic<std::uint64_t> retries_{0};
};

/// Channel for a spec's endpoint: LocalChannel when empty, remote otherwise.
std::shared_ptr<Channel> make_channel(const std::string& endpoint);

}  // namespace dqrc
