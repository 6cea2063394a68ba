#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "dqrc/backend.hpp"
#include "dqrc/noise.hpp"

namespace dqrc {

// Worker wire protocol: newline-delimited JSON over a byte stream.
//   request  {"id":<u64>,"kind":"expectation"|"overlap","circuit":<Circuit>|"circuits":[<Circuit>,<Circuit>],
//             "qubit":<idx?>,"noise":<NoiseModel?>,"shots":<u32?>,"seed":<u64?>}
//   response {"id":<u64>,"value":<f64>} | {"id":<u64>,"error":<string>}

nlohmann::json request_to_json(const Request& r);
Request request_from_json(const nlohmann::json& j);
nlohmann::json response_to_json(const Response& r);
Response response_from_json(const nlohmann::json& j);

struct WorkerOptions {
    /// Applied to requests that carry no "noise" field.
    std::optional<NoiseModel> default_noise;
    /// Stop serving (and drop the connection) after this many requests.
    /// Used to simulate a worker dying mid-batch.
    std::optional<std::uint64_t> max_requests;
};

/// Handles one protocol line and returns the response line (without the
/// trailing newline). Never throws.
std::string handle_line(std::string_view line, const WorkerOptions& options = {});

/// Serves requests from `in_fd` until EOF (or max_requests); writes to `out_fd`.
void worker_serve(int in_fd, int out_fd, const WorkerOptions& options = {});

/// Owned pair of file descriptors, optionally backed by a child process.
class Connection {
  public:
    Connection() = default;
    Connection(int read_fd, int write_fd, int child_pid = -1)
        : read_fd_(read_fd), write_fd_(write_fd), child_(child_pid) {}
    Connection(Connection&& other) noexcept;
    Connection& operator=(Connection&& other) noexcept;
    Connection(const Connection&) = delete;
    Connection& operator=(const Connection&) = delete;
    ~Connection() { close(); }

    bool open() const { return read_fd_ >= 0 && write_fd_ >= 0; }
    void close();

    void write_all(std::string_view data);
    /// Returns false on EOF.
    bool read_line(std::string& line);

  private:
    int read_fd_ = -1;
    int write_fd_ = -1;
    int child_ = -1;
    std::string buffer_;
};

using Connector = std::function<Connection()>;

Connection connect_tcp(const std::string& host, std::uint16_t port);
/// fork/exec a worker speaking the protocol on its stdin/stdout.
Connection spawn_worker(const std::vector<std::string>& argv);
/// "tcp://host:port" or "spawn:<command line>".
Connector connector_for(const std::string& endpoint);

/// Client side of the protocol. Requests in a batch are pipelined on one
/// connection and matched back by id. Any transport problem closes the
/// connection and surfaces as ServiceError; the next call reconnects.
class RemoteChannel final : public Channel {
  public:
    explicit RemoteChannel(Connector connector);
    std::vector<Response> execute(std::span<const Request> batch) override;
    void reset() override;

  private:
    Connector connector_;
    std::mutex mutex_;
    Connection conn_;
};

/// Line-protocol server on a TCP socket; one thread per connection.
class TcpWorkerServer {
  public:
    /// `address` is "host:port"; port 0 picks a free port. Throws ServiceError
    /// when the address cannot be bound.
    TcpWorkerServer(const std::string& address, WorkerOptions options = {});
    ~TcpWorkerServer();
    TcpWorkerServer(const TcpWorkerServer&) = delete;
    TcpWorkerServer& operator=(const TcpWorkerServer&) = delete;

    std::uint16_t port() const { return port_; }
    /// Blocks accepting connections until stop().
    void serve();
    void stop();

  private:
    WorkerOptions options_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::atomic<bool> stopping_{false};
    std::mutex sessions_mutex_;
    std::vector<std::jthread> sessions_;
};

}  // namespace dqrc
