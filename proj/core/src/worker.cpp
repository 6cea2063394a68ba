#include "dqrc/worker.hpp"

#include <csignal>
#include <cstring>
#include <sstream>
#include <unordered_map>

#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include "dqrc/error.hpp"

namespace dqrc {

namespace {

// Requests written ahead of their replies. Keeps the reply backlog far below
// any pipe or socket buffer so neither side blocks on a full write.
constexpr std::size_t kMaxInFlight = 64;

const char* kind_name(RequestKind k) { return k == RequestKind::expectation ? "expectation" : "overlap"; }

void ignore_sigpipe() { std::signal(SIGPIPE, SIG_IGN); }

std::pair<std::string, std::uint16_t> split_host_port(const std::string& address) {
    const auto colon = address.rfind(':');
    if (colon == std::string::npos) throw ConfigError("address '" + address + "' is not host:port");
    const std::string host = address.substr(0, colon);
    const std::string port = address.substr(colon + 1);
    try {
        std::size_t used = 0;
        const unsigned long p = std::stoul(port, &used);
        if (used != port.size() || p > 65535) throw std::out_of_range("port");
        return {host.empty() ? "127.0.0.1" : host, static_cast<std::uint16_t>(p)};
    } catch (const std::logic_error&) {
        throw ConfigError("address '" + address + "' has an invalid port");
    }
}

}  // namespace

nlohmann::json request_to_json(const Request& r) {
    nlohmann::json j{{"id", r.id}, {"kind", kind_name(r.kind)}};
    if (r.kind == RequestKind::expectation && r.circuits.size() == 1) {
        j["circuit"] = r.circuits.front();
        j["qubit"] = r.qubit;
    } else {
        j["circuits"] = r.circuits;
    }
    if (r.noise) j["noise"] = *r.noise;
    if (r.shots) j["shots"] = *r.shots;
    j["seed"] = r.seed;
    return j;
}

Request request_from_json(const nlohmann::json& j) {
    Request r;
    r.id = j.at("id").get<std::uint64_t>();
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "expectation") {
        r.kind = RequestKind::expectation;
    } else if (kind == "overlap") {
        r.kind = RequestKind::overlap;
    } else {
        throw ValidationError("unknown kind");
    }
    if (j.contains("circuit")) r.circuits.push_back(circuit_from_json(j["circuit"]));
    if (j.contains("circuits")) {
        for (const auto& c : j["circuits"]) r.circuits.push_back(circuit_from_json(c));
    }
    r.qubit = j.value("qubit", std::size_t{0});
    if (j.contains("noise") && !j["noise"].is_null()) r.noise = j["noise"].get<NoiseModel>();
    if (j.contains("shots") && !j["shots"].is_null()) r.shots = j["shots"].get<std::uint32_t>();
    r.seed = j.value("seed", std::uint64_t{0});
    return r;
}

nlohmann::json response_to_json(const Response& r) {
    nlohmann::json j{{"id", r.id}};
    if (r.value) {
        j["value"] = *r.value;
    } else {
        j["error"] = r.error;
    }
    return j;
}

Response response_from_json(const nlohmann::json& j) {
    Response r;
    r.id = j.at("id").get<std::uint64_t>();
    if (j.contains("value")) {
        r.value = j["value"].get<double>();
    } else {
        r.error = j.value("error", std::string("missing value"));
    }
    return r;
}

std::string handle_line(std::string_view line, const WorkerOptions& options) {
    nlohmann::json parsed;
    try {
        parsed = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        return nlohmann::json{{"error", std::string("malformed message: ") + e.what()}}.dump();
    }
    std::optional<std::uint64_t> id;
    if (parsed.is_object() && parsed.contains("id") && parsed["id"].is_number_unsigned()) {
        id = parsed["id"].get<std::uint64_t>();
    }
    Response resp;
    try {
        Request req = request_from_json(parsed);
        if (!req.noise && options.default_noise) req.noise = options.default_noise;
        resp = {req.id, evaluate(req), {}};
    } catch (const std::exception& e) {
        if (!id) return nlohmann::json{{"error", e.what()}}.dump();
        resp = {*id, std::nullopt, e.what()};
    }
    return response_to_json(resp).dump();
}

void worker_serve(int in_fd, int out_fd, const WorkerOptions& options) {
    ignore_sigpipe();
    Connection io(in_fd, out_fd);
    std::string line;
    std::uint64_t served = 0;
    try {
        while (io.read_line(line)) {
            if (options.max_requests && served >= *options.max_requests) break;
            if (line.empty()) continue;
            io.write_all(handle_line(line, options) + "\n");
            ++served;
        }
    } catch (const ServiceError&) {
        // Peer went away.
    }
}

Connection::Connection(Connection&& other) noexcept
    : read_fd_(std::exchange(other.read_fd_, -1)),
      write_fd_(std::exchange(other.write_fd_, -1)),
      child_(std::exchange(other.child_, -1)),
      buffer_(std::move(other.buffer_)) {}

Connection& Connection::operator=(Connection&& other) noexcept {
    if (this != &other) {
        close();
        read_fd_ = std::exchange(other.read_fd_, -1);
        write_fd_ = std::exchange(other.write_fd_, -1);
        child_ = std::exchange(other.child_, -1);
        buffer_ = std::move(other.buffer_);
    }
    return *this;
}

void Connection::close() {
    if (read_fd_ >= 0) ::close(read_fd_);
    if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
    read_fd_ = write_fd_ = -1;
    if (child_ > 0) {
        ::kill(child_, SIGTERM);
        ::waitpid(child_, nullptr, 0);
        child_ = -1;
    }
    buffer_.clear();
}

void Connection::write_all(std::string_view data) {
    while (!data.empty()) {
        const ssize_t n = ::write(write_fd_, data.data(), data.size());
        if (n < 0) {
            if (errno == EINTR) continue;
            throw ServiceError(std::string("write failed: ") + std::strerror(errno));
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
}

bool Connection::read_line(std::string& line) {
    for (;;) {
        const auto nl = buffer_.find('\n');
        if (nl != std::string::npos) {
            line.assign(buffer_, 0, nl);
            buffer_.erase(0, nl + 1);
            return true;
        }
        char chunk[65536];
        const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw ServiceError(std::string("read failed: ") + std::strerror(errno));
        }
        if (n == 0) return false;
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

Connection connect_tcp(const std::string& host, std::uint16_t port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const std::string service = std::to_string(port);
    if (::getaddrinfo(host.c_str(), service.c_str(), &hints, &res) != 0 || !res) {
        throw ServiceError("cannot resolve " + host);
    }
    int fd = -1;
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0) throw ServiceError("cannot connect to " + host + ":" + service);
    return Connection(fd, fd);
}

Connection spawn_worker(const std::vector<std::string>& argv) {
    if (argv.empty()) throw ConfigError("empty worker command");
    int to_child[2];
    int from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0) throw ServiceError("pipe failed");
    if (::pipe2(from_child, O_CLOEXEC) != 0) {
        ::close(to_child[0]);
        ::close(to_child[1]);
        throw ServiceError("pipe failed");
    }
    std::vector<char*> args;
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);

    const pid_t pid = ::fork();
    if (pid < 0) throw ServiceError("fork failed");
    if (pid == 0) {
        ::dup2(to_child[0], STDIN_FILENO);
        ::dup2(from_child[1], STDOUT_FILENO);
        ::execvp(args[0], args.data());
        ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    return Connection(from_child[0], to_child[1], pid);
}

Connector connector_for(const std::string& endpoint) {
    if (endpoint.rfind("tcp://", 0) == 0) {
        const auto [host, port] = split_host_port(endpoint.substr(6));
        return [host, port] { return connect_tcp(host, port); };
    }
    if (endpoint.rfind("spawn:", 0) == 0) {
        std::vector<std::string> argv;
        std::istringstream words(endpoint.substr(6));
        for (std::string w; words >> w;) argv.push_back(w);
        if (argv.empty()) throw ConfigError("spawn endpoint has no command");
        return [argv] { return spawn_worker(argv); };
    }
    throw ConfigError("unsupported endpoint '" + endpoint + "' (expected tcp://host:port or spawn:<command>)");
}

RemoteChannel::RemoteChannel(Connector connector) : connector_(std::move(connector)) { ignore_sigpipe(); }

void RemoteChannel::reset() {
    std::lock_guard lock(mutex_);
    conn_.close();
}

std::vector<Response> RemoteChannel::execute(std::span<const Request> batch) {
    std::lock_guard lock(mutex_);
    try {
        if (!conn_.open()) conn_ = connector_();
        std::unordered_map<std::uint64_t, std::size_t> slot;
        for (std::size_t i = 0; i < batch.size(); ++i) slot[batch[i].id] = i;

        std::vector<Response> responses(batch.size());
        std::vector<bool> seen(batch.size(), false);
        std::string line;
        std::size_t sent = 0;
        for (std::size_t received = 0; received < batch.size();) {
            if (sent < batch.size() && sent - received < kMaxInFlight) {
                std::string out;
                const std::size_t end = std::min(batch.size(), received + kMaxInFlight);
                for (; sent < end; ++sent) {
                    out += request_to_json(batch[sent]).dump();
                    out += '\n';
                }
                conn_.write_all(out);
            }
            if (!conn_.read_line(line)) throw ServiceError("worker closed the connection mid-batch");
            Response r;
            try {
                r = response_from_json(nlohmann::json::parse(line));
            } catch (const nlohmann::json::exception& e) {
                throw ServiceError(std::string("unmatched worker reply: ") + line);
            }
            const auto it = slot.find(r.id);
            if (it == slot.end() || seen[it->second]) throw ServiceError("unexpected response id " + std::to_string(r.id));
            seen[it->second] = true;
            responses[it->second] = std::move(r);
            ++received;
        }
        return responses;
    } catch (const ServiceError&) {
        conn_.close();
        throw;
    }
}

TcpWorkerServer::TcpWorkerServer(const std::string& address, WorkerOptions options)
    : options_(std::move(options)) {
    ignore_sigpipe();
    const auto [host, port] = split_host_port(address);
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res) {
        throw ServiceError("cannot resolve listen address " + address);
    }
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
        const int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
        if (fd < 0) continue;
        const int one = 1;
        ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd, 16) == 0) {
            listen_fd_ = fd;
            break;
        }
        ::close(fd);
    }
    ::freeaddrinfo(res);
    if (listen_fd_ < 0) throw ServiceError("cannot bind " + address + ": " + std::strerror(errno));

    sockaddr_storage bound{};
    socklen_t len = sizeof bound;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    if (bound.ss_family == AF_INET) {
        port_ = ntohs(reinterpret_cast<sockaddr_in*>(&bound)->sin_port);
    } else {
        port_ = ntohs(reinterpret_cast<sockaddr_in6*>(&bound)->sin6_port);
    }
}

TcpWorkerServer::~TcpWorkerServer() {
    stop();
    std::lock_guard lock(sessions_mutex_);
    sessions_.clear();
}

void TcpWorkerServer::serve() {
    while (!stopping_) {
        const int client = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
        if (client < 0) {
            if (errno == EINTR) continue;
            break;
        }
        std::lock_guard lock(sessions_mutex_);
        sessions_.emplace_back([this, client] { worker_serve(client, client, options_); });
    }
}

void TcpWorkerServer::stop() {
    if (stopping_.exchange(true)) return;
    if (listen_fd_ >= 0) {
        ::shutdown(listen_fd_, SHUT_RDWR);
        ::close(listen_fd_);
        listen_fd_ = -1;
    }
}

}  // namespace dqrc
