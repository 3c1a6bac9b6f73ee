#include "dime/external_model.hpp"

#include "dime/error.hpp"
#include "json.hpp"

#include <cerrno>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstring>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

namespace dime {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_left(Clock::time_point deadline) {
    return std::chrono::duration<double>(deadline - Clock::now()).count();
}

void ignore_sigpipe_once() {
    // A dead child must surface as EPIPE on write, not kill the process.
    static const bool done = [] {
        std::signal(SIGPIPE, SIG_IGN);
        return true;
    }();
    (void)done;
}

}  // namespace

ExternalModelSession::ExternalModelSession(std::string command, ExternalModelOptions options)
    : command_(std::move(command)), options_(options) {
    ignore_sigpipe_once();
    spawn();
    try {
        read_handshake();
    } catch (...) {
        shutdown();
        throw;
    }
    alive_ = true;
}

ExternalModelSession::~ExternalModelSession() {
    shutdown();
}

void ExternalModelSession::spawn() {
    int to_child[2];
    int from_child[2];
    if (pipe(to_child) != 0 || pipe(from_child) != 0) {
        throw Error("pipe() failed: " + std::string(std::strerror(errno)));
    }
    pid_ = fork();
    if (pid_ < 0) {
        throw Error("fork() failed: " + std::string(std::strerror(errno)));
    }
    if (pid_ == 0) {
        // Own process group, so shutdown() can clean up the shell and
        // anything it spawned with one group kill.
        setpgid(0, 0);
        dup2(to_child[0], STDIN_FILENO);
        dup2(from_child[1], STDOUT_FILENO);
        close(to_child[0]);
        close(to_child[1]);
        close(from_child[0]);
        close(from_child[1]);
        execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    setpgid(pid_, pid_);
    close(to_child[0]);
    close(from_child[1]);
    to_child_ = to_child[1];
    from_child_ = from_child[0];
}

void ExternalModelSession::read_handshake() {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_line(options_.handshake_timeout_seconds, 0));
    } catch (const GatewayError& e) {
        throw ProtocolError(std::string("model handshake failed: ") + e.what());
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(std::string("model handshake is not valid JSON: ") + e.what());
    }
    if (j.value("protocol", 0) != 1) {
        throw ProtocolError("unsupported protocol version in handshake");
    }
    classes_ = j.value("classes", 0);
    if (classes_ < 1) {
        throw ProtocolError("handshake must declare classes >= 1");
    }
    if (!j.contains("modalities") || !j["modalities"].is_array() ||
        j["modalities"].size() != 2) {
        throw ProtocolError("handshake must declare exactly 2 modalities");
    }
    for (const auto& m : j["modalities"]) {
        kinds_.push_back(kind_from_name(m.at("kind").get<std::string>()));
    }
}

std::string ExternalModelSession::read_line(double timeout_seconds, std::size_t at_index) {
    const auto deadline =
        Clock::now() + std::chrono::duration_cast<Clock::duration>(
                           std::chrono::duration<double>(timeout_seconds));
    for (;;) {
        const auto nl = buffer_.find('\n');
        if (nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            return line;
        }
        const double left = seconds_left(deadline);
        if (left <= 0.0) {
            throw GatewayError("timed out waiting for model response", at_index);
        }
        pollfd pfd{from_child_, POLLIN, 0};
        const int rc = poll(&pfd, 1, static_cast<int>(std::ceil(left * 1000.0)));
        if (rc < 0) {
            if (errno == EINTR) {
                continue;
            }
            throw GatewayError("poll() failed: " + std::string(std::strerror(errno)),
                               at_index);
        }
        if (rc == 0) {
            throw GatewayError("timed out waiting for model response", at_index);
        }
        char chunk[4096];
        const ssize_t got = read(from_child_, chunk, sizeof(chunk));
        if (got < 0) {
            if (errno == EINTR) {
                continue;
            }
            throw GatewayError("read from model failed: " + std::string(std::strerror(errno)),
                               at_index);
        }
        if (got == 0) {
            throw GatewayError("model process closed its output (crash?)", at_index);
        }
        buffer_.append(chunk, static_cast<std::size_t>(got));
    }
}

void ExternalModelSession::write_line(const std::string& line, std::size_t at_index) {
    std::size_t sent = 0;
    while (sent < line.size()) {
        const ssize_t n = write(to_child_, line.data() + sent, line.size() - sent);
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            throw GatewayError("write to model failed: " + std::string(std::strerror(errno)),
                               at_index);
        }
        sent += static_cast<std::size_t>(n);
    }
}

std::vector<LogitVector> ExternalModelSession::evaluate_batch(
    const std::vector<ModalityPair>& pairs) {
    if (!alive_) {
        throw GatewayError("external model session is dead", 0);
    }
    std::vector<LogitVector> results;
    results.reserve(pairs.size());

    const auto chunk_size = static_cast<std::size_t>(options_.max_pairs_per_request);
    for (std::size_t offset = 0; offset < pairs.size(); offset += chunk_size) {
        const std::size_t count = std::min(chunk_size, pairs.size() - offset);
        const std::uint64_t id = next_id_++;
        nlohmann::json req;
        req["id"] = id;
        auto& jp = req["pairs"] = nlohmann::json::array();
        for (std::size_t i = 0; i < count; ++i) {
            jp.push_back(nlohmann::json::array(
                {pairs[offset + i].x1, pairs[offset + i].x2}));
        }

        nlohmann::json resp;
        try {
            write_line(req.dump() + "\n", offset);
            resp = nlohmann::json::parse(
                read_line(options_.response_timeout_seconds, offset));
        } catch (const GatewayError&) {
            alive_ = false;
            throw;
        } catch (const nlohmann::json::exception& e) {
            alive_ = false;
            throw ProtocolError(std::string("model response is not valid JSON: ") + e.what());
        }

        try {
            if (!resp.contains("id") || !resp["id"].is_number_unsigned() ||
                resp["id"].get<std::uint64_t>() != id) {
                throw ProtocolError("out-of-order model response (expected id " +
                                    std::to_string(id) + ")");
            }
            if (!resp.contains("logits") || !resp["logits"].is_array() ||
                resp["logits"].size() != count) {
                throw ProtocolError("model response must carry one logit vector per pair");
            }
            for (const auto& row : resp["logits"]) {
                auto logits = row.get<LogitVector>();
                if (logits.size() != static_cast<std::size_t>(classes_)) {
                    throw ProtocolError("logit vector length " + std::to_string(logits.size()) +
                                        " does not match declared classes " +
                                        std::to_string(classes_));
                }
                for (double v : logits) {
                    if (!std::isfinite(v)) {
                        throw ProtocolError("non-finite logit in model response");
                    }
                }
                results.push_back(std::move(logits));
            }
        } catch (const nlohmann::json::exception& e) {
            alive_ = false;
            throw ProtocolError(std::string("malformed model response: ") + e.what());
        } catch (const ProtocolError&) {
            alive_ = false;
            throw;
        }
    }
    return results;
}

void ExternalModelSession::shutdown() noexcept {
    alive_ = false;
    if (to_child_ >= 0) {
        close(to_child_);
        to_child_ = -1;
    }
    if (from_child_ >= 0) {
        close(from_child_);
        from_child_ = -1;
    }
    if (pid_ > 0) {
        // Closing stdin asks the child to exit; wait briefly, then insist.
        // The kill targets the whole process group so a shell wrapper or
        // stalled grandchild cannot outlive the session.
        int status = 0;
        bool reaped = false;
        for (int i = 0; i < 50 && !reaped; ++i) {
            const pid_t done = waitpid(pid_, &status, WNOHANG);
            if (done == pid_ || (done < 0 && errno == ECHILD)) {
                reaped = true;
                break;
            }
            usleep(10000);
        }
        kill(-pid_, SIGKILL);
        if (!reaped) {
            waitpid(pid_, &status, 0);
        }
        pid_ = -1;
    }
}

}  // namespace dime
