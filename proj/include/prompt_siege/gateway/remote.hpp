#pragma once

#include <fcntl.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <mutex>

#include "prompt_siege/gateway/gateway.hpp"

namespace prompt_siege {

// Remote wire protocol: one UTF-8 JSON message per line each way.
//   victim   {"op":"generate","prompt":..,"seed":..}            -> {"fps":..,"frames":[[[x,y,z],..],..]}
//   encoders {"op":"encode","space":"motion"|"text","payload":..} -> {"vector":[..]}
//   llm      {"op":"complete","instruction":..}                  -> {"text":..}
//   ppl      {"op":"token_nll","text":..}                         -> {"nll":[..]}
// Motion payloads use the same {"fps","frames"} shape as victim responses.

class TransportError : public Error {
public:
    using Error::Error;
};

class LineTransport {
public:
    virtual ~LineTransport() = default;
    // Sends one line (no trailing newline) and returns the reply line.
    virtual std::string round_trip(const std::string& line) = 0;
    // Drops any broken connection so the next round_trip starts fresh.
    virtual void reset() {}
};

/// Speaks the line protocol over the stdin/stdout pipes of a child process.
class PipeTransport : public LineTransport {
public:
    explicit PipeTransport(std::vector<std::string> argv) : argv_(std::move(argv)) {
        if (argv_.empty()) throw ConfigError("remote gateway command is empty");
        // A dead child must surface as a write error, not kill the caller.
        static const bool sigpipe_ignored = [] { return ::signal(SIGPIPE, SIG_IGN) != SIG_ERR; }();
        (void)sigpipe_ignored;
        spawn();
    }

    ~PipeTransport() override { shutdown(); }

    PipeTransport(const PipeTransport&) = delete;
    PipeTransport& operator=(const PipeTransport&) = delete;

    std::string round_trip(const std::string& line) override {
        if (pid_ <= 0) spawn();
        std::string msg = line;
        msg.push_back('\n');
        std::size_t off = 0;
        while (off < msg.size()) {
            const ssize_t n = ::write(to_child_, msg.data() + off, msg.size() - off);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw TransportError(std::string("write failed: ") + std::strerror(errno));
            }
            off += static_cast<std::size_t>(n);
        }
        for (;;) {
            const auto nl = buffer_.find('\n');
            if (nl != std::string::npos) {
                std::string reply = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                return reply;
            }
            char chunk[4096];
            const ssize_t n = ::read(from_child_, chunk, sizeof chunk);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw TransportError(std::string("read failed: ") + std::strerror(errno));
            }
            if (n == 0) throw TransportError("remote process closed its output");
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }

    void reset() override { shutdown(); }

private:
    void spawn() {
        int in_pipe[2], out_pipe[2], err_pipe[2];
        if (::pipe(in_pipe) != 0 || ::pipe(out_pipe) != 0 || ::pipe(err_pipe) != 0) {
            throw TransportError(std::string("pipe failed: ") + std::strerror(errno));
        }
        for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1], err_pipe[0], err_pipe[1]}) {
            ::fcntl(fd, F_SETFD, FD_CLOEXEC);
        }
        // Built before fork: the child may only make async-signal-safe calls.
        std::vector<char*> args;
        for (auto& a : argv_) args.push_back(a.data());
        args.push_back(nullptr);
        const pid_t pid = ::fork();
        if (pid < 0) throw TransportError(std::string("fork failed: ") + std::strerror(errno));
        if (pid == 0) {
            ::dup2(in_pipe[0], STDIN_FILENO);
            ::dup2(out_pipe[1], STDOUT_FILENO);
            ::close(in_pipe[0]);
            ::close(in_pipe[1]);
            ::close(out_pipe[0]);
            ::close(out_pipe[1]);
            ::close(err_pipe[0]);
            ::execvp(args[0], args.data());
            const int err = errno;
            [[maybe_unused]] auto _ = ::write(err_pipe[1], &err, sizeof err);
            ::_exit(127);
        }
        ::close(in_pipe[0]);
        ::close(out_pipe[1]);
        ::close(err_pipe[1]);
        int child_err = 0;
        ssize_t n;
        do {
            n = ::read(err_pipe[0], &child_err, sizeof child_err);
        } while (n < 0 && errno == EINTR);
        ::close(err_pipe[0]);
        if (n > 0) {
            ::close(in_pipe[1]);
            ::close(out_pipe[0]);
            ::waitpid(pid, nullptr, 0);
            throw TransportError("cannot start '" + argv_.front() + "': " + std::strerror(child_err));
        }
        pid_ = pid;
        to_child_ = in_pipe[1];
        from_child_ = out_pipe[0];
        buffer_.clear();
    }

    void shutdown() {
        if (pid_ <= 0) return;
        ::close(to_child_);
        ::close(from_child_);
        int status = 0;
        if (::waitpid(pid_, &status, WNOHANG) == 0) {
            ::kill(pid_, SIGTERM);
            ::waitpid(pid_, &status, 0);
        }
        pid_ = -1;
    }

    std::vector<std::string> argv_;
    pid_t pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string buffer_;
};

/// Serializes access to one transport and retries failed round trips.
class RemoteClient {
public:
    static constexpr int kTransportRetries = 3;

    RemoteClient(std::string kind, std::unique_ptr<LineTransport> transport)
        : kind_(std::move(kind)), transport_(std::move(transport)) {}

    json call(const json& request) {
        std::lock_guard lock(mutex_);
        const std::string line = request.dump();
        std::string last_error;
        for (int attempt = 0; attempt <= kTransportRetries; ++attempt) {
            try {
                const std::string reply = transport_->round_trip(line);
                try {
                    json doc = json::parse(reply);
                    if (doc.is_object() && doc.contains("error")) {
                        throw ProtocolError(kind_, "server error: " + doc["error"].dump());
                    }
                    return doc;
                } catch (const json::parse_error& e) {
                    throw ProtocolError(kind_, std::string("unparseable response: ") + e.what());
                }
            } catch (const TransportError& e) {
                last_error = e.what();
                transport_->reset();
            }
        }
        throw QueryFailure(kind_, "query failed after " + std::to_string(kTransportRetries) +
                                      " transport retries: " + last_error);
    }

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
    std::unique_ptr<LineTransport> transport_;
    std::mutex mutex_;
};

namespace detail {

inline json clip_to_wire(const MotionClip& clip) {
    json frames = json::array();
    for (std::size_t t = 0; t < clip.frame_count(); ++t) {
        json joints = json::array();
        for (std::size_t j = 0; j < clip.joint_count(); ++j) {
            const auto p = clip.at(t, j);
            joints.push_back({p.x, p.y, p.z});
        }
        frames.push_back(std::move(joints));
    }
    return {{"fps", clip.fps()}, {"frames", std::move(frames)}};
}

inline MotionClip clip_from_wire(const json& doc, const std::string& kind) {
    try {
        const auto& frames = doc.at("frames");
        if (!frames.is_array() || frames.empty()) throw ProtocolError(kind, "response has no frames");
        const std::size_t T = frames.size();
        const std::size_t J = frames.at(0).size();
        std::vector<double> data;
        data.reserve(T * J * 3);
        for (const auto& f : frames) {
            if (!f.is_array() || f.size() != J) throw ProtocolError(kind, "joint count varies across frames");
            for (const auto& p : f) {
                if (!p.is_array() || p.size() != 3) throw ProtocolError(kind, "joint is not an [x,y,z] triple");
                for (const auto& v : p) {
                    if (!v.is_number()) throw ProtocolError(kind, "non-numeric coordinate");
                    data.push_back(v.get<double>());
                }
            }
        }
        return MotionClip(T, J, doc.at("fps").get<double>(), std::move(data));
    } catch (const json::exception& e) {
        throw ProtocolError(kind, std::string("malformed clip: ") + e.what());
    } catch (const ValidationError& e) {
        throw ProtocolError(kind, std::string("malformed clip: ") + e.what());
    }
}

inline std::vector<double> vector_from_wire(const json& doc, const std::string& kind, const char* field) {
    try {
        const auto& v = doc.at(field);
        if (!v.is_array()) throw ProtocolError(kind, std::string("'") + field + "' is not an array");
        std::vector<double> out;
        for (const auto& x : v) {
            // Non-finite values cannot be expressed in JSON; null stands in for them.
            if (!x.is_number()) throw ProtocolError(kind, "non-numeric vector entry");
            out.push_back(x.get<double>());
        }
        return out;
    } catch (const json::exception& e) {
        throw ProtocolError(kind, std::string("malformed response: ") + e.what());
    }
}

}  // namespace detail

/// Command line of the remote process plus an optional credential variable.
struct RemoteEndpoint {
    std::vector<std::string> command;
    // Name of an environment variable the remote process needs. It must be
    // set; its value is inherited by the child and never written anywhere.
    std::optional<std::string> credential_env;
    std::string name = "remote";
    std::optional<std::size_t> feature_dim;
};

inline std::unique_ptr<LineTransport> open_endpoint(const RemoteEndpoint& ep, const std::string& kind) {
    if (ep.credential_env && std::getenv(ep.credential_env->c_str()) == nullptr) {
        throw GatewayError(kind, "unreachable: credential variable " + *ep.credential_env + " is not set");
    }
    try {
        return std::make_unique<PipeTransport>(ep.command);
    } catch (const TransportError& e) {
        throw GatewayError(kind, std::string("unreachable: ") + e.what());
    }
}

class RemoteVictim : public VictimBackend {
public:
    RemoteVictim(std::string name, std::unique_ptr<LineTransport> transport)
        : name_(std::move(name)), client_("victim", std::move(transport)) {}
    explicit RemoteVictim(const RemoteEndpoint& ep) : RemoteVictim(ep.name, open_endpoint(ep, "victim")) {}

    GatewayDescriptor descriptor() const override {
        return {GatewayKind::victim, name_, std::nullopt, 1, true};
    }
    MotionClip generate(std::string_view prompt, std::uint64_t seed) override {
        const json reply = client_.call({{"op", "generate"}, {"prompt", prompt}, {"seed", seed}});
        return detail::clip_from_wire(reply, "victim");
    }

private:
    std::string name_;
    RemoteClient client_;
};

class RemoteMotionEncoder : public MotionEncoderBackend {
public:
    RemoteMotionEncoder(std::string name, std::size_t dim, std::unique_ptr<LineTransport> transport,
                        GatewayKind kind = GatewayKind::motion_encoder)
        : name_(std::move(name)), dim_(dim), kind_(kind),
          client_(std::string(to_string(kind)), std::move(transport)) {}

    GatewayDescriptor descriptor() const override { return {kind_, name_, dim_, 1, true}; }
    std::vector<double> encode(const MotionClip& clip) override {
        const json reply = client_.call({{"op", "encode"}, {"space", "motion"}, {"payload", detail::clip_to_wire(clip)}});
        return detail::vector_from_wire(reply, client_.kind(), "vector");
    }

private:
    std::string name_;
    std::size_t dim_;
    GatewayKind kind_;
    RemoteClient client_;
};

class RemoteTextEncoder : public TextEncoderBackend {
public:
    RemoteTextEncoder(std::string name, std::size_t dim, std::unique_ptr<LineTransport> transport,
                      GatewayKind kind = GatewayKind::text_encoder)
        : name_(std::move(name)), dim_(dim), kind_(kind),
          client_(std::string(to_string(kind)), std::move(transport)) {}

    GatewayDescriptor descriptor() const override { return {kind_, name_, dim_, 1, true}; }
    std::vector<double> encode(std::string_view text) override {
        const json reply = client_.call({{"op", "encode"}, {"space", "text"}, {"payload", text}});
        return detail::vector_from_wire(reply, client_.kind(), "vector");
    }

private:
    std::string name_;
    std::size_t dim_;
    GatewayKind kind_;
    RemoteClient client_;
};

class RemoteLlm : public LlmBackend {
public:
    RemoteLlm(std::string name, std::unique_ptr<LineTransport> transport)
        : name_(std::move(name)), client_("llm", std::move(transport)) {}
    explicit RemoteLlm(const RemoteEndpoint& ep) : RemoteLlm(ep.name, open_endpoint(ep, "llm")) {}

    GatewayDescriptor descriptor() const override {
        return {GatewayKind::llm, name_, std::nullopt, 1, false};
    }
    std::string complete(std::string_view instruction) override {
        const json reply = client_.call({{"op", "complete"}, {"instruction", instruction}});
        try {
            return reply.at("text").get<std::string>();
        } catch (const json::exception& e) {
            throw ProtocolError("llm", std::string("malformed response: ") + e.what());
        }
    }

private:
    std::string name_;
    RemoteClient client_;
};

class RemotePerplexity : public PerplexityBackend {
public:
    RemotePerplexity(std::string name, std::unique_ptr<LineTransport> transport)
        : name_(std::move(name)), client_("ppl_scorer", std::move(transport)) {}

    GatewayDescriptor descriptor() const override {
        return {GatewayKind::ppl_scorer, name_, std::nullopt, 1, true};
    }
    std::vector<double> token_nll(std::string_view text) override {
        const json reply = client_.call({{"op", "token_nll"}, {"text", text}});
        return detail::vector_from_wire(reply, "ppl_scorer", "nll");
    }

private:
    std::string name_;
    RemoteClient client_;
};

}  // namespace prompt_siege
