#pragma once

#include <stdexcept>
#include <string>

namespace prompt_siege {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class LedgerError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

// Thrown by any gateway; `kind` names the gateway slot ("victim", "llm", ...).
class GatewayError : public Error {
public:
    GatewayError(std::string kind, const std::string& what)
        : Error("gateway " + kind + " " + what), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

// Response arrived but failed shape validation.
class ProtocolError : public GatewayError {
public:
    using GatewayError::GatewayError;
};

// The transport gave up after its retries.
class QueryFailure : public GatewayError {
public:
    using GatewayError::GatewayError;
};

class DegenerateEmbedding : public Error {
public:
    DegenerateEmbedding() : Error("degenerate embedding") {}
};

class NoFeasiblePrompt : public Error {
public:
    NoFeasiblePrompt() : Error("no feasible prompt") {}
};

class NoScorablePrompts : public Error {
public:
    NoScorablePrompts() : Error("no scorable prompts") {}
};

class PhaseFailed : public Error {
public:
    using Error::Error;
};

}  // namespace prompt_siege
