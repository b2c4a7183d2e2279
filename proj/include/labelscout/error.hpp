#pragma once

#include <stdexcept>
#include <string>

namespace labelscout {

/// Broad failure classes. Each maps onto a CLI exit code.
enum class ErrorKind {
    config,    // bad configuration or precondition on user input
    gateway,   // model backend / transport / cache I/O
    data,      // parse or validation error in an input artifact
    state,     // illegal lifecycle transition
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

struct DataError : Error {
    explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

/// Malformed input record. `line` is 1-based.
struct ParseError : DataError {
    ParseError(const std::string& what, std::size_t line)
        : DataError("line " + std::to_string(line) + ": " + what), line(line) {}
    std::size_t line;
};

struct ShapeError : DataError {
    explicit ShapeError(const std::string& what) : DataError(what) {}
};

struct StateError : Error {
    explicit StateError(const std::string& what) : Error(ErrorKind::state, what) {}
};

/// A label name already used by an active or frozen label.
struct CollisionError : StateError {
    explicit CollisionError(const std::string& name)
        : StateError("label name collision: \"" + name + "\""), name(name) {}
    std::string name;
};

struct GatewayError : Error {
    GatewayError(const std::string& what, int status = 0)
        : Error(ErrorKind::gateway, what), status(status) {}
    int status;  // HTTP status, 0 for transport-level failures
};

struct TruncatedResponseError : GatewayError {
    explicit TruncatedResponseError(const std::string& what) : GatewayError(what) {}
};

struct ContractViolation : GatewayError {
    explicit ContractViolation(const std::string& what) : GatewayError(what) {}
};

inline int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::config: return 2;
        case ErrorKind::gateway: return 3;
        case ErrorKind::data: return 4;
        case ErrorKind::state: return 4;
    }
    return 1;
}

}  // namespace labelscout
