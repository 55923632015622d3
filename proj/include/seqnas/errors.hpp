#pragma once

#include <stdexcept>
#include <string>

namespace seqnas {

// Every error carries a short machine-readable kind; the CLI prints it as
// the first token of its single-line failure message.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& m) : Error("config", m) {}
};

struct ValidationError : Error {
    explicit ValidationError(const std::string& m) : Error("validation", m) {}
};

struct DecodeError : Error {
    explicit DecodeError(const std::string& m) : Error("decode", m) {}
};

struct ShapeError : Error {
    explicit ShapeError(const std::string& m) : Error("shape", m) {}
};

struct DataError : Error {
    explicit DataError(const std::string& m) : Error("data", m) {}
};

struct CacheError : Error {
    explicit CacheError(const std::string& m) : Error("cache", m) {}
};

struct FormatError : Error {
    explicit FormatError(const std::string& m) : Error("format", m) {}
};

struct IntegrityError : Error {
    explicit IntegrityError(const std::string& m) : Error("integrity", m) {}
};

struct ExhaustionError : Error {
    explicit ExhaustionError(const std::string& m) : Error("exhaustion", m) {}
};

struct LockError : Error {
    explicit LockError(const std::string& m) : Error("lock", m) {}
};

// Evaluation backends.
struct EvalError : Error {
    using Error::Error;
    explicit EvalError(const std::string& m) : Error("eval", m) {}
};

struct MissError : EvalError {
    MissError(const std::string& arch_id)
        : EvalError("miss", "architecture not in bench table: " + arch_id), arch_id(arch_id) {}
    std::string arch_id;
};

struct TransportError : EvalError {
    explicit TransportError(const std::string& m) : EvalError("transport", m) {}
};

struct TimeoutError : EvalError {
    explicit TimeoutError(const std::string& m) : EvalError("timeout", m) {}
};

struct HandshakeError : EvalError {
    explicit HandshakeError(const std::string& m) : EvalError("handshake", m) {}
};

struct CorrelationError : EvalError {
    explicit CorrelationError(const std::string& m) : EvalError("correlation", m) {}
};

struct TrainerError : EvalError {
    TrainerError(std::string code, const std::string& m)
        : EvalError("trainer", code + ": " + m), code(std::move(code)) {}
    std::string code;
};

}  // namespace seqnas
