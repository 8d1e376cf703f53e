#pragma once

#include <stdexcept>
#include <string>

namespace tgrag {

/// Base of every error the engine throws. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad configuration or caller input (exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A documented precondition of an operation was violated.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Workdir is missing artifacts a command needs (exit code 3).
class StateError : public Error {
public:
    using Error::Error;
};

/// Malformed data file or unparseable model output (exit code 4).
class DataError : public Error {
public:
    using Error::Error;
};

/// Persisted file is truncated, corrupt or of an unknown schema version.
class LoadError : public DataError {
public:
    enum class Kind { Corrupt, VersionMismatch, Io };
    LoadError(Kind kind, const std::string& what) : DataError(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// Transport or protocol failure talking to a model service (exit code 5).
class ProviderError : public Error {
public:
    ProviderError(const std::string& what, std::string request_id = {})
        : Error(what), request_id_(std::move(request_id)) {}
    const std::string& request_id() const noexcept { return request_id_; }

private:
    std::string request_id_;
};

/// The model answered with an empty completion.
class EmptyResponseError : public ProviderError {
public:
    using ProviderError::ProviderError;
};

}  // namespace tgrag
