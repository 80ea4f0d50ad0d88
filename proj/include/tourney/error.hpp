#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace tourney {

/// Broad failure classes. The CLI maps each class onto an exit code.
enum class ErrorKind {
    domain,        // argument outside an operation's domain
    precondition,  // a modelling assumption the operation relies on does not hold
    band_escape,   // equilibrium ODE left the admissible bid band
    singular_start,
    no_convergence,
    config,
    io,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error(ErrorKind::domain, what) {}
};

class PreconditionError : public Error {
public:
    explicit PreconditionError(const std::string& what) : Error(ErrorKind::precondition, what) {}
};

class BandEscape : public Error {
public:
    BandEscape(const std::string& what, double at_v)
        : Error(ErrorKind::band_escape, what), at_v_(at_v) {}
    [[nodiscard]] double at_v() const noexcept { return at_v_; }

private:
    double at_v_;
};

class SingularStartFailure : public Error {
public:
    explicit SingularStartFailure(const std::string& what) : Error(ErrorKind::singular_start, what) {}
};

class NoConvergence : public Error {
public:
    NoConvergence(const std::string& what, double last_delta)
        : Error(ErrorKind::no_convergence, what), last_delta_(last_delta) {}
    [[nodiscard]] double last_delta() const noexcept { return last_delta_; }

private:
    double last_delta_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
    ConfigError(const std::string& what, std::vector<std::string> violations)
        : Error(ErrorKind::config, what), violations_(std::move(violations)) {}
    /// One "path: message" entry per problem found.
    [[nodiscard]] const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
    std::vector<std::string> violations_;
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

}  // namespace tourney
