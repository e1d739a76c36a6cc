#pragma once

#include <stdexcept>
#include <string>

namespace sindykit {

/// Base of every error thrown by the library. `exit_code()` is what the CLI
/// returns when the error escapes a command.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what, int code) : std::runtime_error(what), code_(code) {}
    int exit_code() const noexcept { return code_; }

private:
    int code_;
};

/// Caller broke a precondition (dimension mismatch, empty input, bad enum).
class ContractViolation : public Error {
public:
    explicit ContractViolation(const std::string& what) : Error(what, 2) {}
};

/// Invalid or inconsistent experiment configuration.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what, 2) {}
};

/// Input data failed a quality check (non-finite entries, missing columns).
class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(what, 3) {}
};

/// Integration or solver failure.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(what, 4) {}
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ContractViolation(msg);
}

}  // namespace detail

}  // namespace sindykit
