#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dflsim {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad configuration or spec content. The CLI maps this to exit code 2.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what, std::size_t line = 0)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class InputError : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class AggregationError : public Error {
public:
    using Error::Error;
};

// Malformed dataset or edge-list file; line is 1-based, 0 when not tied to a line.
class IngestError : public Error {
public:
    IngestError(const std::string& what, std::size_t line = 0)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class SelectionError : public Error {
public:
    using Error::Error;
};

class PlanError : public Error {
public:
    using Error::Error;
};

class UndefinedCorrelationError : public Error {
public:
    using Error::Error;
};

}  // namespace dflsim
