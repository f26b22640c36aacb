#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace talbot {

/// Argument outside the mathematical domain of an operation (E <= 0, d1 <= d2, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Simulation or analysis configuration that cannot be honoured (grid too coarse, unknown key, ...).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or unusable input data.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Parse failure in a text file; carries the 1-based line number.
class ParseError : public InputError {
public:
    ParseError(std::string const& file, std::size_t line, std::string const& what)
        : InputError(file + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A numerical procedure (fit, root search) failed to converge.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace talbot
