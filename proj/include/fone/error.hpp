#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fone {

enum class ErrorKind {
    invalid_argument,
    format_overflow,
    unsupported_sign,
    degenerate_pair,
    recovery_failure,
    invalid_digit,
    invalid_index,
    invalid_format,
    exhausted_space,
    size_error,
    parse_error,
    config_error,
    length_error,
    state_error,
    divergence_error,
    task_mismatch,
    io_error,
};

/// Stable kebab-case name, used in CLI failure reports.
std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Malformed record file line; `line()` is 1-based.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& message)
        : Error(ErrorKind::parse_error, "line " + std::to_string(line) + ": " + message),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

}  // namespace fone
