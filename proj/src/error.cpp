#include "fone/error.hpp"

namespace fone {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::invalid_argument: return "invalid-argument";
        case ErrorKind::format_overflow: return "format-overflow";
        case ErrorKind::unsupported_sign: return "unsupported-sign";
        case ErrorKind::degenerate_pair: return "degenerate-pair";
        case ErrorKind::recovery_failure: return "recovery-failure";
        case ErrorKind::invalid_digit: return "invalid-digit";
        case ErrorKind::invalid_index: return "invalid-index";
        case ErrorKind::invalid_format: return "invalid-format";
        case ErrorKind::exhausted_space: return "exhausted-space";
        case ErrorKind::size_error: return "size-error";
        case ErrorKind::parse_error: return "parse-error";
        case ErrorKind::config_error: return "config-error";
        case ErrorKind::length_error: return "length-error";
        case ErrorKind::state_error: return "state-error";
        case ErrorKind::divergence_error: return "divergence-error";
        case ErrorKind::task_mismatch: return "task-mismatch";
        case ErrorKind::io_error: return "io-error";
    }
    return "unknown";
}

}  // namespace fone
