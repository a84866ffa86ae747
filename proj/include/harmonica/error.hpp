#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace harmonica {

/// Classes of failure surfaced by the runtime. The control service maps
/// these onto HTTP status codes (validation -> 400, not_found -> 404,
/// conflict -> 409).
enum class ErrorKind {
    validation,
    not_found,
    conflict,
    sequencing,
    insufficient_data,
    input,
    runtime,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::validation: return "validation_error";
        case ErrorKind::not_found: return "not_found";
        case ErrorKind::conflict: return "conflict";
        case ErrorKind::sequencing: return "sequencing_error";
        case ErrorKind::insufficient_data: return "insufficient_data";
        case ErrorKind::input: return "input_error";
        case ErrorKind::runtime: return "runtime_error";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string message, std::string field = {})
        : std::runtime_error(std::move(message)), kind_(kind), field_(std::move(field)) {}

    ErrorKind kind() const noexcept { return kind_; }
    /// Path of the offending input field (e.g. `rules[0].metric`), empty when not applicable.
    const std::string& field() const noexcept { return field_; }

private:
    ErrorKind kind_;
    std::string field_;
};

} // namespace harmonica
