#pragma once

#include <stdexcept>
#include <string>

namespace pano_nav {

enum class ErrorKind {
    UnknownObjectId,
    GenerationFailed,
    InfeasibleTask,
    NonFiniteOutput,
    DivergedTraining,
    MissingResult,
    ConfigError,
    ValidationError,
    IoError,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::UnknownObjectId: return "UnknownObjectId";
    case ErrorKind::GenerationFailed: return "GenerationFailed";
    case ErrorKind::InfeasibleTask: return "InfeasibleTask";
    case ErrorKind::NonFiniteOutput: return "NonFiniteOutput";
    case ErrorKind::DivergedTraining: return "DivergedTraining";
    case ErrorKind::MissingResult: return "MissingResult";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::ValidationError: return "ValidationError";
    case ErrorKind::IoError: return "IoError";
    }
    return "Unknown";
}

/// Hard error raised for malformed input. In-world failures (a blocked move,
/// an unreachable target) are reported through results, never through this.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace pano_nav
