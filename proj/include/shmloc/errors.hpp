#pragma once

#include <stdexcept>
#include <string>

namespace shmloc {

/// Category of a domain error. The CLI maps these to machine-readable
/// error JSON on stderr; library code throws and never catches.
enum class ErrorKind {
    Config,
    Precondition,
    Bounds,
    Numeric,
    DegenerateReference,
    SingularBaseline,
    DegenerateFeature,
    Divergence,
    InvalidSplit,
    Label,
    Io,
};

inline const char* to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::Config: return "config";
        case ErrorKind::Precondition: return "precondition";
        case ErrorKind::Bounds: return "bounds";
        case ErrorKind::Numeric: return "numeric";
        case ErrorKind::DegenerateReference: return "degenerate_reference";
        case ErrorKind::SingularBaseline: return "singular_baseline";
        case ErrorKind::DegenerateFeature: return "degenerate_feature";
        case ErrorKind::Divergence: return "divergence";
        case ErrorKind::InvalidSplit: return "invalid_split";
        case ErrorKind::Label: return "label";
        case ErrorKind::Io: return "io";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string message)
        : std::runtime_error(std::move(message)), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

} // namespace shmloc
