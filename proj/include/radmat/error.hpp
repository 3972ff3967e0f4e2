#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace radmat {

enum class ErrorKind {
    InvalidConfig,
    Domain,
    Rejected,
    Unsupported,
    AmbiguousDoa,
    MissingCalibration,
    DegenerateGeometry,
    SingularInput,
    InversionFailure,
    InvalidInput,
    EmptyIndex,
    Unembeddable,
    EmbedderMismatch,
    EndpointUnreachable,
    EndpointError,
    CalibrationAmbiguity,
    NoTarget,
    Io,
    Format,
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::InvalidConfig: return "invalid-config";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Rejected: return "rejected";
    case ErrorKind::Unsupported: return "unsupported-operation";
    case ErrorKind::AmbiguousDoa: return "ambiguous-doa";
    case ErrorKind::MissingCalibration: return "missing-calibration";
    case ErrorKind::DegenerateGeometry: return "degenerate-geometry";
    case ErrorKind::SingularInput: return "singular-input";
    case ErrorKind::InversionFailure: return "inversion-failure";
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::EmptyIndex: return "empty-index";
    case ErrorKind::Unembeddable: return "unembeddable";
    case ErrorKind::EmbedderMismatch: return "embedder-mismatch";
    case ErrorKind::EndpointUnreachable: return "endpoint-unreachable";
    case ErrorKind::EndpointError: return "endpoint-error";
    case ErrorKind::CalibrationAmbiguity: return "calibration-ambiguity";
    case ErrorKind::NoTarget: return "no-target";
    case ErrorKind::Io: return "io";
    case ErrorKind::Format: return "format";
    }
    return "unknown";
}

/// Single exception type for the library; `kind()` carries the category so
/// callers can branch without a class hierarchy.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

    /// Re-throw with a pipeline stage prefix, keeping the kind.
    [[noreturn]] static void rethrow_with_stage(const Error& e, std::string_view stage) {
        throw Error(e.kind(), std::string(stage) + ": " + detail_message(e));
    }

private:
    static std::string detail_message(const Error& e) {
        std::string msg = e.what();
        auto prefix = std::string(to_string(e.kind())) + ": ";
        if (msg.rfind(prefix, 0) == 0) msg.erase(0, prefix.size());
        return msg;
    }

    ErrorKind kind_;
};

} // namespace radmat
