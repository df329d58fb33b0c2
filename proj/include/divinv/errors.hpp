#pragma once

#include <stdexcept>
#include <string>

namespace divinv {

/// Error categories; the CLI maps them onto its exit-code contract
/// (1 = I/O, 2 = validation, 3 = convergence, 4 = resolution).
enum class ErrorKind {
    // geometry
    InclusionChainViolated,
    ControlVolumesOverlap,
    HoleCountExceeded,
    BadDeltas,
    InfeasibleDeltas,
    // fields
    BadExponent,
    EmptyRegion,
    // divsolve
    NotStarShaped,
    ResidualTooLarge,
    NonConvergence,
    MeanNotZero,
    UnderResolved,
    // perforated
    CompatibilityViolated,
    // harness / ledger
    ExponentRange,
    TooFewPoints,
    GammaRange,
    NotBetween,
    NotAdmissible,
    Delta0TooLarge,
    // plumbing
    Io,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

    /// Exit code bucket for the CLI.
    int exit_code() const {
        switch (kind_) {
        case ErrorKind::Io:
            return 1;
        case ErrorKind::NonConvergence:
        case ErrorKind::ResidualTooLarge:
            return 3;
        case ErrorKind::UnderResolved:
            return 4;
        default:
            return 2;
        }
    }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) {
    throw Error(kind, msg);
}

const char* error_kind_name(ErrorKind kind);

inline const char* error_kind_name_impl(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::InclusionChainViolated: return "InclusionChainViolated";
    case ErrorKind::ControlVolumesOverlap: return "ControlVolumesOverlap";
    case ErrorKind::HoleCountExceeded: return "HoleCountExceeded";
    case ErrorKind::BadDeltas: return "BadDeltas";
    case ErrorKind::InfeasibleDeltas: return "InfeasibleDeltas";
    case ErrorKind::BadExponent: return "BadExponent";
    case ErrorKind::EmptyRegion: return "EmptyRegion";
    case ErrorKind::NotStarShaped: return "NotStarShaped";
    case ErrorKind::ResidualTooLarge: return "ResidualTooLarge";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::MeanNotZero: return "MeanNotZero";
    case ErrorKind::UnderResolved: return "UnderResolved";
    case ErrorKind::CompatibilityViolated: return "CompatibilityViolated";
    case ErrorKind::ExponentRange: return "ExponentRange";
    case ErrorKind::TooFewPoints: return "TooFewPoints";
    case ErrorKind::GammaRange: return "GammaRange";
    case ErrorKind::NotBetween: return "NotBetween";
    case ErrorKind::NotAdmissible: return "NotAdmissible";
    case ErrorKind::Delta0TooLarge: return "Delta0TooLarge";
    case ErrorKind::Io: return "Io";
    }
    return "Unknown";
}

inline const char* error_kind_name(ErrorKind kind) { return error_kind_name_impl(kind); }

} // namespace divinv
