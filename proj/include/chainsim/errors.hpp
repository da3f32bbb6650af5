#pragma once

#include <stdexcept>
#include <string>

namespace chainsim {

enum class ErrorCode {
    SchedulingInPast,
    InvalidDistribution,
    TopologyInfeasible,
    BrokenLink,
    BadHeight,
    InsufficientProof,
    ForeignAttestor,
    UnknownConfigRef,
    OversizedBlock,
    UnknownRange,
    EmptyInput,
    ParseError,
    UnknownKey,
    InvalidValue,
    MissingArtifacts,
};

inline const char* to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::SchedulingInPast: return "SchedulingInPast";
        case ErrorCode::InvalidDistribution: return "InvalidDistribution";
        case ErrorCode::TopologyInfeasible: return "TopologyInfeasible";
        case ErrorCode::BrokenLink: return "BrokenLink";
        case ErrorCode::BadHeight: return "BadHeight";
        case ErrorCode::InsufficientProof: return "InsufficientProof";
        case ErrorCode::ForeignAttestor: return "ForeignAttestor";
        case ErrorCode::UnknownConfigRef: return "UnknownConfigRef";
        case ErrorCode::OversizedBlock: return "OversizedBlock";
        case ErrorCode::UnknownRange: return "UnknownRange";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::UnknownKey: return "UnknownKey";
        case ErrorCode::InvalidValue: return "InvalidValue";
        case ErrorCode::MissingArtifacts: return "MissingArtifacts";
    }
    return "UnknownError";
}

class SimError : public std::runtime_error {
public:
    SimError(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), m_code(code) {}

    ErrorCode code() const noexcept { return m_code; }

private:
    ErrorCode m_code;
};

} // namespace chainsim
