#include "cavar/error.hpp"

namespace cavar {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::TooShort:
            return "TooShort";
        case ErrorCode::NonPositivePrice:
            return "NonPositivePrice";
        case ErrorCode::EmptyPartition:
            return "EmptyPartition";
        case ErrorCode::ConstantColumn:
            return "ConstantColumn";
        case ErrorCode::WindowTooLarge:
            return "WindowTooLarge";
        case ErrorCode::InvalidParams:
            return "InvalidParams";
        case ErrorCode::NonFinite:
            return "NonFinite";
        case ErrorCode::ConvergenceFailure:
            return "ConvergenceFailure";
        case ErrorCode::DomainError:
            return "DomainError";
        case ErrorCode::NoViolations:
            return "NoViolations";
        case ErrorCode::SingleClass:
            return "SingleClass";
        case ErrorCode::LengthMismatch:
            return "LengthMismatch";
        case ErrorCode::IndexOutOfRange:
            return "IndexOutOfRange";
        case ErrorCode::NonFiniteLoss:
            return "NonFiniteLoss";
        case ErrorCode::EmptyWindow:
            return "EmptyWindow";
        case ErrorCode::DegenerateChain:
            return "DegenerateChain";
        case ErrorCode::DegenerateInput:
            return "DegenerateInput";
        case ErrorCode::AllZeroDifferences:
            return "AllZeroDifferences";
        case ErrorCode::EmptySample:
            return "EmptySample";
        case ErrorCode::NoExceedances:
            return "NoExceedances";
        case ErrorCode::OutOfSupport:
            return "OutOfSupport";
        case ErrorCode::TooFewExceedances:
            return "TooFewExceedances";
        case ErrorCode::EmptyMatrix:
            return "EmptyMatrix";
        case ErrorCode::ParseError:
            return "ParseError";
        case ErrorCode::Io:
            return "Io";
        case ErrorCode::ConfigInvalid:
            return "ConfigInvalid";
        case ErrorCode::MissingArtifact:
            return "MissingArtifact";
    }
    return "Unknown";
}

}  // namespace cavar
