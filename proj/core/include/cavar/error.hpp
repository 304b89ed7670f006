#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cavar {

enum class ErrorCode {
    TooShort,
    NonPositivePrice,
    EmptyPartition,
    ConstantColumn,
    WindowTooLarge,
    InvalidParams,
    NonFinite,
    ConvergenceFailure,
    DomainError,
    NoViolations,
    SingleClass,
    LengthMismatch,
    IndexOutOfRange,
    NonFiniteLoss,
    EmptyWindow,
    DegenerateChain,
    DegenerateInput,
    AllZeroDifferences,
    EmptySample,
    NoExceedances,
    OutOfSupport,
    TooFewExceedances,
    EmptyMatrix,
    ParseError,
    Io,
    ConfigInvalid,
    MissingArtifact,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Library-wide exception. Every failure carries a machine-readable code so
/// the CLI can map it onto an exit status and an error JSON record.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace cavar
