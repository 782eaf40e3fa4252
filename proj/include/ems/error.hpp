#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ems {

enum class ErrorCode {
    // input validation
    MissingChannel,
    MalformedRow,
    EmptyFile,
    EmptyInput,
    OutOfRange,
    IncompatibleRates,
    InvalidPlan,
    InvalidArgument,
    MissingLandmark,
    DegenerateShape,
    LengthMismatch,
    TooFewPoints,
    TooShort,
    WindowTooLarge,
    EmptyKinds,
    MissingWeight,
    SingleClass,
    TooFewRows,
    ArityMismatch,
    MissingClass,
    TooFewSessions,
    Io,
    // numeric failures
    ZeroVariance,
    NotConverged,
};

std::string_view to_string(ErrorCode code);

/// True for codes that signal a numeric failure rather than bad input.
bool is_numeric_failure(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& detail)
        : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace ems
