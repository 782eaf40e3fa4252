#include "ems/error.hpp"

namespace ems {

std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::MissingChannel: return "MissingChannel";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::IncompatibleRates: return "IncompatibleRates";
    case ErrorCode::InvalidPlan: return "InvalidPlan";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MissingLandmark: return "MissingLandmark";
    case ErrorCode::DegenerateShape: return "DegenerateShape";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::WindowTooLarge: return "WindowTooLarge";
    case ErrorCode::EmptyKinds: return "EmptyKinds";
    case ErrorCode::MissingWeight: return "MissingWeight";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::TooFewRows: return "TooFewRows";
    case ErrorCode::ArityMismatch: return "ArityMismatch";
    case ErrorCode::MissingClass: return "MissingClass";
    case ErrorCode::TooFewSessions: return "TooFewSessions";
    case ErrorCode::Io: return "Io";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::NotConverged: return "NotConverged";
    }
    return "Unknown";
}

bool is_numeric_failure(ErrorCode code)
{
    return code == ErrorCode::ZeroVariance || code == ErrorCode::NotConverged;
}

} // namespace ems
