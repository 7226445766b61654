#include "adareg/errors.hpp"

namespace adareg {

std::string_view to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotPD: return "NotPD";
    case ErrorCode::NotPSD: return "NotPSD";
    case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::ZeroMatrix: return "ZeroMatrix";
    case ErrorCode::DegenerateRow: return "DegenerateRow";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::RaggedRows: return "RaggedRows";
    case ErrorCode::SizeTooLarge: return "SizeTooLarge";
    case ErrorCode::Diverged: return "Diverged";
    case ErrorCode::EmptyDirectory: return "EmptyDirectory";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::MissingWeights: return "MissingWeights";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code)
{
}

void fail(ErrorCode code, const std::string& message)
{
    throw Error(code, message);
}

}  // namespace adareg
