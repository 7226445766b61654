#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace adareg {

enum class ErrorCode {
    DimensionMismatch,
    NotPD,
    NotPSD,
    ConvergenceFailure,
    ZeroMatrix,
    DegenerateRow,
    ZeroVariance,
    BadMagic,
    TruncatedFile,
    CountMismatch,
    ParseError,
    RaggedRows,
    SizeTooLarge,
    Diverged,
    EmptyDirectory,
    SchemaMismatch,
    MissingWeights,
    InvalidArgument,
    IoError,
    ConfigError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so
/// callers (and tests) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace adareg
