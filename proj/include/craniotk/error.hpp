#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace craniotk {

// Every failure the core can raise. The C API maps these one-to-one onto
// ctk_status values, so keep the two lists in sync.
enum class ErrorCode {
    InvalidArgument = 1,
    GeometryMismatch,
    EmptyMask,
    FullMask,
    OutOfBounds,
    NoUpperSurface,
    EmptyDefect,
    EmptyInput,
    NonConvergence,
    BadMagic,
    UnsupportedDatatype,
    NonOrthogonalOrientation,
    UnsupportedHeader,
    Truncated,
    IoFailure,
    SchemaViolation,
    RegistrationFailed,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

} // namespace craniotk
