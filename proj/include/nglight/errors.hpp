#pragma once

#include <stdexcept>
#include <string>

namespace nglight {

/// Failure categories. The numeric values double as CLI exit codes.
enum class ErrorCode : int {
    config = 2,
    not_converged = 3,
    non_finite = 4,
    guard = 5,
    truncation_leak = 6,
    degenerate_null_space = 7,
    io = 8,
    unphysical = 9,
};

inline const char* to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::config: return "ConfigError";
    case ErrorCode::not_converged: return "NotConverged";
    case ErrorCode::non_finite: return "NonFinite";
    case ErrorCode::guard: return "GuardViolation";
    case ErrorCode::truncation_leak: return "TruncationLeak";
    case ErrorCode::degenerate_null_space: return "DegenerateNullSpace";
    case ErrorCode::io: return "IoError";
    case ErrorCode::unphysical: return "UnphysicalState";
    }
    return "Error";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code)
    {
    }

    ErrorCode code() const noexcept { return code_; }
    int exit_code() const noexcept { return static_cast<int>(code_); }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what)
{
    throw Error(code, what);
}

} // namespace nglight
