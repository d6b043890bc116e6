#pragma once

#include <stdexcept>
#include <string>

namespace ovalab {

enum class ErrorKind {
    parameter,
    shape,
    domain,
    coverage,
    degeneracy,
    step_size,
    accuracy,
    search,
    normalization,
    io,
};

// Process exit codes used by the command line tool and the C API.
enum class ExitCode : int {
    ok = 0,
    parameter = 2,
    coverage = 3,
    numerical = 4,
};

inline const char* kind_name(ErrorKind k) {
    switch (k) {
    case ErrorKind::parameter: return "ParameterError";
    case ErrorKind::shape: return "ShapeError";
    case ErrorKind::domain: return "DomainError";
    case ErrorKind::coverage: return "CoverageError";
    case ErrorKind::degeneracy: return "DegeneracyError";
    case ErrorKind::step_size: return "StepSizeError";
    case ErrorKind::accuracy: return "AccuracyError";
    case ErrorKind::search: return "SearchError";
    case ErrorKind::normalization: return "NormalizationError";
    case ErrorKind::io: return "IOError";
    }
    return "Error";
}

inline ExitCode exit_code_for(ErrorKind k) {
    switch (k) {
    case ErrorKind::parameter:
    case ErrorKind::shape:
    case ErrorKind::io:
        return ExitCode::parameter;
    case ErrorKind::coverage:
        return ExitCode::coverage;
    default:
        return ExitCode::numerical;
    }
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg)
        : std::runtime_error(std::string(kind_name(kind)) + ": " + msg), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    ExitCode exit_code() const noexcept { return exit_code_for(kind_); }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, msg); }

inline void require(bool cond, ErrorKind kind, const std::string& msg) {
    if (!cond) fail(kind, msg);
}

} // namespace ovalab
