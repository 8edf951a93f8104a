#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kf {

// Every failure the harness reports carries one of these codes so callers
// (tests, the CLI exit-code mapping, the agent loop) can branch on kind
// without string matching.
enum class ErrorCode {
    ParseError,
    ValidationError,
    IoError,
    AlreadyInjected,
    NothingInjected,
    TargetNotFound,
    CloneOfInjected,
    BuildSystemMissing,
    LineOutOfRange,
    MalformedTensor,
    ExecutionFailure,
    OutputMissing,
    DeviceBusy,
    MalformedPerfLog,
    NonPositiveLatency,
    MissingLatency,
    EmptyList,
    MissingBankEntry,
    NoBlockFound,
    MalformedPlan,
    MissingFile,
    ExtraneousFile,
    ClientError,
    InvalidArgument,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);

    ErrorCode code() const noexcept { return code_; }
    // Message without the "[Code] " prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace kf
