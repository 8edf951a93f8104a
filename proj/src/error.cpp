#include "kf/error.hpp"

namespace kf {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::ValidationError: return "ValidationError";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::AlreadyInjected: return "AlreadyInjected";
        case ErrorCode::NothingInjected: return "NothingInjected";
        case ErrorCode::TargetNotFound: return "TargetNotFound";
        case ErrorCode::CloneOfInjected: return "CloneOfInjected";
        case ErrorCode::BuildSystemMissing: return "BuildSystemMissing";
        case ErrorCode::LineOutOfRange: return "LineOutOfRange";
        case ErrorCode::MalformedTensor: return "MalformedTensor";
        case ErrorCode::ExecutionFailure: return "ExecutionFailure";
        case ErrorCode::OutputMissing: return "OutputMissing";
        case ErrorCode::DeviceBusy: return "DeviceBusy";
        case ErrorCode::MalformedPerfLog: return "MalformedPerfLog";
        case ErrorCode::NonPositiveLatency: return "NonPositiveLatency";
        case ErrorCode::MissingLatency: return "MissingLatency";
        case ErrorCode::EmptyList: return "EmptyList";
        case ErrorCode::MissingBankEntry: return "MissingBankEntry";
        case ErrorCode::NoBlockFound: return "NoBlockFound";
        case ErrorCode::MalformedPlan: return "MalformedPlan";
        case ErrorCode::MissingFile: return "MissingFile";
        case ErrorCode::ExtraneousFile: return "ExtraneousFile";
        case ErrorCode::ClientError: return "ClientError";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error("[" + std::string(to_string(code)) + "] " + message),
      code_(code),
      detail_(message) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace kf
