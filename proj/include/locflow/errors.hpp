#pragma once

#include <stdexcept>
#include <string>

namespace locflow {

enum class ErrorCode {
    InvalidName,
    InvalidTemplate,
    DanglingPredecessor,
    CycleDetected,
    MalformedMessage,
    VersionMismatch,
    UnknownClient,
    StaleProtocol,
    UnknownAssignment,
    UnknownResult,
    ResultNotInProgress,
    UnknownApplication,
    UnknownEnvironment,
    UnknownWorkunit,
    UnknownJob,
    BadSignature,
    DigestMismatch,
    JobIncomplete,
    MissingBlob,
    NotFound,
    UnreadableDirectory,
    LaunchFailure,
    Timeout,
    IoError,
    BadConfig,
    InvalidEventCount,
};

const char* error_code_name(ErrorCode code);
ErrorCode error_code_from_name(const std::string& name);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
          code_(code),
          message_(std::move(message)) {}

    ErrorCode code() const { return code_; }
    const std::string& message() const { return message_; }

private:
    ErrorCode code_;
    std::string message_;
};

} // namespace locflow
