#include "locflow/errors.hpp"

#include <array>
#include <utility>

namespace locflow {

namespace {

constexpr std::array<std::pair<ErrorCode, const char*>, 26> kNames{{
    {ErrorCode::InvalidName, "InvalidName"},
    {ErrorCode::InvalidTemplate, "InvalidTemplate"},
    {ErrorCode::DanglingPredecessor, "DanglingPredecessor"},
    {ErrorCode::CycleDetected, "CycleDetected"},
    {ErrorCode::MalformedMessage, "MalformedMessage"},
    {ErrorCode::VersionMismatch, "VersionMismatch"},
    {ErrorCode::UnknownClient, "UnknownClient"},
    {ErrorCode::StaleProtocol, "StaleProtocol"},
    {ErrorCode::UnknownAssignment, "UnknownAssignment"},
    {ErrorCode::UnknownResult, "UnknownResult"},
    {ErrorCode::ResultNotInProgress, "ResultNotInProgress"},
    {ErrorCode::UnknownApplication, "UnknownApplication"},
    {ErrorCode::UnknownEnvironment, "UnknownEnvironment"},
    {ErrorCode::UnknownWorkunit, "UnknownWorkunit"},
    {ErrorCode::UnknownJob, "UnknownJob"},
    {ErrorCode::BadSignature, "BadSignature"},
    {ErrorCode::DigestMismatch, "DigestMismatch"},
    {ErrorCode::JobIncomplete, "JobIncomplete"},
    {ErrorCode::MissingBlob, "MissingBlob"},
    {ErrorCode::NotFound, "NotFound"},
    {ErrorCode::UnreadableDirectory, "UnreadableDirectory"},
    {ErrorCode::LaunchFailure, "LaunchFailure"},
    {ErrorCode::Timeout, "Timeout"},
    {ErrorCode::IoError, "IoError"},
    {ErrorCode::BadConfig, "BadConfig"},
    {ErrorCode::InvalidEventCount, "InvalidEventCount"},
}};

} // namespace

const char* error_code_name(ErrorCode code) {
    for (const auto& [c, name] : kNames) {
        if (c == code) return name;
    }
    return "UnknownError";
}

ErrorCode error_code_from_name(const std::string& name) {
    for (const auto& [c, n] : kNames) {
        if (name == n) return c;
    }
    return ErrorCode::IoError;
}

} // namespace locflow
