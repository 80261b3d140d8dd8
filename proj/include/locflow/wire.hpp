#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "locflow/domain.hpp"

namespace locflow {

// Protocol revision. Servers reject any other value instead of negotiating.
constexpr int kProtocolVersion = 1;

// Upper bound on a frame body; larger length prefixes are treated as
// malformed rather than allocated.
constexpr std::uint32_t kMaxFrameBytes = 256u << 20;

enum class FilePurpose { APP, ENV, PATCH };
const char* file_purpose_name(FilePurpose p);

// One entry of a download manifest. APP entries always carry a signature.
struct ManifestEntry {
    FileId file;
    FilePurpose purpose = FilePurpose::APP;
    Bytes signature;

    bool operator==(const ManifestEntry&) const = default;
};

struct RegisterRequest {
    ClientRecord client;   // client_id empty on first contact
    int protocol_version = kProtocolVersion;
    bool operator==(const RegisterRequest&) const = default;
};

struct RegisterReply {
    std::string client_id;
    bool operator==(const RegisterReply&) const = default;
};

struct WorkRequest {
    std::string client_id;
    std::uint32_t cpu_count = 1;
    double benchmark_gflops = 1.0;
    std::uint64_t memory_mb = 0;
    std::uint64_t disk_mb = 0;
    std::vector<FileId> inventory;
    int protocol_version = kProtocolVersion;
    bool operator==(const WorkRequest&) const = default;
};

enum class WorkReplyKind { ASSIGNMENT, GET_INPUT_ASSIGNMENT, NO_WORK };
const char* work_reply_kind_name(WorkReplyKind k);

struct WorkReply {
    WorkReplyKind kind = WorkReplyKind::NO_WORK;
    // Assignment fields; empty/zero for NO_WORK.
    std::string result_id;
    std::string wu_id;
    Timestamp deadline_at = 0;
    std::vector<ManifestEntry> manifest; // never lists required input files
    std::vector<std::string> input_names; // local files to link into the sandbox
    std::string output_template;          // where the worker collects outputs
    // NO_WORK field.
    double backoff_secs = 0;
    bool operator==(const WorkReply&) const = default;
};

struct InventoryQuery {
    std::vector<std::string> names;
    bool operator==(const InventoryQuery&) const = default;
};

struct InventoryAnswer {
    std::string client_id;
    std::vector<std::string> names; // subset of the queried names
    bool operator==(const InventoryAnswer&) const = default;
};

struct InventoryAnswerBatch {
    std::vector<InventoryAnswer> answers;
    bool operator==(const InventoryAnswerBatch&) const = default;
};

enum class UploadStatus { SUCCESS, ERROR };

struct OutputPayload {
    FileId file;
    Bytes data; // length must equal file.size_bytes
    bool operator==(const OutputPayload&) const = default;
};

struct ResultUpload {
    std::string result_id;
    UploadStatus status = UploadStatus::SUCCESS;
    double cpu_seconds = 0;
    std::vector<OutputPayload> outputs;
    bool operator==(const ResultUpload&) const = default;
};

struct UploadReply {
    std::string recorded_state; // result state after applying the upload
    bool operator==(const UploadReply&) const = default;
};

struct DownloadRequest {
    std::string digest;
    bool operator==(const DownloadRequest&) const = default;
};

struct DownloadReply {
    Bytes data;
    bool operator==(const DownloadReply&) const = default;
};

struct BlobPayload {
    std::string digest;
    Bytes data;
    bool operator==(const BlobPayload&) const = default;
};

struct SubmitAppRequest {
    ApplicationSpec spec;
    std::vector<BlobPayload> blobs;
    bool operator==(const SubmitAppRequest&) const = default;
};

struct SubmitAppReply {
    std::string app_id;
    bool operator==(const SubmitAppReply&) const = default;
};

// One stage of a job: `count` workunits expanded from the templates.
struct JobStage {
    std::string name;
    std::string app_id;
    std::uint32_t count = 1;
    std::vector<std::string> input_patterns;  // resolved with the workunit index
    std::string output_pattern;               // resolved only when count > 1
    std::vector<FileId> env_files;
    std::vector<FileId> patch_files;
    std::string get_input_app;
    std::vector<std::string> predecessors; // stage names in this job, or existing wu_ids
    std::uint64_t max_result_size_bytes = 1u << 20;
    double deadline_secs = 3600;
    std::uint32_t max_retries = 3;
    bool operator==(const JobStage&) const = default;
};

struct SubmitJobRequest {
    std::vector<JobStage> stages;
    std::vector<BlobPayload> blobs;
    bool operator==(const SubmitJobRequest&) const = default;
};

struct SubmitJobReply {
    std::string job_id;
    std::vector<std::string> wu_ids;
    bool operator==(const SubmitJobReply&) const = default;
};

struct StatusRequest {
    std::string job_id; // empty = whole project
    bool operator==(const StatusRequest&) const = default;
};

struct WorkunitStatus {
    std::string wu_id;
    std::string state;
    std::string job_id;
    bool operator==(const WorkunitStatus&) const = default;
};

struct ResultStatus {
    std::string result_id;
    std::string wu_id;
    std::string client_id;
    std::string state;
    bool operator==(const ResultStatus&) const = default;
};

struct ClientStatus {
    std::string client_id;
    std::uint64_t inventory_files = 0;
    Timestamp last_contact = 0;
    bool operator==(const ClientStatus&) const = default;
};

struct CreditRow {
    std::string id;
    double credit = 0;
    bool operator==(const CreditRow&) const = default;
};

struct StatusReply {
    std::vector<std::pair<std::string, std::uint64_t>> state_counts; // state name -> count
    std::vector<WorkunitStatus> workunits;
    std::vector<ResultStatus> results;
    std::vector<ClientStatus> clients;
    std::vector<CreditRow> users;
    std::vector<CreditRow> groups;
    bool operator==(const StatusReply&) const = default;
};

struct FetchRequest {
    std::string job_id;
    bool operator==(const FetchRequest&) const = default;
};

struct FetchReply {
    Bytes archive;
    bool operator==(const FetchReply&) const = default;
};

struct ErrorReply {
    std::string code;
    std::string message;
    bool operator==(const ErrorReply&) const = default;
};

struct Ack {
    bool operator==(const Ack&) const = default;
};

// Server-internal events sharing the codec so the journal and the wire use
// one canonical encoding.
struct TickWaits {
    bool operator==(const TickWaits&) const = default;
};
struct TickDeadlines {
    bool operator==(const TickDeadlines&) const = default;
};

using Message =
    std::variant<RegisterRequest, RegisterReply, WorkRequest, WorkReply, InventoryQuery,
                 InventoryAnswerBatch, ResultUpload, UploadReply, DownloadRequest,
                 DownloadReply, SubmitAppRequest, SubmitAppReply, SubmitJobRequest,
                 SubmitJobReply, StatusRequest, StatusReply, FetchRequest, FetchReply,
                 ErrorReply, Ack, TickWaits, TickDeadlines>;

const char* message_kind(const Message& m);

struct WireError {
    ErrorCode code = ErrorCode::MalformedMessage;
    std::size_t position = 0; // byte offset in the input where decoding failed
    std::string detail;
};

using DecodeResult = std::variant<Message, WireError>;

// Canonical encoding of the message body: UTF-8 structured text with a
// byte-stable field order. encode() is deterministic; decode(encode(m)) == m
// for every valid message; unknown or missing fields are rejected.
Bytes encode_message(const Message& m);
DecodeResult decode_message(const std::uint8_t* data, std::size_t len);
DecodeResult decode_message(const Bytes& body);

// Framing: 4-byte big-endian body length, then the body.
Bytes frame_message(const Message& m);
// Decodes one framed message from the start of `data`; `consumed` receives
// the frame length on success.
DecodeResult decode_frame(const std::uint8_t* data, std::size_t len,
                          std::size_t* consumed = nullptr);

// Journal record: a message tagged with the timestamp it was applied at.
struct TimedMessage {
    Timestamp t = 0;
    Message msg;
};

Bytes encode_event(const TimedMessage& ev);
std::variant<TimedMessage, WireError> decode_event(const Bytes& body);

std::string base64_encode(const Bytes& data);
std::optional<Bytes> base64_decode(const std::string& text);

} // namespace locflow
