#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "locflow/crypto.hpp"
#include "locflow/errors.hpp"

namespace locflow {

// Abstract timestamp, seconds. The real server feeds wall-clock seconds,
// the simulator a virtual clock; scheduling logic never reads a clock
// itself.
using Timestamp = double;

// ---------------------------------------------------------------------------
// File identity

// A data file is identified by name plus content hash. Template matching
// works on names; digests are checked whenever the authoritative digest of
// a name is known (see SchedulerState::file_catalog).
struct FileId {
    std::string name;
    std::string digest;      // sha256, lowercase hex, 64 chars
    std::uint64_t size_bytes = 0;

    bool operator==(const FileId&) const = default;
};

bool valid_file_name(const std::string& name);
// Throws Error(InvalidName) when a field violates the invariants.
void validate_file_id(const FileId& id);

FileId file_id_of_bytes(const std::string& name, const Bytes& content);

// ---------------------------------------------------------------------------
// Templates

// A file name pattern where every "{index}" is replaced by a decimal index.
// A pattern with no variable names exactly one file.
struct FileTemplate {
    std::string pattern;

    bool operator==(const FileTemplate&) const = default;
};

std::string resolve_template(const FileTemplate& t, std::uint64_t index);
// True when `name` equals the template resolved with some single index
// (all occurrences bind the same value, canonical decimal form).
std::optional<std::uint64_t> match_template(const FileTemplate& t, const std::string& name);

// ---------------------------------------------------------------------------
// Applications, environments, patches

struct SignedFile {
    FileId file;
    Bytes signature;   // project signature over the raw content digest
    bool entry = false; // the one executable that gets launched

    bool operator==(const SignedFile&) const = default;
};

struct ApplicationSpec {
    std::string app_id;
    int version = 1;
    std::vector<SignedFile> files;
    std::uint64_t min_memory_mb = 0;
    std::uint64_t min_disk_mb = 0;

    bool operator==(const ApplicationSpec&) const = default;
};

// Throws Error on empty file list, missing/duplicate entry flag, or a
// signature that does not verify under the project key.
void validate_application(const ApplicationSpec& app, const Bytes& project_public_key);

struct EnvironmentBundle {
    std::string env_id;
    std::string app_id;
    std::vector<FileId> files;

    bool operator==(const EnvironmentBundle&) const = default;
};

void validate_environment(const EnvironmentBundle& env);

struct Patch {
    std::string patch_id;
    std::string env_id;
    std::vector<FileId> overlay_files; // same-name overlay replaces the env file

    bool operator==(const Patch&) const = default;
};

void validate_patch(const Patch& patch);

// ---------------------------------------------------------------------------
// Workunits

enum class WuState { PENDING, WAITING_FOR_DATA, READY, ASSIGNED, DONE, FAILED };

const char* wu_state_name(WuState s);
WuState wu_state_from_name(const std::string& name);
bool wu_transition_allowed(WuState from, WuState to);

struct Workunit {
    std::string wu_id;
    std::string app_id;
    std::string env_id;
    std::string patch_id;               // empty = none
    std::vector<std::string> required_inputs; // resolved file names
    FileTemplate output_template;       // may keep {index} unbound
    std::string get_input_app;          // empty = none
    std::vector<std::string> predecessors;
    std::uint64_t max_result_size_bytes = 1;
    double deadline_secs = 1;
    std::uint32_t max_retries = 0;
    std::uint32_t retries_left = 0;
    std::uint64_t submit_seq = 0;
    WuState state = WuState::PENDING;
    // Wait window elapsed without any holder; the next feasible requester
    // may take the get-input application.
    bool get_input_ready = false;
};

// Checks predecessor resolution and acyclicity over the whole set.
// Throws Error(DanglingPredecessor) or Error(CycleDetected) with the
// offending path in the message.
void validate_workunit_set(const std::vector<Workunit>& wus);

// ---------------------------------------------------------------------------
// Results

enum class ResultState { UNSENT, IN_PROGRESS, SUCCESS, ERROR, TIMEOUT, OVERSIZE };

const char* result_state_name(ResultState s);
ResultState result_state_from_name(const std::string& name);
bool result_transition_allowed(ResultState from, ResultState to);
bool result_state_terminal(ResultState s);

struct ResultRecord {
    std::string result_id;
    std::string wu_id;
    std::string client_id;
    ResultState state = ResultState::UNSENT;
    Timestamp assigned_at = 0;
    Timestamp deadline_at = 0;
    double cpu_seconds = 0;
    std::vector<FileId> output_files;
};

// ---------------------------------------------------------------------------
// Clients

struct ClientRecord {
    std::string client_id;
    std::string user_id;
    std::string group_id; // empty = none
    std::uint32_t cpu_count = 1;
    double benchmark_gflops = 1.0;
    std::uint64_t memory_mb = 0;
    std::uint64_t disk_mb = 0;
    std::map<std::string, FileId> inventory; // keyed by FileId.name
    Timestamp last_contact = 0;

    bool operator==(const ClientRecord&) const = default;
};

void validate_client(const ClientRecord& client);

// ---------------------------------------------------------------------------
// Credit

class CreditLedger {
public:
    // credit += amount for the user and, when set, its group.
    void grant(const std::string& user_id, const std::string& group_id, double amount);

    double user_credit(const std::string& user_id) const;
    double group_credit(const std::string& group_id) const;
    const std::map<std::string, double>& users() const { return users_; }
    const std::map<std::string, double>& groups() const { return groups_; }

private:
    std::map<std::string, double> users_;
    std::map<std::string, double> groups_;
};

// ---------------------------------------------------------------------------
// Transition audit

// One observed state change; scheduler operations append these to an
// attached log so traces can be replayed through the validators below.
struct Transition {
    enum class Kind { WORKUNIT, RESULT };
    Kind kind = Kind::WORKUNIT;
    std::string id;
    // Stored as names so a single log covers both machines.
    std::string from;
    std::string to;
    Timestamp at = 0;
};

// Throws Error when a transition in the trace is outside the allowed sets.
void validate_transition_trace(const std::vector<Transition>& trace);

} // namespace locflow
