#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "locflow/domain.hpp"
#include "locflow/wire.hpp"

namespace locflow {

// Knobs of the matching policy. Eligible workunits are always scanned in
// FIFO submit order; the first requester that proves possession wins a
// workunit.
struct SchedulerPolicy {
    double wait_window_secs = 120; // how long to wait for a data holder
    bool poll_via_rpc = true;      // emit inventory queries while waiting
    double no_work_backoff_secs = 5;
    // Tie-break toward clients that already hold the environment files.
    bool prefer_cached_env = false;
};

// An outstanding get-input run on one client. Exactly one per workunit;
// expires like a regular deadline and re-arms the wait window.
struct GetInputGrant {
    std::string client_id;
    std::string grant_id;
    Timestamp deadline_at = 0;
};

// The whole scheduling universe as one value. Every mutation goes through
// the operations below; copies are cheap enough at desk scale and give
// snapshot semantics for tests and status reports.
struct SchedulerState {
    SchedulerPolicy policy;
    Timestamp now = 0;

    std::map<std::string, ApplicationSpec> apps;
    std::map<std::string, EnvironmentBundle> envs;
    std::map<std::string, Patch> patches;
    std::map<std::string, Workunit> workunits;
    std::map<std::string, ResultRecord> results;
    std::map<std::string, ClientRecord> clients;
    std::map<std::string, std::vector<std::string>> jobs; // job_id -> wu ids

    std::map<std::string, Timestamp> wait_timers;          // wu_id -> expiry
    std::map<std::string, std::string> reservations;       // wu_id -> client_id
    std::map<std::string, GetInputGrant> get_input_grants; // wu_id -> grant

    // Authoritative digest per file name, learned from produced outputs and
    // get-input reports. Names a client advertises never enter the catalog;
    // a name without a catalog entry matches any digest (externally seeded
    // inputs are identified by name alone).
    std::map<std::string, FileId> file_catalog;

    CreditLedger credit;

    std::uint64_t next_submit_seq = 1;
    std::uint64_t next_result_seq = 1;
    std::uint64_t next_grant_seq = 1;
    std::uint64_t next_client_seq = 1;
    std::uint64_t next_wu_seq = 1;
    std::uint64_t next_job_seq = 1;
    std::uint64_t next_env_seq = 1;
    std::uint64_t next_patch_seq = 1;

    // Optional audit sink; not part of the value.
    std::vector<Transition>* transition_log = nullptr;
};

// Moves the abstract clock forward (never backward).
void advance_clock(SchedulerState& state, Timestamp t);

// --- membership --------------------------------------------------------------

// Upserts the client; allocates an id when the record carries none.
// Returns the effective client id.
std::string register_client(SchedulerState& state, ClientRecord record);
void remove_client(SchedulerState& state, const std::string& client_id);

// Extends (or shrinks) a client inventory outside of a work request; used
// by the simulator's replication/eviction models and by tests.
void add_client_files(SchedulerState& state, const std::string& client_id,
                      const std::vector<FileId>& files);
void remove_client_files(SchedulerState& state, const std::string& client_id,
                         const std::vector<std::string>& names);

// --- catalog -----------------------------------------------------------------

// Registers produced content as the authoritative FileId for its name.
void catalog_file(SchedulerState& state, const FileId& file);

// --- submission --------------------------------------------------------------

void add_application(SchedulerState& state, ApplicationSpec app);
void add_environment(SchedulerState& state, EnvironmentBundle env);
void add_patch(SchedulerState& state, Patch patch);

// Validates the union of existing and new workunits (references + DAG),
// assigns submit_seq in list order, stores them as PENDING and promotes
// whatever is already runnable. Returns the stored ids.
std::vector<std::string> submit_workunits(SchedulerState& state, std::vector<Workunit> wus);

// --- the scheduling decision ---------------------------------------------------

// One work request, three possible outcomes:
//   1. some eligible workunit's inputs are all in the request inventory ->
//      ASSIGNMENT (inputs are never part of the download manifest);
//   2. a data-blocked workunit's wait window has expired and it carries a
//      get-input application -> GET_INPUT_ASSIGNMENT;
//   3. otherwise NO_WORK, arming wait timers for data-blocked workunits.
// Also absorbs the client's declared inventory (full replacement) and
// completes any outstanding get-input grant for this client from the
// inventory delta.
// Throws Error(UnknownClient) / Error(StaleProtocol).
WorkReply handle_work_request(SchedulerState& state, const WorkRequest& request);

// RPC poll results. The first answer covering all required inputs of a
// timer-active workunit reserves it for the answering client.
void handle_inventory_answers(SchedulerState& state,
                              const std::vector<InventoryAnswer>& answers);

// Wait windows that elapsed: workunits with a get-input application become
// eligible for get-input dispatch, the rest fail.
void expire_waits(SchedulerState& state, Timestamp now);

// Completion report of a get-input run. Extends the client inventory; when
// the required inputs are now covered the workunit is reserved for this
// client, otherwise the wait window restarts.
// Throws Error(UnknownAssignment).
void handle_get_input_done(SchedulerState& state, const std::string& client_id,
                           const std::string& wu_id, const std::vector<FileId>& new_files);

// Scores an upload: SUCCESS (outputs join the executing client's inventory
// and the catalog), OVERSIZE (any output beyond the limit) or ERROR.
// Failed attempts consume a retry and requeue the workunit.
// Throws Error(UnknownResult) / Error(ResultNotInProgress).
UploadReply handle_result(SchedulerState& state, const ResultUpload& upload);

// Results past their deadline become TIMEOUT. The silent client's recorded
// inventory is dropped until it reappears; the workunit requeues as READY
// when another holder is known, else WAITING_FOR_DATA.
void expire_deadlines(SchedulerState& state, Timestamp now);

bool dependencies_satisfied(const SchedulerState& state, const Workunit& wu);

// credit += cpu_seconds * benchmark_gflops, to the client's user and group.
void grant_credit(CreditLedger& ledger, const ClientRecord& client, double cpu_seconds);

// Queries the server would broadcast right now (one per timer-active
// workunit, FIFO order).
std::vector<InventoryQuery> pending_inventory_queries(const SchedulerState& state);

// True when every required input name is present in the client's inventory
// with a digest matching the catalog (names unknown to the catalog match by
// name alone).
bool client_covers(const SchedulerState& state, const ClientRecord& client,
                   const Workunit& wu);

bool hardware_feasible(const ClientRecord& client, const ApplicationSpec& app);

} // namespace locflow
