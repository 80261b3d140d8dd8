#include "locflow/scheduler.hpp"

#include <algorithm>
#include <cassert>
#include <set>

namespace locflow {

namespace {

void log_transition(SchedulerState& state, Transition::Kind kind, const std::string& id,
                    const std::string& from, const std::string& to) {
    if (state.transition_log)
        state.transition_log->push_back(Transition{kind, id, from, to, state.now});
}

void move_wu(SchedulerState& state, Workunit& wu, WuState to) {
    assert(wu_transition_allowed(wu.state, to));
    log_transition(state, Transition::Kind::WORKUNIT, wu.wu_id, wu_state_name(wu.state),
                   wu_state_name(to));
    wu.state = to;
}

void move_result(SchedulerState& state, ResultRecord& r, ResultState to) {
    assert(result_transition_allowed(r.state, to));
    log_transition(state, Transition::Kind::RESULT, r.result_id, result_state_name(r.state),
                   result_state_name(to));
    r.state = to;
}

bool wait_expired(const SchedulerState& state, const std::string& wu_id) {
    auto it = state.wait_timers.find(wu_id);
    return it != state.wait_timers.end() && state.now > it->second;
}

void arm_wait_timer(SchedulerState& state, const Workunit& wu) {
    if (wu.state != WuState::WAITING_FOR_DATA) return;
    if (state.get_input_grants.count(wu.wu_id) || wu.get_input_ready) return;
    state.wait_timers.emplace(wu.wu_id, state.now + state.policy.wait_window_secs);
}

bool anybody_covers(const SchedulerState& state, const Workunit& wu) {
    if (wu.required_inputs.empty()) return true;
    for (const auto& [id, client] : state.clients) {
        if (client_covers(state, client, wu)) return true;
    }
    return false;
}

// Ids sorted by submission order; the scan order of every FIFO rule.
std::vector<const Workunit*> fifo_workunits(const SchedulerState& state) {
    std::vector<const Workunit*> out;
    out.reserve(state.workunits.size());
    for (const auto& [id, wu] : state.workunits) out.push_back(&wu);
    std::sort(out.begin(), out.end(), [](const Workunit* a, const Workunit* b) {
        return a->submit_seq < b->submit_seq;
    });
    return out;
}

// PENDING workunit whose predecessors just completed: schedulable when a
// holder is known (or it needs no inputs), otherwise it waits for data.
void promote(SchedulerState& state, Workunit& wu) {
    if (wu.state != WuState::PENDING || !dependencies_satisfied(state, wu)) return;
    if (anybody_covers(state, wu)) {
        move_wu(state, wu, WuState::READY);
    } else {
        move_wu(state, wu, WuState::WAITING_FOR_DATA);
        arm_wait_timer(state, wu);
    }
}

void promote_dependents(SchedulerState& state) {
    for (auto& [id, wu] : state.workunits) promote(state, wu);
}

// Coverage was lost somewhere: ready workunits whose last believed holder
// vanished wait for data again (and start a fresh window).
void reevaluate_ready(SchedulerState& state) {
    for (auto& [id, wu] : state.workunits) {
        if (wu.state != WuState::READY) continue;
        if (state.reservations.count(id)) continue;
        if (anybody_covers(state, wu)) continue;
        move_wu(state, wu, WuState::WAITING_FOR_DATA);
        arm_wait_timer(state, wu);
    }
}

// Data arrived somewhere: waiting workunits with a known holder become
// schedulable again.
void reevaluate_waiting(SchedulerState& state) {
    for (auto& [id, wu] : state.workunits) {
        if (wu.state != WuState::WAITING_FOR_DATA) continue;
        if (state.get_input_grants.count(id)) continue;
        if (anybody_covers(state, wu)) {
            move_wu(state, wu, WuState::READY);
            state.wait_timers.erase(id);
            wu.get_input_ready = false;
        }
    }
}

std::vector<ManifestEntry> build_manifest(const SchedulerState& state, const Workunit& wu) {
    std::vector<ManifestEntry> manifest;
    const ApplicationSpec& app = state.apps.at(wu.app_id);
    // Entry executable first; workers launch the first APP entry.
    for (const auto& f : app.files)
        if (f.entry) manifest.push_back(ManifestEntry{f.file, FilePurpose::APP, f.signature});
    for (const auto& f : app.files)
        if (!f.entry) manifest.push_back(ManifestEntry{f.file, FilePurpose::APP, f.signature});
    const EnvironmentBundle& env = state.envs.at(wu.env_id);
    for (const auto& f : env.files)
        manifest.push_back(ManifestEntry{f, FilePurpose::ENV, {}});
    if (!wu.patch_id.empty()) {
        const Patch& patch = state.patches.at(wu.patch_id);
        for (const auto& f : patch.overlay_files)
            manifest.push_back(ManifestEntry{f, FilePurpose::PATCH, {}});
    }
    return manifest;
}

std::vector<ManifestEntry> build_get_input_manifest(const SchedulerState& state,
                                                    const Workunit& wu) {
    std::vector<ManifestEntry> manifest;
    const ApplicationSpec& app = state.apps.at(wu.get_input_app);
    for (const auto& f : app.files)
        if (f.entry) manifest.push_back(ManifestEntry{f.file, FilePurpose::APP, f.signature});
    for (const auto& f : app.files)
        if (!f.entry) manifest.push_back(ManifestEntry{f.file, FilePurpose::APP, f.signature});
    return manifest;
}

// Environment (and patch) files already sitting in the inventory; only the
// prefer_cached_env tie-break looks at this.
bool env_cached(const SchedulerState& state, const ClientRecord& client, const Workunit& wu) {
    auto has = [&](const FileId& f) {
        auto it = client.inventory.find(f.name);
        return it != client.inventory.end() && it->second.digest == f.digest;
    };
    const EnvironmentBundle& env = state.envs.at(wu.env_id);
    for (const auto& f : env.files)
        if (!has(f)) return false;
    if (!wu.patch_id.empty()) {
        for (const auto& f : state.patches.at(wu.patch_id).overlay_files)
            if (!has(f)) return false;
    }
    return true;
}

WorkReply make_assignment(SchedulerState& state, Workunit& wu, const ClientRecord& client) {
    ResultRecord result;
    result.result_id = "r" + std::to_string(state.next_result_seq++);
    result.wu_id = wu.wu_id;
    result.client_id = client.client_id;
    result.state = ResultState::UNSENT;
    result.assigned_at = state.now;
    result.deadline_at = state.now + wu.deadline_secs;
    move_result(state, result, ResultState::IN_PROGRESS);

    if (wu.state == WuState::WAITING_FOR_DATA) move_wu(state, wu, WuState::READY);
    move_wu(state, wu, WuState::ASSIGNED);
    state.wait_timers.erase(wu.wu_id);
    state.reservations.erase(wu.wu_id);
    state.get_input_grants.erase(wu.wu_id); // a direct holder beats a pending fetch
    wu.get_input_ready = false;

    WorkReply reply;
    reply.kind = WorkReplyKind::ASSIGNMENT;
    reply.result_id = result.result_id;
    reply.wu_id = wu.wu_id;
    reply.deadline_at = result.deadline_at;
    reply.manifest = build_manifest(state, wu);
    reply.input_names = wu.required_inputs;
    reply.output_template = wu.output_template.pattern;
    state.results.emplace(result.result_id, std::move(result));
    return reply;
}

// Applies a completed (or abandoned) get-input run; `new_files` may be
// empty when the run produced nothing new.
void apply_get_input_done(SchedulerState& state, const std::string& client_id,
                          const std::string& wu_id, const std::vector<FileId>& new_files) {
    auto wu_it = state.workunits.find(wu_id);
    if (wu_it == state.workunits.end()) return;
    Workunit& wu = wu_it->second;
    state.get_input_grants.erase(wu_id);

    auto client_it = state.clients.find(client_id);
    if (client_it != state.clients.end() && !new_files.empty()) {
        ClientRecord& client = client_it->second;
        for (const auto& f : new_files) {
            client.inventory[f.name] = f;
            // First producer fixes the digest; a mismatching fetch must not
            // rewrite history.
            state.file_catalog.emplace(f.name, f);
        }
    }

    if (wu.state == WuState::WAITING_FOR_DATA) {
        if (client_it != state.clients.end() &&
            client_covers(state, client_it->second, wu)) {
            state.reservations[wu_id] = client_id;
            move_wu(state, wu, WuState::READY);
            state.wait_timers.erase(wu_id);
            wu.get_input_ready = false;
        } else {
            // Wrong or missing files: wait again for a real holder.
            state.wait_timers.erase(wu_id);
            arm_wait_timer(state, wu);
        }
    }
    reevaluate_waiting(state);
}

} // namespace

void advance_clock(SchedulerState& state, Timestamp t) {
    if (t > state.now) state.now = t;
}

// ---------------------------------------------------------------------------

std::string register_client(SchedulerState& state, ClientRecord record) {
    if (record.client_id.empty())
        record.client_id = "c" + std::to_string(state.next_client_seq++);
    validate_client(record);
    record.last_contact = state.now;
    state.clients[record.client_id] = record;
    reevaluate_waiting(state);
    return record.client_id;
}

void remove_client(SchedulerState& state, const std::string& client_id) {
    state.clients.erase(client_id);
    reevaluate_ready(state);
    for (auto it = state.reservations.begin(); it != state.reservations.end();) {
        if (it->second == client_id) it = state.reservations.erase(it);
        else ++it;
    }
    for (auto it = state.get_input_grants.begin(); it != state.get_input_grants.end();) {
        if (it->second.client_id == client_id) {
            auto wu_it = state.workunits.find(it->first);
            it = state.get_input_grants.erase(it);
            if (wu_it != state.workunits.end()) arm_wait_timer(state, wu_it->second);
        } else {
            ++it;
        }
    }
}

void add_client_files(SchedulerState& state, const std::string& client_id,
                      const std::vector<FileId>& files) {
    auto it = state.clients.find(client_id);
    if (it == state.clients.end()) throw Error(ErrorCode::UnknownClient, client_id);
    for (const auto& f : files) {
        validate_file_id(f);
        it->second.inventory[f.name] = f;
    }
    reevaluate_waiting(state);
}

void remove_client_files(SchedulerState& state, const std::string& client_id,
                         const std::vector<std::string>& names) {
    auto it = state.clients.find(client_id);
    if (it == state.clients.end()) throw Error(ErrorCode::UnknownClient, client_id);
    for (const auto& n : names) it->second.inventory.erase(n);
    reevaluate_ready(state);
}

void catalog_file(SchedulerState& state, const FileId& file) {
    validate_file_id(file);
    state.file_catalog[file.name] = file;
}

// ---------------------------------------------------------------------------

void add_application(SchedulerState& state, ApplicationSpec app) {
    if (app.app_id.empty()) throw Error(ErrorCode::InvalidName, "empty app_id");
    state.apps[app.app_id] = std::move(app);
}

void add_environment(SchedulerState& state, EnvironmentBundle env) {
    validate_environment(env);
    if (!state.apps.count(env.app_id))
        throw Error(ErrorCode::UnknownApplication, env.app_id);
    state.envs[env.env_id] = std::move(env);
}

void add_patch(SchedulerState& state, Patch patch) {
    validate_patch(patch);
    if (!state.envs.count(patch.env_id))
        throw Error(ErrorCode::UnknownEnvironment, patch.env_id);
    state.patches[patch.patch_id] = std::move(patch);
}

std::vector<std::string> submit_workunits(SchedulerState& state, std::vector<Workunit> wus) {
    for (auto& wu : wus) {
        if (wu.wu_id.empty()) throw Error(ErrorCode::InvalidName, "empty wu_id");
        if (!state.apps.count(wu.app_id))
            throw Error(ErrorCode::UnknownApplication, wu.app_id + " (workunit " + wu.wu_id + ")");
        if (!state.envs.count(wu.env_id))
            throw Error(ErrorCode::UnknownEnvironment, wu.env_id);
        if (!wu.patch_id.empty() && !state.patches.count(wu.patch_id))
            throw Error(ErrorCode::NotFound, "patch " + wu.patch_id);
        if (!wu.get_input_app.empty() && !state.apps.count(wu.get_input_app))
            throw Error(ErrorCode::UnknownApplication, wu.get_input_app + " (get-input)");
        for (const auto& name : wu.required_inputs) {
            if (!valid_file_name(name))
                throw Error(ErrorCode::InvalidName, "required input '" + name + "'");
        }
        resolve_template(wu.output_template, 0); // must yield a valid name
        if (wu.max_result_size_bytes == 0)
            throw Error(ErrorCode::BadConfig, "max_result_size_bytes must be positive");
        if (!(wu.deadline_secs > 0))
            throw Error(ErrorCode::BadConfig, "deadline_secs must be positive");
        if (state.workunits.count(wu.wu_id))
            throw Error(ErrorCode::InvalidName, "duplicate wu_id " + wu.wu_id);
        wu.state = WuState::PENDING;
        wu.retries_left = wu.max_retries;
        wu.get_input_ready = false;
    }

    // The DAG check runs on the union with everything already submitted.
    std::vector<Workunit> all;
    all.reserve(state.workunits.size() + wus.size());
    for (const auto& [id, wu] : state.workunits) all.push_back(wu);
    for (const auto& wu : wus) all.push_back(wu);
    validate_workunit_set(all);

    std::vector<std::string> ids;
    for (auto& wu : wus) {
        wu.submit_seq = state.next_submit_seq++;
        ids.push_back(wu.wu_id);
        state.workunits.emplace(wu.wu_id, std::move(wu));
    }
    for (const auto& id : ids) promote(state, state.workunits.at(id));
    return ids;
}

// ---------------------------------------------------------------------------

bool client_covers(const SchedulerState& state, const ClientRecord& client,
                   const Workunit& wu) {
    for (const auto& name : wu.required_inputs) {
        auto it = client.inventory.find(name);
        if (it == client.inventory.end()) return false;
        auto cat = state.file_catalog.find(name);
        if (cat != state.file_catalog.end() && cat->second.digest != it->second.digest)
            return false;
    }
    return true;
}

bool hardware_feasible(const ClientRecord& client, const ApplicationSpec& app) {
    return client.memory_mb >= app.min_memory_mb && client.disk_mb >= app.min_disk_mb;
}

bool dependencies_satisfied(const SchedulerState& state, const Workunit& wu) {
    for (const auto& pred : wu.predecessors) {
        auto it = state.workunits.find(pred);
        if (it == state.workunits.end() || it->second.state != WuState::DONE) return false;
    }
    return true;
}

WorkReply handle_work_request(SchedulerState& state, const WorkRequest& request) {
    auto client_it = state.clients.find(request.client_id);
    if (client_it == state.clients.end())
        throw Error(ErrorCode::UnknownClient, request.client_id);
    if (request.protocol_version != kProtocolVersion)
        throw Error(ErrorCode::StaleProtocol,
                    "protocol version " + std::to_string(request.protocol_version));

    ClientRecord& client = client_it->second;
    std::map<std::string, FileId> old_inventory = std::move(client.inventory);

    client.cpu_count = request.cpu_count;
    client.benchmark_gflops = request.benchmark_gflops;
    client.memory_mb = request.memory_mb;
    client.disk_mb = request.disk_mb;
    client.last_contact = state.now;
    client.inventory.clear();
    for (const auto& f : request.inventory) client.inventory.emplace(f.name, f);

    // An outstanding get-input run is reported implicitly: the first request
    // after the run carries whatever it produced.
    std::vector<std::string> finished_grants;
    for (const auto& [wu_id, grant] : state.get_input_grants) {
        if (grant.client_id == request.client_id) finished_grants.push_back(wu_id);
    }
    for (const auto& wu_id : finished_grants) {
        std::vector<FileId> new_files;
        for (const auto& [name, fid] : client.inventory) {
            auto old = old_inventory.find(name);
            if (old == old_inventory.end() || old->second.digest != fid.digest)
                new_files.push_back(fid);
        }
        apply_get_input_done(state, request.client_id, wu_id, new_files);
    }

    reevaluate_waiting(state);
    reevaluate_ready(state);

    // Branch 1: a workunit whose inputs all sit on the requester already.
    const Workunit* fallback = nullptr;
    const Workunit* cached = nullptr;
    for (const Workunit* wu : fifo_workunits(state)) {
        if (wu->state != WuState::READY && wu->state != WuState::WAITING_FOR_DATA) continue;
        auto res = state.reservations.find(wu->wu_id);
        if (res != state.reservations.end() && res->second != request.client_id) continue;
        auto app_it = state.apps.find(wu->app_id);
        if (app_it == state.apps.end()) continue;
        if (!hardware_feasible(client, app_it->second)) continue;
        if (!client_covers(state, client, *wu)) continue;
        if (!fallback) fallback = wu;
        if (!state.policy.prefer_cached_env) break;
        if (!cached && env_cached(state, client, *wu)) {
            cached = wu;
            break;
        }
    }
    if (const Workunit* pick = cached ? cached : fallback) {
        return make_assignment(state, state.workunits.at(pick->wu_id), client);
    }

    // Branch 3: a wait window ran out and the workunit knows how to fetch
    // its own input.
    for (const Workunit* wu : fifo_workunits(state)) {
        if (wu->state != WuState::WAITING_FOR_DATA) continue;
        if (wu->get_input_app.empty()) continue;
        if (state.get_input_grants.count(wu->wu_id)) continue;
        if (state.reservations.count(wu->wu_id)) continue;
        if (!wu->get_input_ready && !wait_expired(state, wu->wu_id)) continue;
        auto app_it = state.apps.find(wu->get_input_app);
        if (app_it == state.apps.end()) continue;
        if (!hardware_feasible(client, app_it->second)) continue;

        Workunit& target = state.workunits.at(wu->wu_id);
        GetInputGrant grant;
        grant.client_id = request.client_id;
        grant.grant_id = "g" + std::to_string(state.next_grant_seq++);
        grant.deadline_at = state.now + target.deadline_secs;
        target.get_input_ready = false;
        state.wait_timers.erase(target.wu_id);

        WorkReply reply;
        reply.kind = WorkReplyKind::GET_INPUT_ASSIGNMENT;
        reply.result_id = grant.grant_id;
        reply.wu_id = target.wu_id;
        reply.deadline_at = grant.deadline_at;
        reply.manifest = build_get_input_manifest(state, target);
        state.get_input_grants.emplace(target.wu_id, std::move(grant));
        return reply;
    }

    // Branch 2: nothing for this client; data-blocked workunits start their
    // wait window now if they have not already.
    for (auto& [id, wu] : state.workunits) {
        if (wu.state != WuState::WAITING_FOR_DATA) continue;
        if (state.wait_timers.count(id)) continue;
        arm_wait_timer(state, wu);
    }
    WorkReply reply;
    reply.kind = WorkReplyKind::NO_WORK;
    reply.backoff_secs = state.policy.no_work_backoff_secs;
    return reply;
}

void handle_inventory_answers(SchedulerState& state,
                              const std::vector<InventoryAnswer>& answers) {
    for (const auto& answer : answers) {
        if (!state.clients.count(answer.client_id)) continue; // irrelevant answer
        std::set<std::string> held(answer.names.begin(), answer.names.end());
        for (const Workunit* scan : fifo_workunits(state)) {
            if (scan->state != WuState::WAITING_FOR_DATA) continue;
            if (!state.wait_timers.count(scan->wu_id)) continue;
            if (state.reservations.count(scan->wu_id)) continue;
            bool all = true;
            for (const auto& name : scan->required_inputs) {
                if (!held.count(name)) {
                    all = false;
                    break;
                }
            }
            if (!all) continue;
            Workunit& wu = state.workunits.at(scan->wu_id);
            state.reservations[wu.wu_id] = answer.client_id;
            state.wait_timers.erase(wu.wu_id);
            wu.get_input_ready = false;
            move_wu(state, wu, WuState::READY);
        }
    }
}

void expire_waits(SchedulerState& state, Timestamp now) {
    advance_clock(state, now);
    std::vector<std::string> expired;
    for (const auto& [wu_id, expiry] : state.wait_timers) {
        if (state.now > expiry) expired.push_back(wu_id);
    }
    for (const auto& wu_id : expired) {
        auto it = state.workunits.find(wu_id);
        if (it == state.workunits.end()) {
            state.wait_timers.erase(wu_id);
            continue;
        }
        Workunit& wu = it->second;
        state.wait_timers.erase(wu_id);
        if (wu.state != WuState::WAITING_FOR_DATA) continue;
        if (!wu.get_input_app.empty()) {
            wu.get_input_ready = true; // next feasible requester fetches
        } else {
            move_wu(state, wu, WuState::FAILED);
        }
    }
}

void handle_get_input_done(SchedulerState& state, const std::string& client_id,
                           const std::string& wu_id, const std::vector<FileId>& new_files) {
    auto grant_it = state.get_input_grants.find(wu_id);
    if (grant_it == state.get_input_grants.end() || grant_it->second.client_id != client_id)
        throw Error(ErrorCode::UnknownAssignment,
                    "no outstanding get-input for " + wu_id + " on " + client_id);
    apply_get_input_done(state, client_id, wu_id, new_files);
}

UploadReply handle_result(SchedulerState& state, const ResultUpload& upload) {
    auto it = state.results.find(upload.result_id);
    if (it == state.results.end()) throw Error(ErrorCode::UnknownResult, upload.result_id);
    ResultRecord& result = it->second;
    if (result.state != ResultState::IN_PROGRESS)
        throw Error(ErrorCode::ResultNotInProgress,
                    upload.result_id + " is " + result_state_name(result.state));
    Workunit& wu = state.workunits.at(result.wu_id);

    result.cpu_seconds = upload.cpu_seconds;

    bool oversize = false;
    for (const auto& o : upload.outputs) {
        if (o.file.size_bytes > wu.max_result_size_bytes) oversize = true;
    }

    if (upload.status == UploadStatus::SUCCESS && !oversize) {
        move_result(state, result, ResultState::SUCCESS);
        for (const auto& o : upload.outputs) result.output_files.push_back(o.file);
        auto client_it = state.clients.find(result.client_id);
        if (client_it != state.clients.end()) {
            // Outputs stay where they were produced; downstream stages match
            // against this inventory.
            for (const auto& o : upload.outputs)
                client_it->second.inventory[o.file.name] = o.file;
            grant_credit(state.credit, client_it->second, upload.cpu_seconds);
        }
        for (const auto& o : upload.outputs) state.file_catalog[o.file.name] = o.file;
        move_wu(state, wu, WuState::DONE);
        promote_dependents(state);
        reevaluate_waiting(state);
    } else {
        move_result(state, result,
                    oversize && upload.status == UploadStatus::SUCCESS ? ResultState::OVERSIZE
                                                                       : ResultState::ERROR);
        if (wu.retries_left == 0) {
            move_wu(state, wu, WuState::FAILED);
        } else {
            --wu.retries_left;
            move_wu(state, wu, WuState::READY);
        }
    }
    return UploadReply{result_state_name(result.state)};
}

void expire_deadlines(SchedulerState& state, Timestamp now) {
    advance_clock(state, now);

    // Expired get-input grants re-open the wait window.
    std::vector<std::string> dead_grants;
    for (const auto& [wu_id, grant] : state.get_input_grants) {
        if (state.now > grant.deadline_at) dead_grants.push_back(wu_id);
    }
    for (const auto& wu_id : dead_grants) {
        state.get_input_grants.erase(wu_id);
        auto it = state.workunits.find(wu_id);
        if (it != state.workunits.end()) arm_wait_timer(state, it->second);
    }

    std::vector<std::string> overdue;
    for (const auto& [id, result] : state.results) {
        if (result.state == ResultState::IN_PROGRESS && state.now > result.deadline_at)
            overdue.push_back(id);
    }
    for (const auto& id : overdue) {
        ResultRecord& result = state.results.at(id);
        move_result(state, result, ResultState::TIMEOUT);
        Workunit& wu = state.workunits.at(result.wu_id);

        // The client went silent past its deadline; forget what it claimed
        // to hold until it reappears (the next request re-declares the full
        // inventory anyway).
        auto client_it = state.clients.find(result.client_id);
        if (client_it != state.clients.end()) client_it->second.inventory.clear();
        for (auto res = state.reservations.begin(); res != state.reservations.end();) {
            if (res->second == result.client_id) res = state.reservations.erase(res);
            else ++res;
        }

        if (wu.retries_left == 0) {
            move_wu(state, wu, WuState::FAILED);
            continue;
        }
        --wu.retries_left;
        if (anybody_covers(state, wu)) {
            move_wu(state, wu, WuState::READY);
        } else {
            move_wu(state, wu, WuState::WAITING_FOR_DATA);
            arm_wait_timer(state, wu);
        }
    }
    // The cleared inventories may have been the believed holders of other
    // ready workunits.
    if (!overdue.empty()) reevaluate_ready(state);
}

void grant_credit(CreditLedger& ledger, const ClientRecord& client, double cpu_seconds) {
    if (cpu_seconds < 0) throw Error(ErrorCode::BadConfig, "negative cpu_seconds");
    ledger.grant(client.user_id, client.group_id, cpu_seconds * client.benchmark_gflops);
}

std::vector<InventoryQuery> pending_inventory_queries(const SchedulerState& state) {
    std::vector<InventoryQuery> queries;
    for (const Workunit* wu : fifo_workunits(state)) {
        if (wu->state != WuState::WAITING_FOR_DATA) continue;
        if (!state.wait_timers.count(wu->wu_id)) continue;
        queries.push_back(InventoryQuery{wu->required_inputs});
    }
    return queries;
}

} // namespace locflow
