#include "locflow/server.hpp"

#include <algorithm>
#include <chrono>
#include <set>

#include "locflow/archive.hpp"

namespace locflow {

namespace {

ErrorReply error_reply(const Error& e) {
    return ErrorReply{error_code_name(e.code()), e.message()};
}

bool is_error(const Message& m) { return std::holds_alternative<ErrorReply>(m); }

} // namespace

SubmitJobReply expand_and_submit_job(SchedulerState& state, const SubmitJobRequest& request) {
    if (request.stages.empty()) throw Error(ErrorCode::BadConfig, "job has no stages");

    std::string job_id = "job" + std::to_string(state.next_job_seq++);
    std::vector<Workunit> wus;
    std::map<std::string, std::vector<std::string>> stage_wus; // stage name -> ids
    std::map<std::string, std::uint32_t> stage_counts;
    std::set<std::string> seen_names;

    for (const auto& stage : request.stages) {
        if (stage.name.empty()) throw Error(ErrorCode::BadConfig, "stage without a name");
        if (!seen_names.insert(stage.name).second)
            throw Error(ErrorCode::BadConfig, "duplicate stage name " + stage.name);
        if (stage.count < 1) throw Error(ErrorCode::BadConfig, "stage count must be >= 1");
        if (!state.apps.count(stage.app_id))
            throw Error(ErrorCode::UnknownApplication, stage.app_id);

        EnvironmentBundle env;
        env.env_id = "env" + std::to_string(state.next_env_seq++);
        env.app_id = stage.app_id;
        env.files = stage.env_files;
        add_environment(state, env);

        std::string patch_id;
        if (!stage.patch_files.empty()) {
            Patch patch;
            patch.patch_id = "p" + std::to_string(state.next_patch_seq++);
            patch.env_id = env.env_id;
            patch.overlay_files = stage.patch_files;
            add_patch(state, patch);
            patch_id = patch.patch_id;
        }

        std::vector<std::string> ids;
        for (std::uint32_t i = 0; i < stage.count; ++i) {
            Workunit wu;
            wu.wu_id = "wu" + std::to_string(state.next_wu_seq++);
            wu.app_id = stage.app_id;
            wu.env_id = env.env_id;
            wu.patch_id = patch_id;
            for (const auto& pattern : stage.input_patterns)
                wu.required_inputs.push_back(resolve_template(FileTemplate{pattern}, i));
            if (stage.count > 1)
                wu.output_template =
                    FileTemplate{resolve_template(FileTemplate{stage.output_pattern}, i)};
            else
                wu.output_template = FileTemplate{stage.output_pattern};
            wu.get_input_app = stage.get_input_app;
            for (const auto& pred : stage.predecessors) {
                if (pred == stage.name) {
                    // Self-reference expands to a self-cycle and fails the
                    // DAG validation below with the precise diagnosis.
                    wu.predecessors.push_back(wu.wu_id);
                    continue;
                }
                auto sit = stage_wus.find(pred);
                if (sit != stage_wus.end()) {
                    if (stage_counts.at(pred) == stage.count) {
                        wu.predecessors.push_back(sit->second.at(i));
                    } else {
                        for (const auto& id : sit->second) wu.predecessors.push_back(id);
                    }
                } else if (state.workunits.count(pred)) {
                    wu.predecessors.push_back(pred);
                } else {
                    throw Error(ErrorCode::UnknownWorkunit,
                                "predecessor '" + pred + "' of stage " + stage.name);
                }
            }
            wu.max_result_size_bytes = stage.max_result_size_bytes;
            wu.deadline_secs = stage.deadline_secs;
            wu.max_retries = stage.max_retries;
            wus.push_back(std::move(wu));
            ids.push_back(wus.back().wu_id);
        }
        stage_wus[stage.name] = ids;
        stage_counts[stage.name] = stage.count;
    }

    SubmitJobReply reply;
    reply.job_id = job_id;
    reply.wu_ids = submit_workunits(state, std::move(wus));
    state.jobs[job_id] = reply.wu_ids;
    return reply;
}

// ---------------------------------------------------------------------------

Server::Server(ServerConfig config)
    : config_(std::move(config)),
      keys_(KeyPair::load(config_.keypair_path.string())),
      blobs_(config_.data_dir / "blobs"),
      journal_(config_.data_dir / "journal.log") {
    state_.policy = config_.policy;
    for (const auto& event : journal_.recover()) apply_event(state_, event);
}

Server::~Server() { stop(); }

Timestamp Server::wall_now() const {
    using namespace std::chrono;
    double t = duration_cast<duration<double>>(system_clock::now().time_since_epoch()).count();
    return t;
}

void Server::start() {
    listener_ = TcpListener::bind(config_.listen_host, config_.listen_port);
    stopping_ = false;
    started_ = true;
    tick_thread_ = std::thread([this] { tick_loop(); });
}

std::string Server::address() const {
    return config_.listen_host + ":" + std::to_string(listener_.port());
}

void Server::serve_forever() {
    while (!stopping_) {
        TcpConn conn = listener_.accept();
        if (!conn.valid()) break;
        std::lock_guard<std::mutex> lock(conn_mutex_);
        conn_threads_.emplace_back(
            [this](TcpConn c) { connection_loop(std::move(c)); }, std::move(conn));
    }
}

void Server::stop() {
    if (!started_) return;
    stopping_ = true;
    listener_.close();
    if (tick_thread_.joinable()) tick_thread_.join();
    std::vector<std::thread> threads;
    {
        std::lock_guard<std::mutex> lock(conn_mutex_);
        threads.swap(conn_threads_);
    }
    for (auto& t : threads)
        if (t.joinable()) t.join();
    started_ = false;
}

void Server::tick_loop() {
    using namespace std::chrono;
    double remaining = config_.tick_secs;
    while (!stopping_) {
        // Sleep in short slices so stop() never waits out a full interval.
        std::this_thread::sleep_for(duration<double>(std::min(remaining, 0.05)));
        remaining -= 0.05;
        if (remaining > 0) continue;
        remaining = config_.tick_secs;
        if (stopping_) break;
        handle(TickWaits{});
        handle(TickDeadlines{});
    }
}

void Server::connection_loop(TcpConn conn) {
    try {
        while (!stopping_) {
            auto body = conn.recv_body();
            if (!body) break; // client done
            DecodeResult decoded = decode_message(*body);
            if (std::holds_alternative<WireError>(decoded)) {
                const auto& err = std::get<WireError>(decoded);
                conn.send(ErrorReply{error_code_name(err.code),
                                     err.detail + " (byte " + std::to_string(err.position) +
                                         ")"});
                break; // a malformed frame poisons the stream
            }
            conn.send(handle(std::get<Message>(decoded)));
        }
    } catch (const Error&) {
        // Transport failure: nothing to answer on.
    }
    conn.close();
}

// ---------------------------------------------------------------------------

SchedulerState Server::snapshot() const {
    std::lock_guard<std::mutex> lock(mutex_);
    SchedulerState copy = state_;
    copy.transition_log = nullptr;
    return copy;
}

Message Server::apply_event(SchedulerState& state, const TimedMessage& event) {
    advance_clock(state, event.t);
    try {
        if (const auto* reg = std::get_if<RegisterRequest>(&event.msg)) {
            if (reg->protocol_version != kProtocolVersion)
                throw Error(ErrorCode::StaleProtocol,
                            "protocol version " + std::to_string(reg->protocol_version));
            ClientRecord record = reg->client;
            record.last_contact = state.now;
            return RegisterReply{register_client(state, std::move(record))};
        }
        if (const auto* req = std::get_if<WorkRequest>(&event.msg)) {
            return handle_work_request(state, *req);
        }
        if (const auto* batch = std::get_if<InventoryAnswerBatch>(&event.msg)) {
            handle_inventory_answers(state, batch->answers);
            return Ack{};
        }
        if (const auto* upload = std::get_if<ResultUpload>(&event.msg)) {
            return handle_result(state, *upload);
        }
        if (const auto* submit = std::get_if<SubmitAppRequest>(&event.msg)) {
            auto existing = state.apps.find(submit->spec.app_id);
            if (existing != state.apps.end() &&
                existing->second.version == submit->spec.version &&
                !(existing->second == submit->spec)) {
                throw Error(ErrorCode::BadConfig,
                            "application " + submit->spec.app_id + " v" +
                                std::to_string(submit->spec.version) +
                                " already exists with different contents");
            }
            add_application(state, submit->spec);
            return SubmitAppReply{submit->spec.app_id};
        }
        if (const auto* submit = std::get_if<SubmitJobRequest>(&event.msg)) {
            return expand_and_submit_job(state, *submit);
        }
        if (std::get_if<TickWaits>(&event.msg)) {
            expire_waits(state, event.t);
            return Ack{};
        }
        if (std::get_if<TickDeadlines>(&event.msg)) {
            expire_deadlines(state, event.t);
            return Ack{};
        }
    } catch (const Error& e) {
        return error_reply(e);
    }
    return ErrorReply{error_code_name(ErrorCode::MalformedMessage),
                      std::string("unexpected message kind ") + message_kind(event.msg)};
}

Message Server::commit(const Message& request) {
    std::lock_guard<std::mutex> lock(mutex_);
    TimedMessage event{std::max(wall_now(), state_.now), request};
    // Dry-run on a copy: rejected events leave no trace in the journal.
    SchedulerState next = state_;
    Message reply = apply_event(next, event);
    if (!is_error(reply)) {
        journal_.append(event);
        state_ = std::move(next);
    }
    return reply;
}

Message Server::handle_submit_app(const SubmitAppRequest& request) {
    // Blobs land in the store before the event is journaled; replay expects
    // to find them. Content addressing keeps rejected leftovers harmless.
    try {
        for (const auto& blob : request.blobs) blobs_.put_with_digest(blob.data, blob.digest);
        for (const auto& f : request.spec.files) {
            if (!blobs_.has(f.file.digest))
                throw Error(ErrorCode::MissingBlob,
                            "no blob uploaded for " + f.file.name + " (" + f.file.digest + ")");
            if (blobs_.get(f.file.digest).size() != f.file.size_bytes)
                throw Error(ErrorCode::DigestMismatch,
                            "declared size of " + f.file.name + " does not match its blob");
        }
        validate_application(request.spec, keys_.public_key);
    } catch (const Error& e) {
        return error_reply(e);
    }
    return commit(request);
}

Message Server::handle_submit_job(const SubmitJobRequest& request) {
    try {
        for (const auto& blob : request.blobs) blobs_.put_with_digest(blob.data, blob.digest);
        for (const auto& stage : request.stages) {
            for (const auto& f : stage.env_files) {
                if (!blobs_.has(f.digest))
                    throw Error(ErrorCode::MissingBlob, "environment file " + f.name);
            }
            for (const auto& f : stage.patch_files) {
                if (!blobs_.has(f.digest))
                    throw Error(ErrorCode::MissingBlob, "patch file " + f.name);
            }
        }
    } catch (const Error& e) {
        return error_reply(e);
    }
    return commit(request);
}

Message Server::handle(const Message& request) {
    try {
        if (const auto* dl = std::get_if<DownloadRequest>(&request)) {
            return DownloadReply{blobs_.get(dl->digest)};
        }
        if (const auto* st = std::get_if<StatusRequest>(&request)) {
            std::lock_guard<std::mutex> lock(mutex_);
            return build_status(*st);
        }
        if (const auto* fetch = std::get_if<FetchRequest>(&request)) {
            return FetchReply{aggregate_results(fetch->job_id)};
        }
        if (const auto* submit = std::get_if<SubmitAppRequest>(&request)) {
            return handle_submit_app(*submit);
        }
        if (const auto* submit = std::get_if<SubmitJobRequest>(&request)) {
            return handle_submit_job(*submit);
        }
        if (const auto* upload = std::get_if<ResultUpload>(&request)) {
            // Output payloads become blobs up front so DONE workunits can be
            // aggregated and served for download.
            for (const auto& o : upload->outputs) blobs_.put_with_digest(o.data, o.file.digest);
            return commit(request);
        }
        if (std::holds_alternative<RegisterRequest>(request) ||
            std::holds_alternative<WorkRequest>(request) ||
            std::holds_alternative<InventoryAnswerBatch>(request) ||
            std::holds_alternative<TickWaits>(request) ||
            std::holds_alternative<TickDeadlines>(request)) {
            return commit(request);
        }
    } catch (const Error& e) {
        return error_reply(e);
    }
    return ErrorReply{error_code_name(ErrorCode::MalformedMessage),
                      std::string("unexpected request kind ") + message_kind(request)};
}

StatusReply Server::build_status(const StatusRequest& request) const {
    StatusReply reply;
    std::set<std::string> filter;
    if (!request.job_id.empty()) {
        auto it = state_.jobs.find(request.job_id);
        if (it == state_.jobs.end()) throw Error(ErrorCode::UnknownJob, request.job_id);
        filter.insert(it->second.begin(), it->second.end());
    }
    auto job_of = [&](const std::string& wu_id) -> std::string {
        for (const auto& [job, ids] : state_.jobs) {
            if (std::find(ids.begin(), ids.end(), wu_id) != ids.end()) return job;
        }
        return "";
    };

    std::map<std::string, std::uint64_t> counts;
    std::vector<const Workunit*> wus;
    for (const auto& [id, wu] : state_.workunits) {
        if (!filter.empty() && !filter.count(id)) continue;
        wus.push_back(&wu);
    }
    std::sort(wus.begin(), wus.end(), [](const Workunit* a, const Workunit* b) {
        return a->submit_seq < b->submit_seq;
    });
    for (const Workunit* wu : wus) {
        counts[wu_state_name(wu->state)]++;
        reply.workunits.push_back(
            WorkunitStatus{wu->wu_id, wu_state_name(wu->state), job_of(wu->wu_id)});
    }
    for (WuState s : {WuState::PENDING, WuState::WAITING_FOR_DATA, WuState::READY,
                      WuState::ASSIGNED, WuState::DONE, WuState::FAILED}) {
        reply.state_counts.emplace_back(wu_state_name(s), counts[wu_state_name(s)]);
    }
    for (const auto& [id, result] : state_.results) {
        if (!filter.empty() && !filter.count(result.wu_id)) continue;
        reply.results.push_back(
            ResultStatus{id, result.wu_id, result.client_id, result_state_name(result.state)});
    }
    for (const auto& [id, client] : state_.clients) {
        reply.clients.push_back(
            ClientStatus{id, client.inventory.size(), client.last_contact});
    }
    auto leaderboard = [](const std::map<std::string, double>& rows) {
        std::vector<CreditRow> out;
        for (const auto& [id, credit] : rows) out.push_back(CreditRow{id, credit});
        std::sort(out.begin(), out.end(), [](const CreditRow& a, const CreditRow& b) {
            if (a.credit != b.credit) return a.credit > b.credit;
            return a.id < b.id;
        });
        return out;
    };
    reply.users = leaderboard(state_.credit.users());
    reply.groups = leaderboard(state_.credit.groups());
    return reply;
}

Bytes Server::aggregate_results(const std::string& job_id) {
    // A job's wu_ids are stored in submission order, so walking them (and
    // sorting each result's outputs by name) yields the documented
    // (submit_seq, file name) archive order.
    std::vector<ArchiveEntry> entries;
    {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = state_.jobs.find(job_id);
        if (it == state_.jobs.end()) throw Error(ErrorCode::UnknownJob, job_id);
        std::vector<std::string> unfinished;
        for (const auto& wu_id : it->second) {
            const Workunit& wu = state_.workunits.at(wu_id);
            if (wu.state != WuState::DONE) unfinished.push_back(wu_id);
        }
        if (!unfinished.empty()) {
            std::string list;
            for (const auto& id : unfinished) list += (list.empty() ? "" : ", ") + id;
            throw Error(ErrorCode::JobIncomplete, "unfinished workunits: " + list);
        }
        for (const auto& wu_id : it->second) {
            // The workunit is DONE, so exactly one SUCCESS result exists.
            for (const auto& [rid, result] : state_.results) {
                if (result.wu_id != wu_id || result.state != ResultState::SUCCESS) continue;
                std::vector<FileId> outputs = result.output_files;
                std::sort(outputs.begin(), outputs.end(),
                          [](const FileId& a, const FileId& b) { return a.name < b.name; });
                for (const auto& f : outputs) {
                    ArchiveEntry e;
                    e.wu_id = wu_id;
                    e.file = f;
                    entries.push_back(std::move(e));
                }
                break;
            }
        }
    }
    // Blob reads happen outside the scheduler lock.
    for (auto& e : entries) e.data = blobs_.get(e.file.digest);
    return build_archive(entries);
}

} // namespace locflow
