#include "locflow/sim.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <set>

#include "locflow/crypto.hpp"

namespace locflow {

namespace {

constexpr double kDistantDeadline = 1e9;

struct StageDef {
    const char* name;
    const char* app;
    const char* env;
};

constexpr StageDef kStages[] = {
    {"gen", "gen-app", "gen-env"},
    {"sim", "sim-app", "sim-env"},
    {"digi", "digi-app", "digi-env"},
    {"reco", "reco-app", "reco-env"},
};

FileId synthetic_file(const std::string& name, const std::string& tag, std::uint64_t size) {
    // Cost-model files carry sizes and deterministic digests; the simulator
    // never materializes their bytes.
    FileId id;
    id.name = name;
    id.digest = sha256_hex(tag);
    id.size_bytes = size;
    return id;
}

ApplicationSpec synthetic_app(const std::string& app_id, std::uint64_t size) {
    ApplicationSpec app;
    app.app_id = app_id;
    app.version = 1;
    SignedFile f;
    f.file = synthetic_file(app_id + ".bin", app_id, size);
    f.signature = Bytes(64, 0xab);
    f.entry = true;
    app.files.push_back(std::move(f));
    return app;
}

} // namespace

const char* sim_mode_name(SimMode m) {
    switch (m) {
        case SimMode::STRICT: return "strict";
        case SimMode::REPLICATE: return "replicate";
        case SimMode::GET_INPUT: return "get-input";
    }
    return "?";
}

SimMode sim_mode_from_name(const std::string& name) {
    if (name == "strict") return SimMode::STRICT;
    if (name == "replicate") return SimMode::REPLICATE;
    if (name == "get-input" || name == "get_input") return SimMode::GET_INPUT;
    throw Error(ErrorCode::BadConfig, "unknown sim mode '" + name + "'");
}

std::vector<Workunit> build_muon_pipeline(std::uint64_t events,
                                          const std::string& get_input_app) {
    if (events < 10 || events % 10 != 0)
        throw Error(ErrorCode::InvalidEventCount,
                    "events must be a positive multiple of 10, got " + std::to_string(events));
    std::vector<Workunit> wus;

    Workunit gen;
    gen.wu_id = "gen";
    gen.app_id = "gen-app";
    gen.env_id = "gen-env";
    gen.output_template = FileTemplate{"gen.part{index}.dat"};
    gen.max_result_size_bytes = 1ull << 40;
    gen.deadline_secs = kDistantDeadline;
    gen.max_retries = 3;
    wus.push_back(gen);

    struct Chain {
        const char* stage;
        const char* app;
        const char* env;
        const char* input_stage;
    };
    constexpr Chain chain[] = {
        {"sim", "sim-app", "sim-env", "gen"},
        {"digi", "digi-app", "digi-env", "sim"},
        {"reco", "reco-app", "reco-env", "digi"},
    };
    for (const auto& c : chain) {
        for (int i = 0; i < 10; ++i) {
            Workunit wu;
            wu.wu_id = std::string(c.stage) + std::to_string(i);
            wu.app_id = c.app;
            wu.env_id = c.env;
            wu.required_inputs = {std::string(c.input_stage) + ".part" + std::to_string(i) +
                                  ".dat"};
            wu.output_template =
                FileTemplate{std::string(c.stage) + ".part" + std::to_string(i) + ".dat"};
            wu.get_input_app = get_input_app;
            wu.predecessors = {std::string(c.input_stage) == "gen"
                                   ? std::string("gen")
                                   : std::string(c.input_stage) + std::to_string(i)};
            wu.max_result_size_bytes = 1ull << 40;
            wu.deadline_secs = kDistantDeadline;
            wu.max_retries = 3;
            wus.push_back(std::move(wu));
        }
    }
    return wus;
}

void install_muon_catalog(SchedulerState& state, const SimConfig& config) {
    for (const auto& stage : kStages) {
        add_application(state, synthetic_app(stage.app, config.app_bytes));
        EnvironmentBundle env;
        env.env_id = stage.env;
        env.app_id = stage.app;
        env.files = {synthetic_file(std::string(stage.name) + ".conf", stage.env,
                                    config.env_bytes)};
        add_environment(state, env);
    }
    if (config.mode == SimMode::GET_INPUT || !config.external_inputs.empty())
        add_application(state, synthetic_app("fetch-app", config.app_bytes));
}

double muon_baseline_secs(std::uint64_t events, const StageCosts& costs) {
    double e = static_cast<double>(events);
    return e * (costs.gen + costs.sim + costs.digi + costs.reco);
}

SimReport baseline_report(std::uint64_t events, const StageCosts& costs) {
    SimReport report;
    report.events = events;
    report.n_clients = 1;
    report.mode = "baseline";
    report.makespan_secs = muon_baseline_secs(events, costs);
    report.baseline_secs = report.makespan_secs;
    report.completed = 31;
    return report;
}

namespace {

struct SimEngine {
    const SimConfig& config;
    SchedulerState state;
    SimReport report;

    enum class EvKind { POLL, TASK_DONE, GET_INPUT_DONE, TICK };
    struct Event {
        EvKind kind;
        std::string client;
        std::string result_id;
        std::string wu_id;
        double compute = 0;
    };

    std::map<std::pair<double, std::uint64_t>, Event> queue;
    std::uint64_t next_seq = 0;
    std::map<std::string, bool> busy;
    std::map<std::string, std::set<std::string>> downloaded; // client -> digests
    std::set<std::string> fetched_wus; // workunits whose inputs a get-input run pulled
    std::map<std::string, double> busy_secs;
    std::uint64_t executions = 0;
    std::uint64_t local_executions = 0;
    bool finished = false;
    double finish_time = 0;

    explicit SimEngine(const SimConfig& cfg) : config(cfg) {}

    void push(double t, Event ev) { queue.emplace(std::make_pair(t, next_seq++), std::move(ev)); }

    double task_cost(const Workunit& wu) const {
        double e = static_cast<double>(config.events);
        if (wu.app_id == "gen-app") return e * config.cost_per_event.gen;
        if (wu.app_id == "sim-app") return e / 10 * config.cost_per_event.sim;
        if (wu.app_id == "digi-app") return e / 10 * config.cost_per_event.digi;
        if (wu.app_id == "reco-app") return e / 10 * config.cost_per_event.reco;
        return 0;
    }

    std::vector<FileId> outputs_of(const Workunit& wu) const {
        std::uint64_t part_bytes = config.events / 10 * config.bytes_per_event;
        std::vector<FileId> files;
        if (wu.app_id == "gen-app") {
            for (int i = 0; i < 10; ++i) {
                std::string name = resolve_template(wu.output_template, i);
                files.push_back(synthetic_file(name, name + "#" + wu.wu_id, part_bytes));
            }
        } else {
            std::string name = resolve_template(wu.output_template, 0);
            files.push_back(synthetic_file(name, name + "#" + wu.wu_id, part_bytes));
        }
        return files;
    }

    bool all_terminal() const {
        for (const auto& [id, wu] : state.workunits) {
            if (wu.state != WuState::DONE && wu.state != WuState::FAILED) return false;
        }
        return true;
    }

    void check_finished(double t) {
        if (!finished && all_terminal()) {
            finished = true;
            finish_time = t;
        }
    }

    void account_downloads(const std::string& client, const std::vector<ManifestEntry>& manifest) {
        auto& seen = downloaded[client];
        for (const auto& entry : manifest) {
            if (seen.insert(entry.file.digest).second)
                report.bytes_moved_other += entry.file.size_bytes;
        }
    }

    WorkRequest request_of(const std::string& client_id) const {
        const ClientRecord& c = state.clients.at(client_id);
        WorkRequest req;
        req.client_id = client_id;
        req.cpu_count = c.cpu_count;
        req.benchmark_gflops = c.benchmark_gflops;
        req.memory_mb = c.memory_mb;
        req.disk_mb = c.disk_mb;
        for (const auto& [name, fid] : c.inventory) req.inventory.push_back(fid);
        return req;
    }

    void on_poll(double t, const Event& ev) {
        if (busy[ev.client]) return;
        advance_clock(state, t);
        report.messages_exchanged++;
        WorkReply reply = handle_work_request(state, request_of(ev.client));
        switch (reply.kind) {
            case WorkReplyKind::ASSIGNMENT: {
                const Workunit& wu = state.workunits.at(reply.wu_id);
                account_downloads(ev.client, reply.manifest);
                double compute = task_cost(wu);
                executions++;
                if (!fetched_wus.count(reply.wu_id)) local_executions++;
                busy[ev.client] = true;
                push(t + config.overhead_secs + compute,
                     Event{EvKind::TASK_DONE, ev.client, reply.result_id, reply.wu_id,
                           compute});
                break;
            }
            case WorkReplyKind::GET_INPUT_ASSIGNMENT: {
                account_downloads(ev.client, reply.manifest);
                busy[ev.client] = true;
                push(t + config.overhead_secs,
                     Event{EvKind::GET_INPUT_DONE, ev.client, reply.result_id, reply.wu_id, 0});
                break;
            }
            case WorkReplyKind::NO_WORK:
                push(t + std::max(reply.backoff_secs, 1e-9),
                     Event{EvKind::POLL, ev.client, "", "", 0});
                break;
        }
    }

    void on_task_done(double t, const Event& ev) {
        advance_clock(state, t);
        report.messages_exchanged++;
        const Workunit& wu = state.workunits.at(ev.wu_id);
        std::vector<FileId> outputs = outputs_of(wu);

        ResultUpload upload;
        upload.result_id = ev.result_id;
        upload.status = UploadStatus::SUCCESS;
        upload.cpu_seconds = ev.compute;
        for (const auto& f : outputs) {
            // Metadata-only payload: scoring reads the FileId, not the bytes.
            OutputPayload payload;
            payload.file = f;
            upload.outputs.push_back(std::move(payload));
            report.bytes_moved_other += f.size_bytes; // upload to the server
        }
        handle_result(state, upload);
        busy_secs[ev.client] += ev.compute;

        if (config.mode == SimMode::REPLICATE) {
            for (const auto& [cid, client] : state.clients) {
                if (cid == ev.client) continue;
                for (const auto& f : outputs) report.bytes_moved_other += f.size_bytes;
            }
            for (const auto& [cid, client] : state.clients) {
                if (cid == ev.client) continue;
                add_client_files(state, cid, outputs);
            }
        } else if (config.mode == SimMode::GET_INPUT) {
            std::vector<std::string> names;
            for (const auto& f : outputs) names.push_back(f.name);
            remove_client_files(state, ev.client, names);
        }

        busy[ev.client] = false;
        check_finished(t);
        if (!finished) push(t, Event{EvKind::POLL, ev.client, "", "", 0});
    }

    void on_get_input_done(double t, const Event& ev) {
        advance_clock(state, t);
        report.messages_exchanged++;
        std::vector<FileId> produced;
        auto wu_it = state.workunits.find(ev.wu_id);
        if (wu_it != state.workunits.end()) {
            for (const auto& name : wu_it->second.required_inputs) {
                auto cat = state.file_catalog.find(name);
                if (cat != state.file_catalog.end()) {
                    produced.push_back(cat->second);
                } else {
                    auto ext = config.external_inputs.find(name);
                    if (ext != config.external_inputs.end()) produced.push_back(ext->second);
                }
            }
        }
        for (const auto& f : produced) report.bytes_moved_input += f.size_bytes;
        fetched_wus.insert(ev.wu_id);
        handle_get_input_done(state, ev.client, ev.wu_id, produced);
        busy[ev.client] = false;
        check_finished(t);
        if (!finished) push(t, Event{EvKind::POLL, ev.client, "", "", 0});
    }

    void on_tick(double t) {
        advance_clock(state, t);
        expire_waits(state, t);
        expire_deadlines(state, t);
        if (state.policy.poll_via_rpc) {
            std::vector<InventoryQuery> queries = pending_inventory_queries(state);
            if (!queries.empty()) {
                std::set<std::string> wanted;
                for (const auto& q : queries)
                    wanted.insert(q.names.begin(), q.names.end());
                std::vector<InventoryAnswer> answers;
                for (const auto& [cid, client] : state.clients) {
                    report.messages_exchanged++; // query + answer round
                    InventoryAnswer answer;
                    answer.client_id = cid;
                    for (const auto& name : wanted) {
                        if (client.inventory.count(name)) answer.names.push_back(name);
                    }
                    answers.push_back(std::move(answer));
                }
                handle_inventory_answers(state, answers);
            }
        }
        check_finished(t);
        if (!finished) push(t + config.poll_interval, Event{EvKind::TICK, "", "", "", 0});
    }

    SimReport run(const std::vector<Workunit>& pipeline, std::vector<Transition>* trace) {
        state.transition_log = trace;
        report.events = config.events;
        report.n_clients = config.n_clients;
        report.mode = sim_mode_name(config.mode);
        report.seed = config.seed;
        report.baseline_secs = muon_baseline_secs(config.events, config.cost_per_event);

        state.policy.wait_window_secs = config.wait_window_secs;
        state.policy.poll_via_rpc = true;
        state.policy.no_work_backoff_secs = config.poll_interval;

        install_muon_catalog(state, config);
        for (std::uint32_t i = 1; i <= config.n_clients; ++i) {
            ClientRecord client;
            client.client_id = "c" + std::to_string(i);
            client.user_id = "user" + std::to_string(i);
            client.group_id = "grid";
            client.memory_mb = 1 << 20;
            client.disk_mb = 1 << 20;
            register_client(state, client);
            report.messages_exchanged++;
            busy[client.client_id] = false;
        }
        submit_workunits(state, pipeline);

        for (const auto& [cid, b] : busy) push(0, Event{EvKind::POLL, cid, "", "", 0});
        push(config.poll_interval, Event{EvKind::TICK, "", "", "", 0});

        // Hard stop far beyond any sane schedule, so a logic bug cannot spin
        // the virtual clock forever.
        const std::uint64_t max_events = 4'000'000;
        std::uint64_t processed = 0;
        while (!queue.empty() && !finished && processed < max_events) {
            auto it = queue.begin();
            double t = it->first.first;
            Event ev = std::move(it->second);
            queue.erase(it);
            ++processed;
            switch (ev.kind) {
                case EvKind::POLL: on_poll(t, ev); break;
                case EvKind::TASK_DONE: on_task_done(t, ev); break;
                case EvKind::GET_INPUT_DONE: on_get_input_done(t, ev); break;
                case EvKind::TICK: on_tick(t); break;
            }
        }

        report.makespan_secs = finish_time;
        for (const auto& [id, wu] : state.workunits) {
            if (wu.state == WuState::DONE) report.completed++;
            if (wu.state == WuState::FAILED) report.failed++;
        }
        report.locality_fraction =
            executions == 0 ? 1.0
                            : static_cast<double>(local_executions) /
                                  static_cast<double>(executions);
        for (const auto& [cid, secs] : busy_secs) report.client_busy_secs.push_back(secs);
        return report;
    }
};

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

} // namespace

SimReport simulate(const SimConfig& config, const std::vector<Workunit>& pipeline,
                   std::vector<Transition>* trace) {
    SimEngine engine(config);
    return engine.run(pipeline, trace);
}

SimReport simulate(const SimConfig& config) {
    std::string get_input = config.mode == SimMode::GET_INPUT ? "fetch-app" : "";
    return simulate(config, build_muon_pipeline(config.events, get_input));
}

std::string emit_report(const std::vector<SimReport>& reports) {
    std::string csv =
        "e,n,mode,seed,makespan_secs,baseline_secs,makespan_over_baseline,"
        "messages_exchanged,bytes_moved_input,bytes_moved_other,locality_fraction,"
        "completed,failed\n";
    for (const auto& r : reports) {
        double ratio = r.baseline_secs > 0 ? r.makespan_secs / r.baseline_secs : 0;
        csv += std::to_string(r.events) + "," + std::to_string(r.n_clients) + "," + r.mode +
               "," + std::to_string(r.seed) + "," + format_double(r.makespan_secs) + "," +
               format_double(r.baseline_secs) + "," + format_double(ratio) + "," +
               std::to_string(r.messages_exchanged) + "," +
               std::to_string(r.bytes_moved_input) + "," +
               std::to_string(r.bytes_moved_other) + "," +
               format_double(r.locality_fraction) + "," + std::to_string(r.completed) + "," +
               std::to_string(r.failed) + "\n";
    }
    return csv;
}

} // namespace locflow
