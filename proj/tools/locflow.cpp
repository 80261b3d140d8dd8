// locflow command line: project keys, job submission, status, result
// retrieval, the pipeline simulator and the server/worker daemons.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <set>
#include <thread>

#include "locflow/archive.hpp"
#include "locflow/blobstore.hpp"
#include "locflow/netio.hpp"
#include "locflow/server.hpp"
#include "locflow/sim.hpp"
#include "locflow/worker.hpp"

namespace {

using namespace locflow;
using json = nlohmann::json;
namespace fs = std::filesystem;

[[noreturn]] void die(const std::string& message) {
    std::cerr << "locflow: " << message << "\n";
    std::exit(1);
}

Message call_or_die(const std::string& server, const Message& request) {
    Message reply = rpc(server, request);
    if (const auto* err = std::get_if<ErrorReply>(&reply))
        die(err->code + ": " + err->message);
    return reply;
}

// --- submit -----------------------------------------------------------------

struct ManifestData {
    std::vector<SubmitAppRequest> apps;
    SubmitJobRequest job;
};

FileId hash_local_file(const fs::path& path, const std::string& name) {
    Bytes data = read_file_bytes(path);
    return file_id_of_bytes(name, data);
}

ManifestData load_manifest(const fs::path& manifest_path, const KeyPair* keys) {
    std::ifstream in(manifest_path);
    if (!in) die("cannot open manifest " + manifest_path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        die("manifest parse error: " + std::string(e.what()));
    }
    fs::path base = manifest_path.parent_path();
    ManifestData out;
    std::set<std::string> blob_digests;

    auto load_file = [&](const json& spec) {
        fs::path path = base / spec.at("path").get<std::string>();
        std::string name = spec.contains("name") ? spec.at("name").get<std::string>()
                                                 : path.filename().string();
        Bytes data = read_file_bytes(path);
        FileId id = file_id_of_bytes(name, data);
        return std::make_pair(id, std::move(data));
    };

    for (const auto& app_spec : doc.value("apps", json::array())) {
        if (!keys) die("manifest submits applications; --keypair is required to sign them");
        SubmitAppRequest request;
        request.spec.app_id = app_spec.at("app_id").get<std::string>();
        request.spec.version = app_spec.value("version", 1);
        request.spec.min_memory_mb = app_spec.value("min_memory_mb", 0);
        request.spec.min_disk_mb = app_spec.value("min_disk_mb", 0);
        for (const auto& file_spec : app_spec.at("files")) {
            auto [id, data] = load_file(file_spec);
            SignedFile f;
            f.file = id;
            f.entry = file_spec.value("entry", false);
            f.signature = sign_digest(from_hex(id.digest), *keys);
            request.spec.files.push_back(std::move(f));
            if (blob_digests.insert(id.digest).second)
                request.blobs.push_back(BlobPayload{id.digest, std::move(data)});
        }
        out.apps.push_back(std::move(request));
    }

    for (const auto& stage_spec : doc.value("stages", json::array())) {
        JobStage stage;
        stage.name = stage_spec.at("name").get<std::string>();
        stage.app_id = stage_spec.at("app").get<std::string>();
        stage.count = stage_spec.value("count", 1);
        for (const auto& p : stage_spec.value("inputs", json::array()))
            stage.input_patterns.push_back(p.get<std::string>());
        stage.output_pattern = stage_spec.at("output").get<std::string>();
        for (const auto& file_spec : stage_spec.value("env", json::array())) {
            auto [id, data] = load_file(file_spec);
            stage.env_files.push_back(id);
            if (blob_digests.insert(id.digest).second)
                out.job.blobs.push_back(BlobPayload{id.digest, std::move(data)});
        }
        for (const auto& file_spec : stage_spec.value("patch", json::array())) {
            auto [id, data] = load_file(file_spec);
            stage.patch_files.push_back(id);
            if (blob_digests.insert(id.digest).second)
                out.job.blobs.push_back(BlobPayload{id.digest, std::move(data)});
        }
        stage.get_input_app = stage_spec.value("get_input_app", std::string());
        for (const auto& p : stage_spec.value("predecessors", json::array()))
            stage.predecessors.push_back(p.get<std::string>());
        stage.max_result_size_bytes = stage_spec.value("max_result_size_bytes", 1u << 20);
        stage.deadline_secs = stage_spec.value("deadline_secs", 3600.0);
        stage.max_retries = stage_spec.value("max_retries", 3);
        out.job.stages.push_back(std::move(stage));
    }
    return out;
}

int cmd_submit(const std::string& server, const fs::path& manifest_path,
               const std::string& keypair_path) {
    std::optional<KeyPair> keys;
    if (!keypair_path.empty()) keys = KeyPair::load(keypair_path);
    ManifestData manifest = load_manifest(manifest_path, keys ? &*keys : nullptr);

    for (const auto& app : manifest.apps) {
        Message reply = call_or_die(server, app);
        const auto* ok = std::get_if<SubmitAppReply>(&reply);
        if (!ok) die("unexpected submit-app reply");
        std::cout << "app " << ok->app_id << " submitted\n";
    }
    if (manifest.job.stages.empty()) return 0;

    Message reply = call_or_die(server, manifest.job);
    const auto* ok = std::get_if<SubmitJobReply>(&reply);
    if (!ok) die("unexpected submit-job reply");
    std::cout << "job " << ok->job_id << " with " << ok->wu_ids.size() << " workunits\n";
    for (const auto& id : ok->wu_ids) std::cout << id << "\n";
    return 0;
}

// --- status ------------------------------------------------------------------

bool all_terminal(const StatusReply& status) {
    for (const auto& wu : status.workunits) {
        if (wu.state != "DONE" && wu.state != "FAILED") return false;
    }
    return !status.workunits.empty();
}

void print_status(const StatusReply& status, const std::string& format) {
    if (format == "table") {
        for (const auto& [state, count] : status.state_counts)
            std::cout << "count\t" << state << "\t" << count << "\n";
        for (const auto& wu : status.workunits)
            std::cout << "wu\t" << wu.wu_id << "\t" << wu.state << "\t" << wu.job_id << "\n";
        for (const auto& r : status.results)
            std::cout << "result\t" << r.result_id << "\t" << r.wu_id << "\t" << r.client_id
                      << "\t" << r.state << "\n";
        for (const auto& c : status.clients)
            std::cout << "client\t" << c.client_id << "\t" << c.inventory_files << "\n";
        for (const auto& u : status.users)
            std::cout << "user\t" << u.id << "\t" << u.credit << "\n";
        for (const auto& g : status.groups)
            std::cout << "group\t" << g.id << "\t" << g.credit << "\n";
        return;
    }
    std::cout << "workunits:";
    for (const auto& [state, count] : status.state_counts)
        if (count > 0) std::cout << " " << state << "=" << count;
    std::cout << "\n";
    for (const auto& wu : status.workunits)
        std::cout << "  " << wu.wu_id << "  " << wu.state
                  << (wu.job_id.empty() ? "" : "  (" + wu.job_id + ")") << "\n";
    if (!status.results.empty()) {
        std::cout << "results:\n";
        for (const auto& r : status.results)
            std::cout << "  " << r.result_id << "  " << r.wu_id << "  on " << r.client_id
                      << "  " << r.state << "\n";
    }
    std::cout << "clients:\n";
    for (const auto& c : status.clients)
        std::cout << "  " << c.client_id << "  " << c.inventory_files << " files\n";
    if (!status.users.empty()) {
        std::cout << "credit:\n";
        for (const auto& u : status.users) std::cout << "  " << u.id << "  " << u.credit << "\n";
        for (const auto& g : status.groups)
            std::cout << "  group " << g.id << "  " << g.credit << "\n";
    }
}

int cmd_status(const std::string& server, const std::string& job, const std::string& format,
               bool watch) {
    while (true) {
        Message reply = call_or_die(server, StatusRequest{job});
        const auto* status = std::get_if<StatusReply>(&reply);
        if (!status) die("unexpected status reply");
        print_status(*status, format);
        if (!watch || all_terminal(*status)) return 0;
        std::this_thread::sleep_for(std::chrono::seconds(5));
        std::cout << "---\n";
    }
}

// --- fetch -------------------------------------------------------------------

int cmd_fetch(const std::string& server, const std::string& job, const fs::path& out_path) {
    Message reply = call_or_die(server, FetchRequest{job});
    const auto* fetched = std::get_if<FetchReply>(&reply);
    if (!fetched) die("unexpected fetch reply");
    std::vector<ArchiveEntry> entries = parse_archive(fetched->archive); // digest check
    write_file_bytes(out_path, fetched->archive);
    std::cout << "wrote " << out_path.string() << " (" << fetched->archive.size()
              << " bytes, " << entries.size() << " files, digests verified)\n";
    return 0;
}

// --- sim ---------------------------------------------------------------------

StageCosts parse_costs(const std::string& text) {
    StageCosts costs;
    if (text.empty()) return costs;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t comma = text.find(',', pos);
        std::string part = text.substr(pos, comma == std::string::npos ? comma : comma - pos);
        std::size_t eq = part.find('=');
        if (eq == std::string::npos) die("bad --cost entry '" + part + "'");
        std::string key = part.substr(0, eq);
        double value = std::stod(part.substr(eq + 1));
        if (key == "gen") costs.gen = value;
        else if (key == "sim") costs.sim = value;
        else if (key == "digi") costs.digi = value;
        else if (key == "reco") costs.reco = value;
        else die("unknown stage '" + key + "' in --cost");
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return costs;
}

int cmd_sim(SimConfig config, bool sweep, const std::string& out_path) {
    std::vector<SimReport> reports;
    if (sweep) {
        for (std::uint64_t e : {100ull, 1000ull}) {
            SimConfig c = config;
            c.events = e;
            reports.push_back(baseline_report(e, c.cost_per_event));
            for (std::uint32_t n : {1u, 2u, 4u, 8u}) {
                c.n_clients = n;
                reports.push_back(simulate(c));
            }
        }
    } else {
        reports.push_back(simulate(config));
    }
    std::string csv = emit_report(reports);
    if (out_path.empty()) {
        std::cout << csv;
    } else {
        write_file_bytes(out_path, Bytes(csv.begin(), csv.end()));
        std::cout << "wrote " << out_path << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"locflow - data-locality-aware master/worker computing"};
    app.require_subcommand(1);

    std::string server_addr = "127.0.0.1:4333";

    // keygen
    auto* keygen = app.add_subcommand("keygen", "generate a project signing keypair");
    std::string key_out = "project.key";
    keygen->add_option("--out", key_out, "keypair file (public half in <out>.pub)");

    // server
    auto* server_cmd = app.add_subcommand("server", "run the scheduling server");
    ServerConfig server_config;
    std::string listen = "127.0.0.1:4333";
    std::string data_dir = "locflow-data";
    std::string keypair_path = "project.key";
    double backoff_secs = 5;
    server_cmd->add_option("--listen", listen, "host:port")->envname("LOCFLOW_LISTEN");
    server_cmd->add_option("--data-dir", data_dir, "journal + blob directory")
        ->envname("LOCFLOW_DATA_DIR");
    server_cmd->add_option("--keypair", keypair_path, "project keypair file")
        ->envname("LOCFLOW_KEYPAIR");
    server_cmd->add_option("--tick-secs", server_config.tick_secs, "timer sweep interval")
        ->envname("LOCFLOW_TICK_SECS");
    server_cmd
        ->add_option("--wait-window-secs", server_config.policy.wait_window_secs,
                     "how long to wait for a data holder")
        ->envname("LOCFLOW_WAIT_WINDOW_SECS");
    server_cmd->add_option("--backoff-secs", backoff_secs, "NO_WORK client backoff")
        ->envname("LOCFLOW_BACKOFF_SECS");
    bool prefer_cached_env = false;
    server_cmd->add_flag("--prefer-cached-env", prefer_cached_env,
                         "tie-break toward clients that already hold the environment");

    // worker
    auto* worker_cmd = app.add_subcommand("worker", "run a worker daemon");
    WorkerConfig worker_config;
    std::string w_server, w_data = "worker-data", w_work = "worker-work",
                w_key = "project.key.pub";
    worker_cmd->add_option("--server", w_server, "server host:port")
        ->envname("LOCFLOW_SERVER")
        ->required();
    worker_cmd->add_option("--data-dir", w_data, "input/output data directory")
        ->envname("LOCFLOW_DATA_DIR");
    worker_cmd->add_option("--work-dir", w_work, "sandbox/cache/log directory")
        ->envname("LOCFLOW_WORK_DIR");
    worker_cmd->add_option("--project-key", w_key, "project public key")
        ->envname("LOCFLOW_PROJECT_KEY");
    worker_cmd->add_option("--user", worker_config.user_id, "credited user id");
    worker_cmd->add_option("--group", worker_config.group_id, "credited group id");
    worker_cmd->add_option("--memory-mb", worker_config.memory_mb, "advertised memory");
    worker_cmd->add_option("--disk-mb", worker_config.disk_mb, "advertised disk");
    worker_cmd->add_option("--gflops", worker_config.benchmark_gflops, "benchmark score");
    worker_cmd->add_option("--max-iterations", worker_config.max_iterations,
                           "stop after N loop passes (testing)");

    // submit
    auto* submit_cmd = app.add_subcommand("submit", "submit a job manifest");
    std::string manifest_path, submit_keypair;
    submit_cmd->add_option("--server", server_addr, "server host:port")
        ->envname("LOCFLOW_SERVER");
    submit_cmd->add_option("--manifest", manifest_path, "job manifest (json)")->required();
    submit_cmd->add_option("--keypair", submit_keypair,
                           "project keypair; needed when the manifest carries apps");

    // status
    auto* status_cmd = app.add_subcommand("status", "query workunit/client/credit state");
    std::string status_job, status_format = "human";
    bool watch = false;
    status_cmd->add_option("--server", server_addr, "server host:port")
        ->envname("LOCFLOW_SERVER");
    status_cmd->add_option("--job", status_job, "restrict to one job");
    status_cmd->add_option("--format", status_format, "human|table")
        ->check(CLI::IsMember({"human", "table"}));
    status_cmd->add_flag("--watch", watch, "repoll every 5s until terminal");

    // fetch
    auto* fetch_cmd = app.add_subcommand("fetch", "download the aggregated job archive");
    std::string fetch_job, fetch_out = "job.lfar";
    fetch_cmd->add_option("--server", server_addr, "server host:port")
        ->envname("LOCFLOW_SERVER");
    fetch_cmd->add_option("--job", fetch_job, "job id")->required();
    fetch_cmd->add_option("--out", fetch_out, "output archive path");

    // sim
    auto* sim_cmd = app.add_subcommand("sim", "run the pipeline simulator");
    SimConfig sim_config;
    std::string cost_text, mode_text = "strict", sim_out;
    bool sweep = false;
    sim_cmd->add_option("--events", sim_config.events, "events e (multiple of 10)");
    sim_cmd->add_option("--clients", sim_config.n_clients, "client count n");
    sim_cmd->add_option("--cost", cost_text, "per-event seconds, e.g. gen=1,sim=6,digi=2,reco=4");
    sim_cmd->add_option("--overhead", sim_config.overhead_secs, "per-task exchange overhead");
    sim_cmd->add_option("--poll", sim_config.poll_interval, "poll/tick interval");
    sim_cmd->add_option("--bytes-per-event", sim_config.bytes_per_event,
                        "output bytes per event per stage");
    sim_cmd->add_option("--seed", sim_config.seed, "rng seed (recorded in the report)");
    sim_cmd->add_option("--mode", mode_text, "strict|replicate|get-input");
    sim_cmd->add_option("--wait-window", sim_config.wait_window_secs,
                        "wait window before get-input dispatch");
    sim_cmd->add_option("--out", sim_out, "write the csv here instead of stdout");
    sim_cmd->add_flag("--sweep", sweep, "run e in {100,1000} x n in {1,2,4,8} plus baselines");

    CLI11_PARSE(app, argc, argv);

    try {
        if (keygen->parsed()) {
            KeyPair keys = KeyPair::generate();
            keys.save(key_out);
            keys.save_public(key_out + ".pub");
            std::cout << "wrote " << key_out << " and " << key_out << ".pub\n";
            return 0;
        }
        if (server_cmd->parsed()) {
            auto [host, port] = split_host_port(listen);
            server_config.listen_host = host;
            server_config.listen_port = port;
            server_config.data_dir = data_dir;
            server_config.keypair_path = keypair_path;
            server_config.policy.no_work_backoff_secs = backoff_secs;
            server_config.policy.prefer_cached_env = prefer_cached_env;
            std::filesystem::create_directories(server_config.data_dir);
            Server server(std::move(server_config));
            server.start();
            std::cout << "listening on " << server.address() << "\n" << std::flush;
            server.serve_forever();
            return 0;
        }
        if (worker_cmd->parsed()) {
            worker_config.server_addr = w_server;
            worker_config.data_dir = w_data;
            worker_config.work_dir = w_work;
            worker_config.project_key_path = w_key;
            worker_main_loop(worker_config);
            return 0;
        }
        if (submit_cmd->parsed()) return cmd_submit(server_addr, manifest_path, submit_keypair);
        if (status_cmd->parsed()) return cmd_status(server_addr, status_job, status_format, watch);
        if (fetch_cmd->parsed()) return cmd_fetch(server_addr, fetch_job, fetch_out);
        if (sim_cmd->parsed()) {
            sim_config.cost_per_event = parse_costs(cost_text);
            sim_config.mode = sim_mode_from_name(mode_text);
            return cmd_sim(sim_config, sweep, sim_out);
        }
    } catch (const locflow::Error& e) {
        die(e.what());
    } catch (const std::exception& e) {
        die(e.what());
    }
    return 0;
}
