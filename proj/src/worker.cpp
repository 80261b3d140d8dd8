#include "locflow/worker.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <fstream>
#include <iostream>
#include <thread>

#include <fcntl.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include "locflow/blobstore.hpp"
#include "locflow/crypto.hpp"
#include "locflow/netio.hpp"

namespace locflow {

namespace fs = std::filesystem;

namespace {

double wall_now() {
    using namespace std::chrono;
    return duration_cast<duration<double>>(system_clock::now().time_since_epoch()).count();
}

void sleep_secs(double secs) {
    if (secs <= 0) return;
    std::this_thread::sleep_for(std::chrono::duration<double>(secs));
}

bool temp_name(const std::string& name) {
    return name.size() >= 4 && name.compare(name.size() - 4, 4, ".tmp") == 0;
}

} // namespace

std::vector<FileId> scan_inventory(const fs::path& data_dir) {
    std::error_code ec;
    if (!fs::is_directory(data_dir, ec))
        throw Error(ErrorCode::UnreadableDirectory, data_dir.string());
    std::vector<FileId> out;
    for (const auto& entry : fs::directory_iterator(data_dir, ec)) {
        if (!entry.is_regular_file()) continue;
        std::string name = entry.path().filename().string();
        if (name.empty() || name.front() == '.' || temp_name(name)) continue;
        if (!valid_file_name(name)) continue;
        FileId id;
        id.name = name;
        id.digest = sha256_hex_file(entry.path().string());
        id.size_bytes = entry.file_size();
        out.push_back(std::move(id));
    }
    if (ec) throw Error(ErrorCode::UnreadableDirectory, data_dir.string());
    std::sort(out.begin(), out.end(),
              [](const FileId& a, const FileId& b) { return a.name < b.name; });
    return out;
}

// ---------------------------------------------------------------------------

BlobFetcher::BlobFetcher(std::string server_addr, fs::path cache_dir, fs::path transfer_log)
    : server_addr_(std::move(server_addr)),
      cache_dir_(std::move(cache_dir)),
      transfer_log_(std::move(transfer_log)) {
    fs::create_directories(cache_dir_);
}

void BlobFetcher::log_line(const std::string& direction, const std::string& purpose,
                           const std::string& name, std::uint64_t bytes) {
    std::ofstream log(transfer_log_, std::ios::app);
    log << direction << ' ' << purpose << ' ' << name << ' ' << bytes << ' '
        << static_cast<std::uint64_t>(wall_now()) << '\n';
}

Bytes BlobFetcher::fetch(const FileId& file, FilePurpose purpose) {
    fs::path cached = cache_dir_ / file.digest;
    if (fs::exists(cached)) {
        Bytes data = read_file_bytes(cached);
        if (sha256_hex(data) == file.digest) return data;
        fs::remove(cached); // rotted cache entry, refetch
    }
    Message reply = rpc(server_addr_, DownloadRequest{file.digest});
    if (const auto* err = std::get_if<ErrorReply>(&reply))
        throw Error(error_code_from_name(err->code), err->message);
    const auto* dl = std::get_if<DownloadReply>(&reply);
    if (!dl) throw Error(ErrorCode::MalformedMessage, "unexpected download reply kind");
    if (sha256_hex(dl->data) != file.digest)
        throw Error(ErrorCode::DigestMismatch, "downloaded blob for " + file.name);
    write_file_bytes(cached, dl->data);
    std::string purpose_lc = file_purpose_name(purpose);
    std::transform(purpose_lc.begin(), purpose_lc.end(), purpose_lc.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    log_line("down", purpose_lc, file.name, dl->data.size());
    return dl->data;
}

void BlobFetcher::log_upload(const std::string& name, std::uint64_t bytes) {
    log_line("up", "output", name, bytes);
}

// ---------------------------------------------------------------------------

Sandbox build_sandbox(const fs::path& sandbox_dir, const std::vector<ManifestEntry>& manifest,
                      const std::vector<std::string>& input_names, const fs::path& data_dir,
                      BlobFetcher& fetcher) {
    std::error_code ec;
    fs::remove_all(sandbox_dir, ec);
    fs::create_directories(sandbox_dir);

    Sandbox sandbox;
    sandbox.dir = sandbox_dir;

    // APP and ENV first, PATCH last: the overlay shadows same-named
    // environment files.
    auto materialize = [&](FilePurpose purpose) {
        for (const auto& entry : manifest) {
            if (entry.purpose != purpose) continue;
            Bytes data = fetcher.fetch(entry.file, entry.purpose);
            fs::path target = sandbox_dir / entry.file.name;
            write_file_bytes(target, data);
        }
    };
    materialize(FilePurpose::APP);
    materialize(FilePurpose::ENV);
    materialize(FilePurpose::PATCH);

    // The first APP manifest entry is the entry executable by protocol
    // convention.
    for (const auto& entry : manifest) {
        if (entry.purpose == FilePurpose::APP) {
            sandbox.entry = sandbox_dir / entry.file.name;
            break;
        }
    }
    if (sandbox.entry.empty())
        throw Error(ErrorCode::MissingBlob, "manifest has no APP entry");
    ::chmod(sandbox.entry.c_str(), 0755);

    for (const auto& name : input_names) {
        fs::path source = data_dir / name;
        fs::path target = sandbox_dir / name;
        if (fs::exists(target)) continue; // materialized files win
        if (!fs::exists(source))
            throw Error(ErrorCode::MissingBlob, "input " + name + " not in data dir");
        std::error_code link_ec;
        fs::create_hard_link(source, target, link_ec);
        if (link_ec) fs::copy_file(source, target);
        sandbox.input_names.push_back(name);
    }
    return sandbox;
}

ExecOutcome execute(const Sandbox& sandbox, double timeout_secs,
                    const std::vector<std::pair<std::string, std::string>>& extra_env) {
    ExecOutcome outcome;
    // Relative paths stop resolving once the child chdirs into the sandbox.
    std::string dir = fs::absolute(sandbox.dir).string();
    std::string entry = fs::absolute(sandbox.entry).string();
    pid_t pid = ::fork();
    if (pid < 0) {
        outcome.launched = false;
        return outcome;
    }
    if (pid == 0) {
        ::setpgid(0, 0);
        if (::chdir(dir.c_str()) != 0) ::_exit(127);
        for (const auto& [k, v] : extra_env) ::setenv(k.c_str(), v.c_str(), 1);
        ::execl(entry.c_str(), entry.c_str(), (char*)nullptr);
        ::_exit(127);
    }
    ::setpgid(pid, pid);
    outcome.launched = true;

    double started = wall_now();
    int status = 0;
    struct rusage usage {};
    while (true) {
        pid_t done = ::wait4(pid, &status, WNOHANG, &usage);
        if (done == pid) break;
        if (done < 0 && errno != EINTR) {
            outcome.exit_code = -1;
            return outcome;
        }
        if (wall_now() - started > timeout_secs) {
            outcome.timed_out = true;
            ::kill(-pid, SIGKILL);
            ::wait4(pid, &status, 0, &usage);
            break;
        }
        sleep_secs(0.01);
    }
    outcome.cpu_seconds =
        static_cast<double>(usage.ru_utime.tv_sec) + usage.ru_utime.tv_usec / 1e6 +
        static_cast<double>(usage.ru_stime.tv_sec) + usage.ru_stime.tv_usec / 1e6;
    if (WIFEXITED(status)) outcome.exit_code = WEXITSTATUS(status);
    else outcome.exit_code = -1;
    return outcome;
}

// ---------------------------------------------------------------------------

namespace {

struct WorkerSession {
    const WorkerConfig& config;
    Bytes project_key;
    std::string client_id;
    BlobFetcher fetcher;
    double retry_secs;

    explicit WorkerSession(const WorkerConfig& cfg)
        : config(cfg),
          project_key(KeyPair::load_public(cfg.project_key_path.string())),
          fetcher(cfg.server_addr, cfg.work_dir / "cache", cfg.work_dir / "transfer.log"),
          retry_secs(cfg.retry_initial_secs) {}

    bool stopped() const { return config.stop_flag && config.stop_flag->load(); }

    void note_transient(const std::string& what) {
        std::cerr << "[worker] transient failure: " << what << "; retrying in "
                  << retry_secs << "s\n";
        sleep_secs(retry_secs);
        retry_secs = std::min(retry_secs * 2, config.retry_cap_secs);
    }

    void reset_retry() { retry_secs = config.retry_initial_secs; }

    Message call(const Message& request) { return rpc(config.server_addr, request); }

    ClientRecord describe(std::vector<FileId> inventory) {
        ClientRecord record;
        record.client_id = client_id;
        record.user_id = config.user_id;
        record.group_id = config.group_id;
        record.cpu_count = config.cpu_count;
        record.benchmark_gflops = config.benchmark_gflops;
        record.memory_mb = config.memory_mb;
        record.disk_mb = config.disk_mb;
        for (auto& f : inventory) record.inventory.emplace(f.name, std::move(f));
        return record;
    }

    void register_with_server() {
        fs::path id_file = config.work_dir / "client_id";
        if (client_id.empty() && fs::exists(id_file)) {
            std::ifstream in(id_file);
            std::getline(in, client_id);
        }
        while (!stopped()) {
            try {
                RegisterRequest request{describe(scan_inventory(config.data_dir)),
                                        kProtocolVersion};
                Message reply = call(request);
                if (const auto* ok = std::get_if<RegisterReply>(&reply)) {
                    client_id = ok->client_id;
                    std::ofstream out(id_file, std::ios::trunc);
                    out << client_id << '\n';
                    reset_retry();
                    std::cerr << "[worker] registered as " << client_id << "\n";
                    return;
                }
                if (const auto* err = std::get_if<ErrorReply>(&reply))
                    throw Error(error_code_from_name(err->code), err->message);
                throw Error(ErrorCode::MalformedMessage, "unexpected register reply");
            } catch (const Error& e) {
                if (e.code() == ErrorCode::IoError) {
                    note_transient(e.message());
                    continue;
                }
                throw;
            }
        }
    }

    void verify_app_signatures(const std::vector<ManifestEntry>& manifest) {
        for (const auto& entry : manifest) {
            if (entry.purpose != FilePurpose::APP) continue;
            Bytes data = fetcher.fetch(entry.file, entry.purpose);
            if (!verify_bytes(data, entry.signature, project_key))
                throw Error(ErrorCode::BadSignature, entry.file.name);
        }
    }

    void upload(ResultUpload upload_msg) {
        // Keep trying through transient failures; the outputs are already
        // safe in the data dir. A terminal server answer ends the attempt.
        while (!stopped()) {
            try {
                Message reply = call(upload_msg);
                if (const auto* err = std::get_if<ErrorReply>(&reply)) {
                    std::cerr << "[worker] upload rejected: " << err->code << " "
                              << err->message << "\n";
                    return;
                }
                if (const auto* ok = std::get_if<UploadReply>(&reply)) {
                    std::cerr << "[worker] result " << upload_msg.result_id << " recorded as "
                              << ok->recorded_state << "\n";
                }
                reset_retry();
                return;
            } catch (const Error& e) {
                if (e.code() == ErrorCode::IoError) {
                    note_transient(e.message());
                    continue;
                }
                throw;
            }
        }
    }

    void run_assignment(const WorkReply& reply) {
        ResultUpload result;
        result.result_id = reply.result_id;
        result.status = UploadStatus::ERROR;

        try {
            verify_app_signatures(reply.manifest);
            Sandbox sandbox = build_sandbox(config.work_dir / "sandbox", reply.manifest,
                                            reply.input_names, config.data_dir, fetcher);
            double budget = std::max(1.0, reply.deadline_at - wall_now());
            ExecOutcome outcome = execute(
                sandbox, budget,
                {{"LOCFLOW_DATA_DIR", fs::absolute(config.data_dir).string()}});
            result.cpu_seconds = outcome.cpu_seconds;

            if (outcome.launched && !outcome.timed_out && outcome.exit_code == 0) {
                FileTemplate output_template{reply.output_template};
                std::vector<fs::path> produced;
                for (const auto& entry : fs::directory_iterator(sandbox.dir)) {
                    if (!entry.is_regular_file()) continue;
                    std::string name = entry.path().filename().string();
                    if (!match_template(output_template, name)) continue;
                    if (std::find(sandbox.input_names.begin(), sandbox.input_names.end(),
                                  name) != sandbox.input_names.end())
                        continue;
                    produced.push_back(entry.path());
                }
                std::sort(produced.begin(), produced.end());
                for (const auto& path : produced) {
                    std::string name = path.filename().string();
                    Bytes data = read_file_bytes(path);
                    OutputPayload payload;
                    payload.file = file_id_of_bytes(name, data);
                    payload.data = std::move(data);
                    // Outputs become local inventory and travel to the server.
                    fs::path kept = config.data_dir / name;
                    std::error_code mv;
                    fs::rename(path, kept, mv);
                    if (mv) {
                        fs::copy_file(path, kept, fs::copy_options::overwrite_existing);
                        fs::remove(path);
                    }
                    fetcher.log_upload(name, payload.file.size_bytes);
                    result.outputs.push_back(std::move(payload));
                }
                result.status = UploadStatus::SUCCESS;
            } else if (outcome.timed_out) {
                std::cerr << "[worker] " << reply.wu_id << " hit its execution budget\n";
            } else {
                std::cerr << "[worker] " << reply.wu_id << " exited with "
                          << outcome.exit_code << "\n";
            }
        } catch (const Error& e) {
            std::cerr << "[worker] assignment " << reply.wu_id << " failed: " << e.what()
                      << "\n";
            result.outputs.clear();
            result.status = UploadStatus::ERROR;
        }
        upload(std::move(result));
    }

    void run_get_input(const WorkReply& reply) {
        try {
            verify_app_signatures(reply.manifest);
            Sandbox sandbox = build_sandbox(config.work_dir / "sandbox-getinput",
                                            reply.manifest, {}, config.data_dir, fetcher);
            double budget = std::max(1.0, reply.deadline_at - wall_now());
            ExecOutcome outcome = execute(
                sandbox, budget,
                {{"LOCFLOW_DATA_DIR", fs::absolute(config.data_dir).string()}});
            std::cerr << "[worker] get-input for " << reply.wu_id << " finished (exit "
                      << outcome.exit_code << ")\n";
            // Whatever landed in the data dir rides along with the next
            // work request.
        } catch (const Error& e) {
            std::cerr << "[worker] get-input " << reply.wu_id << " failed: " << e.what()
                      << "\n";
        }
    }
};

} // namespace

void worker_main_loop(const WorkerConfig& config) {
    fs::create_directories(config.data_dir);
    fs::create_directories(config.work_dir);

    WorkerSession session(config);
    session.register_with_server();

    long iterations = 0;
    while (!session.stopped()) {
        if (config.max_iterations >= 0 && iterations++ >= config.max_iterations) break;
        try {
            WorkRequest request;
            request.client_id = session.client_id;
            request.cpu_count = config.cpu_count;
            request.benchmark_gflops = config.benchmark_gflops;
            request.memory_mb = config.memory_mb;
            request.disk_mb = config.disk_mb;
            request.inventory = scan_inventory(config.data_dir);
            request.protocol_version = kProtocolVersion;

            Message reply = session.call(request);
            session.reset_retry();

            if (const auto* err = std::get_if<ErrorReply>(&reply)) {
                if (error_code_from_name(err->code) == ErrorCode::UnknownClient) {
                    // Fresh server state; introduce ourselves again.
                    session.register_with_server();
                    continue;
                }
                std::cerr << "[worker] server error: " << err->code << " " << err->message
                          << "\n";
                sleep_secs(std::min(5.0, config.backoff_cap_secs));
                continue;
            }
            const auto* work = std::get_if<WorkReply>(&reply);
            if (!work) {
                std::cerr << "[worker] unexpected reply kind " << message_kind(reply) << "\n";
                continue;
            }
            switch (work->kind) {
                case WorkReplyKind::ASSIGNMENT:
                    std::cerr << "[worker] assigned " << work->wu_id << "\n";
                    session.run_assignment(*work);
                    break;
                case WorkReplyKind::GET_INPUT_ASSIGNMENT:
                    std::cerr << "[worker] get-input for " << work->wu_id << "\n";
                    session.run_get_input(*work);
                    break;
                case WorkReplyKind::NO_WORK:
                    sleep_secs(std::min(work->backoff_secs, config.backoff_cap_secs));
                    break;
            }
        } catch (const Error& e) {
            if (e.code() == ErrorCode::IoError) {
                session.note_transient(e.message());
                continue;
            }
            throw;
        }
    }
}

} // namespace locflow
