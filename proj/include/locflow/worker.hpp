#pragma once

#include <atomic>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "locflow/domain.hpp"
#include "locflow/wire.hpp"

namespace locflow {

struct WorkerConfig {
    std::string server_addr; // host:port
    std::filesystem::path data_dir;
    std::filesystem::path work_dir;
    std::filesystem::path project_key_path; // public key file
    std::string user_id = "anonymous";
    std::string group_id;
    std::uint32_t cpu_count = 1;
    double benchmark_gflops = 1.0;
    std::uint64_t memory_mb = 4096;
    std::uint64_t disk_mb = 16384;
    double retry_initial_secs = 1.0; // transient-error backoff, doubling
    double retry_cap_secs = 300.0;
    double backoff_cap_secs = 300.0;
    long max_iterations = -1;            // <0 = run forever
    std::atomic<bool>* stop_flag = nullptr; // optional external stop
};

// The populated execution directory for one job: application + environment
// with the patch overlay applied, required inputs linked in from the data
// directory.
struct Sandbox {
    std::filesystem::path dir;
    std::filesystem::path entry;
    std::vector<std::string> input_names;
};

struct ExecOutcome {
    bool launched = false;
    bool timed_out = false;
    int exit_code = -1;
    double cpu_seconds = 0;
};

// One FileId per regular file in the directory; dotfiles and *.tmp are
// skipped. Throws Error(UnreadableDirectory).
std::vector<FileId> scan_inventory(const std::filesystem::path& data_dir);

// Fetches a blob by digest, first from the local cache, then from the
// server; verifies the digest either way and logs real downloads.
class BlobFetcher {
public:
    BlobFetcher(std::string server_addr, std::filesystem::path cache_dir,
                std::filesystem::path transfer_log);

    Bytes fetch(const FileId& file, FilePurpose purpose);
    void log_upload(const std::string& name, std::uint64_t bytes);

private:
    void log_line(const std::string& direction, const std::string& purpose,
                  const std::string& name, std::uint64_t bytes);

    std::string server_addr_;
    std::filesystem::path cache_dir_;
    std::filesystem::path transfer_log_;
};

// Materializes the manifest into `sandbox_dir` (patch entries shadow
// same-named environment files) and links the inputs from `data_dir`.
// APP entries must already be signature-verified by the caller.
Sandbox build_sandbox(const std::filesystem::path& sandbox_dir,
                      const std::vector<ManifestEntry>& manifest,
                      const std::vector<std::string>& input_names,
                      const std::filesystem::path& data_dir, BlobFetcher& fetcher);

// Runs the sandbox entry as a subprocess (cwd = sandbox), kills the whole
// process group at the timeout, reports the child's CPU time.
ExecOutcome execute(const Sandbox& sandbox, double timeout_secs,
                    const std::vector<std::pair<std::string, std::string>>& extra_env = {});

// register -> loop { scan, request, act } until stopped. Never returns in
// daemon use; tests bound it with max_iterations / stop_flag.
void worker_main_loop(const WorkerConfig& config);

} // namespace locflow
