#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <thread>

#include "locflow/blobstore.hpp"
#include "locflow/journal.hpp"
#include "locflow/netio.hpp"
#include "locflow/scheduler.hpp"

namespace locflow {

struct ServerConfig {
    std::string listen_host = "127.0.0.1";
    std::uint16_t listen_port = 0; // 0 = ephemeral
    std::filesystem::path data_dir;
    std::filesystem::path keypair_path;
    double tick_secs = 5.0;
    SchedulerPolicy policy;
};

// The project service: scheduling state machine + journal + blob store +
// network endpoints, one process. Every state mutation is journaled before
// its reply leaves the process, so a killed server resumes exactly where
// the log ends.
class Server {
public:
    explicit Server(ServerConfig config);
    ~Server();

    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    // Bind + tick thread; serve_forever() blocks on the accept loop.
    void start();
    void serve_forever();
    void stop();

    std::uint16_t port() const { return listener_.port(); }
    std::string address() const;

    // Full request dispatch, same path the network handlers take. Exposed
    // for in-process integration tests.
    Message handle(const Message& request);

    SchedulerState snapshot() const;
    const Bytes& public_key() const { return keys_.public_key; }

    // Builds the deterministic archive for a finished job.
    Bytes aggregate_results(const std::string& job_id);

private:
    Message apply_event(SchedulerState& state, const TimedMessage& event);
    Message commit(const Message& request);
    Message handle_submit_app(const SubmitAppRequest& request);
    Message handle_submit_job(const SubmitJobRequest& request);
    StatusReply build_status(const StatusRequest& request) const;
    void tick_loop();
    void connection_loop(TcpConn conn);
    Timestamp wall_now() const;

    ServerConfig config_;
    KeyPair keys_;
    BlobStore blobs_;
    Journal journal_;
    mutable std::mutex mutex_; // serializes every scheduler mutation
    SchedulerState state_;
    TcpListener listener_;
    std::thread tick_thread_;
    std::vector<std::thread> conn_threads_;
    std::mutex conn_mutex_;
    std::atomic<bool> stopping_{false};
    std::atomic<bool> started_{false};
};

// Stage expansion shared by the live server and tests: creates the job's
// environments/patches, expands each stage into `count` workunits with
// resolved input names, wires predecessors (index-matched when stage sizes
// agree, full fan-in otherwise) and submits the union.
SubmitJobReply expand_and_submit_job(SchedulerState& state, const SubmitJobRequest& request);

} // namespace locflow
