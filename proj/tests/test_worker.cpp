#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <thread>

#include <filesystem>
#include <fstream>
#include <random>

#include "locflow/blobstore.hpp"
#include "locflow/netio.hpp"
#include "locflow/worker.hpp"

using namespace locflow;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("locflow-worker-" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void put_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << content;
}

// Serves manifests straight from a blob directory; no server round trip in
// unit tests.
struct LocalBlobs {
    BlobStore store;
    explicit LocalBlobs(const fs::path& dir) : store(dir) {}

    ManifestEntry entry(const std::string& name, const std::string& content,
                        FilePurpose purpose) {
        Bytes data(content.begin(), content.end());
        store.put(data);
        ManifestEntry e;
        e.file = file_id_of_bytes(name, data);
        e.purpose = purpose;
        if (purpose == FilePurpose::APP) e.signature = Bytes(4, 1);
        return e;
    }
};

BlobFetcher cache_only_fetcher(const TempDir& tmp, const fs::path& blob_dir) {
    // Point the cache straight at the blob directory: every manifest entry
    // resolves locally and no network is touched.
    return BlobFetcher("127.0.0.1:1", blob_dir, tmp.path / "transfer.log");
}

} // namespace

TEST_CASE("scan_inventory") {
    TempDir tmp;
    fs::path data = tmp.path / "data";

    SUBCASE("missing directory") {
        CHECK_THROWS_AS(scan_inventory(data), Error);
    }

    fs::create_directories(data);
    SUBCASE("empty directory") { CHECK(scan_inventory(data).empty()); }

    SUBCASE("one file with a known digest") {
        put_file(data / "known.dat", "abc");
        auto inventory = scan_inventory(data);
        REQUIRE(inventory.size() == 1);
        CHECK(inventory[0].name == "known.dat");
        CHECK(inventory[0].size_bytes == 3);
        // Digest frozen from the published sha256("abc") test vector.
        CHECK(inventory[0].digest ==
              "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    SUBCASE("hidden and temp files are excluded") {
        put_file(data / "real.dat", "x");
        put_file(data / ".hidden", "x");
        put_file(data / "partial.tmp", "x");
        fs::create_directories(data / "subdir");
        auto inventory = scan_inventory(data);
        REQUIRE(inventory.size() == 1);
        CHECK(inventory[0].name == "real.dat");
    }

    SUBCASE("content change swaps the FileId") {
        put_file(data / "f.dat", "v1");
        auto before = scan_inventory(data);
        put_file(data / "f.dat", "v2");
        auto after = scan_inventory(data);
        REQUIRE(before.size() == 1);
        REQUIRE(after.size() == 1);
        CHECK(before[0].digest != after[0].digest);
    }
}

TEST_CASE("build_sandbox: patch shadows environment") {
    TempDir tmp;
    LocalBlobs blobs(tmp.path / "blobs");
    BlobFetcher fetcher = cache_only_fetcher(tmp, tmp.path / "blobs");

    std::vector<ManifestEntry> manifest{
        blobs.entry("run.sh", "#!/bin/sh\nexit 0\n", FilePurpose::APP),
        blobs.entry("opts.txt", "events=10\n", FilePurpose::ENV),
        blobs.entry("opts.txt", "events=100\n", FilePurpose::PATCH),
    };
    fs::create_directories(tmp.path / "data");
    Sandbox sandbox =
        build_sandbox(tmp.path / "sandbox", manifest, {}, tmp.path / "data", fetcher);

    CHECK(sandbox.entry.filename() == "run.sh");
    std::ifstream in(sandbox.dir / "opts.txt");
    std::string line;
    std::getline(in, line);
    CHECK(line == "events=100"); // patch version
    // The entry executable became runnable.
    auto perms = fs::status(sandbox.entry).permissions();
    CHECK((perms & fs::perms::owner_exec) != fs::perms::none);
}

TEST_CASE("build_sandbox without patch is app+env") {
    TempDir tmp;
    LocalBlobs blobs(tmp.path / "blobs");
    BlobFetcher fetcher = cache_only_fetcher(tmp, tmp.path / "blobs");
    std::vector<ManifestEntry> manifest{
        blobs.entry("run.sh", "#!/bin/sh\nexit 0\n", FilePurpose::APP),
        blobs.entry("opts.txt", "events=10\n", FilePurpose::ENV),
    };
    fs::create_directories(tmp.path / "data");
    Sandbox sandbox =
        build_sandbox(tmp.path / "sb", manifest, {}, tmp.path / "data", fetcher);
    std::ifstream in(sandbox.dir / "opts.txt");
    std::string line;
    std::getline(in, line);
    CHECK(line == "events=10");
}

TEST_CASE("build_sandbox is deterministic over the same blobs") {
    TempDir tmp;
    LocalBlobs blobs(tmp.path / "blobs");
    BlobFetcher fetcher = cache_only_fetcher(tmp, tmp.path / "blobs");
    std::vector<ManifestEntry> manifest{
        blobs.entry("run.sh", "#!/bin/sh\nexit 0\n", FilePurpose::APP),
        blobs.entry("a.conf", "alpha\n", FilePurpose::ENV),
        blobs.entry("b.conf", "beta\n", FilePurpose::ENV),
    };
    fs::create_directories(tmp.path / "data");
    put_file(tmp.path / "data" / "in.dat", "input-bytes");

    auto tree_digest = [&](const fs::path& dir) {
        std::map<std::string, std::string> files;
        for (const auto& e : fs::directory_iterator(dir))
            files[e.path().filename().string()] = sha256_hex_file(e.path().string());
        std::string acc;
        for (const auto& [name, digest] : files) acc += name + ":" + digest + ";";
        return sha256_hex(acc);
    };

    Sandbox s1 = build_sandbox(tmp.path / "s1", manifest, {"in.dat"}, tmp.path / "data",
                               fetcher);
    Sandbox s2 = build_sandbox(tmp.path / "s2", manifest, {"in.dat"}, tmp.path / "data",
                               fetcher);
    CHECK(tree_digest(s1.dir) == tree_digest(s2.dir));
    CHECK(s1.input_names == std::vector<std::string>{"in.dat"});
}

TEST_CASE("build_sandbox fails on a missing input") {
    TempDir tmp;
    LocalBlobs blobs(tmp.path / "blobs");
    BlobFetcher fetcher = cache_only_fetcher(tmp, tmp.path / "blobs");
    std::vector<ManifestEntry> manifest{
        blobs.entry("run.sh", "#!/bin/sh\nexit 0\n", FilePurpose::APP)};
    fs::create_directories(tmp.path / "data");
    CHECK_THROWS_AS(
        build_sandbox(tmp.path / "sb", manifest, {"ghost.dat"}, tmp.path / "data", fetcher),
        Error);
}

TEST_CASE("execute runs the entry and reports outcomes") {
    TempDir tmp;
    LocalBlobs blobs(tmp.path / "blobs");
    BlobFetcher fetcher = cache_only_fetcher(tmp, tmp.path / "blobs");
    fs::create_directories(tmp.path / "data");

    SUBCASE("stub writing an output file") {
        std::vector<ManifestEntry> manifest{blobs.entry(
            "run.sh", "#!/bin/sh\necho payload > out.part0.dat\nexit 0\n",
            FilePurpose::APP)};
        Sandbox sandbox =
            build_sandbox(tmp.path / "sb", manifest, {}, tmp.path / "data", fetcher);
        ExecOutcome outcome = execute(sandbox, 10);
        CHECK(outcome.launched);
        CHECK_FALSE(outcome.timed_out);
        CHECK(outcome.exit_code == 0);
        CHECK(fs::exists(sandbox.dir / "out.part0.dat"));
        CHECK(outcome.cpu_seconds >= 0);
    }

    SUBCASE("nonzero exit propagates") {
        std::vector<ManifestEntry> manifest{
            blobs.entry("run.sh", "#!/bin/sh\nexit 3\n", FilePurpose::APP)};
        Sandbox sandbox =
            build_sandbox(tmp.path / "sb", manifest, {}, tmp.path / "data", fetcher);
        ExecOutcome outcome = execute(sandbox, 10);
        CHECK(outcome.exit_code == 3);
    }

    SUBCASE("timeout kills the job") {
        std::vector<ManifestEntry> manifest{
            blobs.entry("run.sh", "#!/bin/sh\nsleep 30\n", FilePurpose::APP)};
        Sandbox sandbox =
            build_sandbox(tmp.path / "sb", manifest, {}, tmp.path / "data", fetcher);
        ExecOutcome outcome = execute(sandbox, 1);
        CHECK(outcome.launched);
        CHECK(outcome.timed_out);
    }

    SUBCASE("environment variables reach the job") {
        std::vector<ManifestEntry> manifest{blobs.entry(
            "run.sh", "#!/bin/sh\necho x > \"$LOCFLOW_DATA_DIR/made.dat\"\n",
            FilePurpose::APP)};
        Sandbox sandbox =
            build_sandbox(tmp.path / "sb", manifest, {}, tmp.path / "data", fetcher);
        ExecOutcome outcome = execute(
            sandbox, 10, {{"LOCFLOW_DATA_DIR", fs::absolute(tmp.path / "data").string()}});
        CHECK(outcome.exit_code == 0);
        CHECK(fs::exists(tmp.path / "data" / "made.dat"));
    }
}

TEST_CASE("execute works with a relative work directory") {
    TempDir tmp;
    LocalBlobs blobs(tmp.path / "blobs");
    BlobFetcher fetcher = cache_only_fetcher(tmp, tmp.path / "blobs");
    fs::create_directories(tmp.path / "data");
    std::vector<ManifestEntry> manifest{
        blobs.entry("run.sh", "#!/bin/sh\necho ok > done.flag\n", FilePurpose::APP)};

    // Build the sandbox under a path relative to the current directory, the
    // way a daemon started with --work-dir ./w1/work sees it.
    fs::path old_cwd = fs::current_path();
    fs::current_path(tmp.path);
    Sandbox sandbox = build_sandbox("relsb", manifest, {}, "data", fetcher);
    ExecOutcome outcome = execute(sandbox, 10);
    fs::current_path(old_cwd);

    CHECK(outcome.launched);
    CHECK(outcome.exit_code == 0);
    CHECK(fs::exists(tmp.path / "relsb" / "done.flag"));
}

TEST_CASE("get-input application can pull a file from a remote endpoint") {
    // A stand-in for "the file lives on some file server": the get-input
    // stub curls it into the data directory.
    httplib::Server file_server;
    file_server.Get("/seed.dat", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("seed payload from the file server", "application/octet-stream");
    });
    int port = file_server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread serve([&] { file_server.listen_after_bind(); });

    TempDir tmp;
    LocalBlobs blobs(tmp.path / "blobs");
    BlobFetcher fetcher = cache_only_fetcher(tmp, tmp.path / "blobs");
    fs::path data = tmp.path / "data";
    fs::create_directories(data);

    std::string script = "#!/bin/sh\ncurl -s -o \"$LOCFLOW_DATA_DIR/seed.dat\" "
                         "http://127.0.0.1:" + std::to_string(port) + "/seed.dat\n";
    std::vector<ManifestEntry> manifest{blobs.entry("fetch.sh", script, FilePurpose::APP)};
    Sandbox sandbox = build_sandbox(tmp.path / "gi", manifest, {}, data, fetcher);
    ExecOutcome outcome =
        execute(sandbox, 20, {{"LOCFLOW_DATA_DIR", fs::absolute(data).string()}});
    file_server.stop();
    serve.join();

    CHECK(outcome.exit_code == 0);
    auto inventory = scan_inventory(data);
    REQUIRE(inventory.size() == 1);
    CHECK(inventory[0].name == "seed.dat");
    CHECK(inventory[0].size_bytes == 33);
}

TEST_CASE("worker keeps retrying while the server is unreachable") {
    TempDir tmp;
    KeyPair keys = KeyPair::generate();
    keys.save_public((tmp.path / "key.pub").string());

    // Nothing listens on this port; the loop must back off and retry, and
    // the stop flag must be able to end it cleanly.
    TcpListener probe = TcpListener::bind("127.0.0.1", 0);
    std::uint16_t dead_port = probe.port();
    probe.close();

    std::atomic<bool> stop{false};
    WorkerConfig config;
    config.server_addr = "127.0.0.1:" + std::to_string(dead_port);
    config.data_dir = tmp.path / "data";
    config.work_dir = tmp.path / "work";
    config.project_key_path = tmp.path / "key.pub";
    config.retry_initial_secs = 0.05;
    config.retry_cap_secs = 0.1;
    config.stop_flag = &stop;

    std::thread loop([&] { worker_main_loop(config); });
    std::this_thread::sleep_for(std::chrono::milliseconds(400));
    stop = true;
    loop.join(); // returns instead of crashing out of the retry loop
    CHECK(true);
}
