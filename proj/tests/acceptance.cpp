// Release acceptance suite. Each criterion runs end to end at its stated
// tolerance and prints exactly one [PASS]/[FAIL] line; the binary exits
// nonzero if any criterion fails.
//
// usage: acceptance <path-to-locflow-cli>

#include <algorithm>
#include <chrono>
#include <csignal>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include "locflow/archive.hpp"
#include "locflow/blobstore.hpp"
#include "locflow/netio.hpp"
#include "locflow/server.hpp"
#include "locflow/sim.hpp"

using namespace locflow;
namespace fs = std::filesystem;

namespace {

std::string g_cli;
fs::path g_root;

double wall_now() {
    using namespace std::chrono;
    return duration_cast<duration<double>>(steady_clock::now().time_since_epoch()).count();
}

void sleep_secs(double secs) {
    std::this_thread::sleep_for(std::chrono::duration<double>(secs));
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& content) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << content;
}

// --- child processes ---------------------------------------------------------

struct Proc {
    pid_t pid = -1;
    fs::path log;

    bool running() const {
        if (pid <= 0) return false;
        return ::kill(pid, 0) == 0;
    }
    void kill_now() {
        if (pid <= 0) return;
        ::kill(pid, SIGKILL);
        int status = 0;
        ::waitpid(pid, &status, 0);
        pid = -1;
    }
    int wait_exit() {
        if (pid <= 0) return -1;
        int status = 0;
        ::waitpid(pid, &status, 0);
        pid = -1;
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }
};

Proc spawn(const std::vector<std::string>& args, const fs::path& log_path) {
    Proc proc;
    proc.log = log_path;
    fs::create_directories(log_path.parent_path());
    pid_t pid = ::fork();
    if (pid == 0) {
        int fd = ::open(log_path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
        if (fd >= 0) {
            ::dup2(fd, 1);
            ::dup2(fd, 2);
            ::close(fd);
        }
        std::vector<char*> argv;
        for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
        argv.push_back(nullptr);
        ::execv(argv[0], argv.data());
        ::_exit(127);
    }
    proc.pid = pid;
    return proc;
}

std::uint16_t pick_free_port() {
    TcpListener probe = TcpListener::bind("127.0.0.1", 0);
    std::uint16_t port = probe.port();
    probe.close();
    return port;
}

// Waits for the server's startup banner and returns its address.
std::string wait_for_server(const Proc& proc, double timeout = 15) {
    double start = wall_now();
    while (wall_now() - start < timeout) {
        std::string log = slurp(proc.log);
        auto pos = log.find("listening on ");
        if (pos != std::string::npos) {
            auto end = log.find('\n', pos);
            return log.substr(pos + 13, end - pos - 13);
        }
        sleep_secs(0.05);
    }
    return "";
}

StatusReply status_of(const std::string& addr, const std::string& job = "") {
    Message reply = rpc(addr, StatusRequest{job});
    if (const auto* s = std::get_if<StatusReply>(&reply)) return *s;
    throw Error(ErrorCode::IoError, "status request failed");
}

bool wait_status(const std::string& addr, double timeout,
                 const std::function<bool(const StatusReply&)>& done,
                 const std::string& job = "") {
    double start = wall_now();
    while (wall_now() - start < timeout) {
        try {
            if (done(status_of(addr, job))) return true;
        } catch (const Error&) {
            // server may be restarting
        }
        sleep_secs(0.1);
    }
    return false;
}

std::uint64_t count_state(const StatusReply& status, const std::string& state) {
    for (const auto& [name, count] : status.state_counts)
        if (name == state) return count;
    return 0;
}

// --- criterion bookkeeping -----------------------------------------------------

int g_failures = 0;

void report(int number, const std::string& name, bool pass, const std::string& detail) {
    std::cout << (pass ? "[PASS]" : "[FAIL]") << " criterion " << number << ": " << name
              << " -- " << detail << std::endl;
    if (!pass) ++g_failures;
}

// ===========================================================================
// Random scheduler states for criteria 1 and 2. States are assembled
// directly (not via operation sequences) so the generators cover reachable
// and near-reachable corners alike.

struct Instance {
    SchedulerState state;
    WorkRequest request;
};

std::string fake_digest(const std::string& tag) { return sha256_hex(tag); }

SchedulerState instance_base() {
    SchedulerState state;
    state.policy.wait_window_secs = 50;
    state.now = 1000;

    auto mk_app = [](const std::string& id, std::uint64_t min_mem) {
        ApplicationSpec app;
        app.app_id = id;
        SignedFile f;
        f.file = FileId{id + ".bin", fake_digest(id), 10};
        f.signature = Bytes(4, 1);
        f.entry = true;
        app.files.push_back(std::move(f));
        app.min_memory_mb = min_mem;
        return app;
    };
    state.apps["app"] = mk_app("app", 0);
    state.apps["app-big"] = mk_app("app-big", 2048);
    state.apps["fetcher"] = mk_app("fetcher", 0);
    EnvironmentBundle env;
    env.env_id = "env";
    env.app_id = "app";
    state.envs["env"] = env;
    return state;
}

// wu state codes used by the enumerators
enum class WuCode {
    READY,
    WAIT_NO_TIMER,
    WAIT_TIMER_LIVE,
    WAIT_TIMER_EXPIRED,
    WAIT_GI_READY,
    PENDING_BLOCKED,
    RESERVED_FOR_REQUESTER,
    RESERVED_FOR_OTHER,
};
constexpr WuCode kWuCodes[] = {
    WuCode::READY,          WuCode::WAIT_NO_TIMER,          WuCode::WAIT_TIMER_LIVE,
    WuCode::WAIT_TIMER_EXPIRED, WuCode::WAIT_GI_READY,      WuCode::PENDING_BLOCKED,
    WuCode::RESERVED_FOR_REQUESTER, WuCode::RESERVED_FOR_OTHER,
};

void apply_code(SchedulerState& state, Workunit& wu, WuCode code) {
    switch (code) {
        case WuCode::READY: wu.state = WuState::READY; break;
        case WuCode::WAIT_NO_TIMER: wu.state = WuState::WAITING_FOR_DATA; break;
        case WuCode::WAIT_TIMER_LIVE:
            wu.state = WuState::WAITING_FOR_DATA;
            state.wait_timers[wu.wu_id] = state.now + 25;
            break;
        case WuCode::WAIT_TIMER_EXPIRED:
            wu.state = WuState::WAITING_FOR_DATA;
            state.wait_timers[wu.wu_id] = state.now - 1;
            break;
        case WuCode::WAIT_GI_READY:
            wu.state = WuState::WAITING_FOR_DATA;
            wu.get_input_ready = true;
            break;
        case WuCode::PENDING_BLOCKED:
            wu.state = WuState::PENDING;
            wu.predecessors.push_back("blocker");
            break;
        case WuCode::RESERVED_FOR_REQUESTER:
            wu.state = WuState::READY;
            state.reservations[wu.wu_id] = "c0";
            break;
        case WuCode::RESERVED_FOR_OTHER:
            wu.state = WuState::READY;
            state.reservations[wu.wu_id] = "other";
            break;
    }
}

// The independent matcher: first FIFO-eligible direct assignment, else the
// first FIFO get-input dispatch, else no work. Reads nothing but the
// declared decision inputs.
struct OracleVerdict {
    WorkReplyKind kind = WorkReplyKind::NO_WORK;
    std::string wu_id;
};

OracleVerdict oracle_decide(const SchedulerState& state, const WorkRequest& request) {
    std::vector<const Workunit*> fifo;
    for (const auto& [id, wu] : state.workunits) fifo.push_back(&wu);
    std::sort(fifo.begin(), fifo.end(),
              [](const Workunit* a, const Workunit* b) { return a->submit_seq < b->submit_seq; });

    std::map<std::string, FileId> held;
    for (const auto& f : request.inventory) held.emplace(f.name, f);
    auto digest_ok = [&](const FileId& f) {
        auto cat = state.file_catalog.find(f.name);
        return cat == state.file_catalog.end() || cat->second.digest == f.digest;
    };
    auto covered = [&](const Workunit& wu) {
        for (const auto& name : wu.required_inputs) {
            auto it = held.find(name);
            if (it == held.end() || !digest_ok(it->second)) return false;
        }
        return true;
    };
    // Coverage by any registered client, with the requester's inventory as
    // freshly declared in this request. A covered workunit never goes the
    // get-input route: some client has the file.
    auto covered_by_any = [&](const Workunit& wu) {
        if (covered(wu)) return true;
        for (const auto& [cid, client] : state.clients) {
            if (cid == request.client_id) continue;
            bool all = true;
            for (const auto& name : wu.required_inputs) {
                auto it = client.inventory.find(name);
                if (it == client.inventory.end() || !digest_ok(it->second)) {
                    all = false;
                    break;
                }
            }
            if (all) return true;
        }
        return false;
    };
    auto feasible = [&](const std::string& app_id) {
        auto it = state.apps.find(app_id);
        if (it == state.apps.end()) return false;
        return request.memory_mb >= it->second.min_memory_mb &&
               request.disk_mb >= it->second.min_disk_mb;
    };

    for (const Workunit* wu : fifo) {
        if (wu->state != WuState::READY && wu->state != WuState::WAITING_FOR_DATA) continue;
        auto res = state.reservations.find(wu->wu_id);
        if (res != state.reservations.end() && res->second != request.client_id) continue;
        if (!feasible(wu->app_id)) continue;
        if (!covered(*wu)) continue;
        return {WorkReplyKind::ASSIGNMENT, wu->wu_id};
    }
    for (const Workunit* wu : fifo) {
        if (wu->state != WuState::WAITING_FOR_DATA) continue;
        if (wu->get_input_app.empty()) continue;
        if (state.get_input_grants.count(wu->wu_id)) continue;
        if (state.reservations.count(wu->wu_id)) continue;
        bool expired = wu->get_input_ready;
        auto timer = state.wait_timers.find(wu->wu_id);
        if (!expired && timer != state.wait_timers.end() && state.now > timer->second)
            expired = true;
        if (!expired) continue;
        if (covered_by_any(*wu)) continue; // a known holder beats a fetch
        if (!feasible(wu->get_input_app)) continue;
        return {WorkReplyKind::GET_INPUT_ASSIGNMENT, wu->wu_id};
    }
    return {WorkReplyKind::NO_WORK, ""};
}

// Instance comparison: run the production scheduler on a copy and demand
// exact agreement with the oracle verdict.
bool agree(const Instance& instance, std::string* diag) {
    OracleVerdict expected = oracle_decide(instance.state, instance.request);
    SchedulerState copy = instance.state;
    WorkReply actual = handle_work_request(copy, instance.request);
    if (actual.kind != expected.kind ||
        (expected.kind != WorkReplyKind::NO_WORK && actual.wu_id != expected.wu_id)) {
        std::ostringstream os;
        os << "oracle " << work_reply_kind_name(expected.kind) << "/" << expected.wu_id
           << " vs scheduler " << work_reply_kind_name(actual.kind) << "/" << actual.wu_id;
        *diag = os.str();
        return false;
    }
    return true;
}

Instance random_instance(std::mt19937_64& rng, int max_clients, int max_wus, int max_files) {
    Instance instance;
    SchedulerState& state = instance.state;
    state = instance_base();

    int n_files = 1 + static_cast<int>(rng() % max_files);
    std::vector<std::string> files;
    for (int i = 0; i < n_files; ++i) files.push_back("f" + std::to_string(i) + ".dat");

    // Authoritative digests for a random subset of the names.
    for (const auto& name : files) {
        if (rng() % 2) state.file_catalog[name] = FileId{name, fake_digest(name), 64};
    }

    int n_clients = 1 + static_cast<int>(rng() % max_clients);
    std::vector<std::string> clients;
    for (int i = 0; i < n_clients; ++i) {
        ClientRecord c;
        c.client_id = "c" + std::to_string(i);
        c.user_id = "u" + std::to_string(i);
        c.memory_mb = rng() % 2 ? 4096 : 1024;
        c.disk_mb = 4096;
        for (const auto& name : files) {
            switch (rng() % 3) {
                case 0: break; // absent
                case 1: c.inventory[name] = FileId{name, fake_digest(name), 64}; break;
                default:
                    c.inventory[name] = FileId{name, fake_digest(name + "#forged"), 64};
                    break;
            }
        }
        clients.push_back(c.client_id);
        state.clients[c.client_id] = std::move(c);
    }

    // A permanently unfinished workunit to block PENDING ones on.
    Workunit blocker;
    blocker.wu_id = "blocker";
    blocker.app_id = "app";
    blocker.env_id = "env";
    blocker.output_template = FileTemplate{"blocker.out"};
    blocker.submit_seq = 1000;
    blocker.state = WuState::ASSIGNED;
    state.workunits["blocker"] = blocker;

    int n_wus = 1 + static_cast<int>(rng() % max_wus);
    for (int i = 0; i < n_wus; ++i) {
        Workunit wu;
        wu.wu_id = "w" + std::to_string(i);
        wu.app_id = rng() % 4 == 0 ? "app-big" : "app";
        wu.env_id = "env";
        for (const auto& name : files) {
            if (rng() % 2) wu.required_inputs.push_back(name);
        }
        wu.output_template = FileTemplate{wu.wu_id + ".out"};
        wu.max_result_size_bytes = 1 << 20;
        wu.deadline_secs = 30;
        wu.submit_seq = static_cast<std::uint64_t>(i + 1);
        if (rng() % 2) wu.get_input_app = "fetcher";
        apply_code(state, wu, kWuCodes[rng() % 8]);
        // Grants always belong to a non-requesting client; the requester's
        // own grants are completed through the work request itself.
        if (wu.state == WuState::WAITING_FOR_DATA && rng() % 5 == 0) {
            state.wait_timers.erase(wu.wu_id);
            wu.get_input_ready = false;
            state.get_input_grants[wu.wu_id] = GetInputGrant{"other", "g1", state.now + 10};
        }
        state.workunits[wu.wu_id] = std::move(wu);
    }

    const ClientRecord& requester = state.clients.at(clients[rng() % clients.size()]);
    instance.request.client_id = requester.client_id;
    instance.request.cpu_count = 1;
    instance.request.benchmark_gflops = 1;
    instance.request.memory_mb = requester.memory_mb;
    instance.request.disk_mb = requester.disk_mb;
    for (const auto& [name, f] : requester.inventory) instance.request.inventory.push_back(f);
    return instance;
}

// ===========================================================================

void criterion_1_locality() {
    double start = wall_now();
    std::mt19937_64 rng(20250810);
    int assignments = 0;
    int violations = 0;
    const int kCases = 10000;
    for (int i = 0; i < kCases; ++i) {
        Instance instance = random_instance(rng, 4, 6, 4);
        SchedulerState copy = instance.state;
        WorkReply reply = handle_work_request(copy, instance.request);
        if (reply.kind != WorkReplyKind::ASSIGNMENT) continue;
        ++assignments;
        std::set<std::string> held;
        for (const auto& f : instance.request.inventory) held.insert(f.name);
        for (const auto& input : copy.workunits.at(reply.wu_id).required_inputs) {
            if (!held.count(input)) ++violations;
        }
        for (const auto& entry : reply.manifest) {
            if (held.count(entry.file.name) &&
                std::find(copy.workunits.at(reply.wu_id).required_inputs.begin(),
                          copy.workunits.at(reply.wu_id).required_inputs.end(),
                          entry.file.name) !=
                    copy.workunits.at(reply.wu_id).required_inputs.end())
                ++violations; // manifest listed a required input
        }
    }
    double elapsed = wall_now() - start;
    std::ostringstream os;
    os << kCases << " generated states, " << assignments << " assignments, " << violations
       << " violations, " << elapsed << "s";
    report(1, "locality theorem", violations == 0 && assignments > 1000 && elapsed < 60,
           os.str());
}

void criterion_2_oracle() {
    double start = wall_now();
    std::uint64_t checked = 0;
    std::uint64_t disagreements = 0;
    std::string first_diag;

    // Exhaustive sweep: 2 workunits x 2 files, every input subset, every
    // state code, get-input on/off, every requester inventory shape and
    // catalog subset.
    const std::vector<std::string> files{"f0.dat", "f1.dat"};
    for (int catalog_mask = 0; catalog_mask < 4; ++catalog_mask) {
        for (int inv0 = 0; inv0 < 3; ++inv0) {
            for (int inv1 = 0; inv1 < 3; ++inv1) {
                for (int in_a = 0; in_a < 4; ++in_a)
                    for (int code_a = 0; code_a < 8; ++code_a)
                        for (int gi_a = 0; gi_a < 2; ++gi_a)
                            for (int in_b = 0; in_b < 4; ++in_b)
                                for (int code_b = 0; code_b < 8; ++code_b)
                                    for (int gi_b = 0; gi_b < 2; ++gi_b) {
                                        Instance instance;
                                        SchedulerState& state = instance.state;
                                        state = instance_base();
                                        for (int f = 0; f < 2; ++f) {
                                            if (catalog_mask & (1 << f))
                                                state.file_catalog[files[f]] = FileId{
                                                    files[f], fake_digest(files[f]), 64};
                                        }
                                        ClientRecord requester;
                                        requester.client_id = "c0";
                                        requester.user_id = "u";
                                        requester.memory_mb = 4096;
                                        requester.disk_mb = 4096;
                                        auto add_inv = [&](int shape, const std::string& n) {
                                            if (shape == 1)
                                                requester.inventory[n] =
                                                    FileId{n, fake_digest(n), 64};
                                            if (shape == 2)
                                                requester.inventory[n] =
                                                    FileId{n, fake_digest(n + "#forged"), 64};
                                        };
                                        add_inv(inv0, files[0]);
                                        add_inv(inv1, files[1]);
                                        ClientRecord other = requester;
                                        other.client_id = "other";
                                        state.clients["c0"] = requester;
                                        state.clients["other"] = other;

                                        Workunit blocker;
                                        blocker.wu_id = "blocker";
                                        blocker.app_id = "app";
                                        blocker.env_id = "env";
                                        blocker.output_template = FileTemplate{"b.out"};
                                        blocker.submit_seq = 1000;
                                        blocker.state = WuState::ASSIGNED;
                                        state.workunits["blocker"] = blocker;

                                        auto mk = [&](const std::string& id, int mask,
                                                      int code, bool gi, std::uint64_t seq) {
                                            Workunit wu;
                                            wu.wu_id = id;
                                            wu.app_id = "app";
                                            wu.env_id = "env";
                                            for (int f = 0; f < 2; ++f)
                                                if (mask & (1 << f))
                                                    wu.required_inputs.push_back(files[f]);
                                            wu.output_template = FileTemplate{id + ".out"};
                                            wu.max_result_size_bytes = 1;
                                            wu.deadline_secs = 30;
                                            wu.submit_seq = seq;
                                            if (gi) wu.get_input_app = "fetcher";
                                            apply_code(state, wu, kWuCodes[code]);
                                            state.workunits[id] = std::move(wu);
                                        };
                                        mk("wa", in_a, code_a, gi_a == 1, 1);
                                        mk("wb", in_b, code_b, gi_b == 1, 2);

                                        instance.request.client_id = "c0";
                                        instance.request.cpu_count = 1;
                                        instance.request.benchmark_gflops = 1;
                                        instance.request.memory_mb = 4096;
                                        instance.request.disk_mb = 4096;
                                        for (const auto& [n, f] : requester.inventory)
                                            instance.request.inventory.push_back(f);

                                        ++checked;
                                        std::string diag;
                                        if (!agree(instance, &diag)) {
                                            if (disagreements == 0) first_diag = diag;
                                            ++disagreements;
                                        }
                                    }
            }
        }
    }
    std::uint64_t exhaustive = checked;

    // Randomized sweep at the full bounds.
    std::mt19937_64 rng(424242);
    for (int i = 0; i < 30000; ++i) {
        Instance instance = random_instance(rng, 4, 5, 4);
        ++checked;
        std::string diag;
        if (!agree(instance, &diag)) {
            if (disagreements == 0) first_diag = diag;
            ++disagreements;
        }
    }

    double elapsed = wall_now() - start;
    std::ostringstream os;
    os << exhaustive << " exhaustive + 30000 randomized instances (<=4 clients, <=5 "
          "workunits, <=4 files), "
       << disagreements << " disagreements, " << elapsed << "s";
    if (disagreements > 0) os << "; first: " << first_diag;
    report(2, "scheduler equals brute-force matcher", disagreements == 0 && elapsed < 300,
           os.str());
}

void criterion_3_zero_input_movement() {
    bool ok = true;
    std::ostringstream os;
    for (std::uint64_t e : {100ull, 1000ull}) {
        for (std::uint32_t n : {1u, 2u, 4u, 8u}) {
            SimConfig c;
            c.events = e;
            c.n_clients = n;
            c.mode = SimMode::STRICT;
            SimReport r = simulate(c);
            bool this_ok = r.completed == 31 && r.bytes_moved_input == 0 &&
                           r.locality_fraction == 1.0;
            if (!this_ok) {
                ok = false;
                os << " e=" << e << ",n=" << n << " bytes_in=" << r.bytes_moved_input
                   << " locality=" << r.locality_fraction;
            }
        }
    }
    if (ok) os << "bytes_moved_input=0 and locality_fraction=1.0 for all n in {1,2,4,8}, "
                  "both event groups";
    report(3, "zero input movement under strict locality", ok, os.str());
}

SimReport replicate_run(std::uint64_t events, std::uint32_t clients) {
    SimConfig c;
    c.events = events;
    c.n_clients = clients;
    c.mode = SimMode::REPLICATE;
    return simulate(c);
}

void criterion_4_group_a() {
    SimReport n8 = replicate_run(100, 8);
    SimReport n2 = replicate_run(100, 2);
    double ratio = n8.makespan_secs / n8.baseline_secs;
    bool ok = ratio >= 0.35 && ratio <= 0.65 && n2.makespan_secs > n2.baseline_secs;
    std::ostringstream os;
    os << "e=100: makespan(8)/baseline=" << ratio << " (want [0.35,0.65]), makespan(2)="
       << n2.makespan_secs << " vs baseline=" << n2.baseline_secs << " (want >)";
    report(4, "group A trend", ok, os.str());
}

void criterion_5_group_b() {
    SimReport n2 = replicate_run(1000, 2);
    SimReport n8 = replicate_run(1000, 8);
    bool ok = n2.makespan_secs < n2.baseline_secs && n8.makespan_secs < n2.makespan_secs;
    std::ostringstream os;
    os << "e=1000: makespan(2)=" << n2.makespan_secs << " < baseline=" << n2.baseline_secs
       << ", makespan(8)=" << n8.makespan_secs << " < makespan(2)";
    report(5, "group B trend", ok, os.str());
}

// --- shared fixtures for the process-based criteria ---------------------------

struct StubSet {
    fs::path dir;

    void write_pipeline_stubs() const {
        spit(dir / "gen.sh",
             "#!/bin/sh\n"
             ". ./stage.conf\n"
             "i=0\n"
             "while [ $i -lt 10 ]; do\n"
             "  printf 'gen part=%s events=%s\\n' \"$i\" \"$EVENTS\" > \"gen.part$i.dat\"\n"
             "  i=$((i+1))\n"
             "done\n");
        const char* chain[][2] = {{"sim", "gen"}, {"digi", "sim"}, {"reco", "digi"}};
        for (const auto& stage : chain) {
            std::string out = stage[0];
            std::string in = stage[1];
            spit(dir / (out + ".sh"),
                 "#!/bin/sh\n"
                 ". ./stage.conf\n"
                 "for f in " + in + ".part*.dat; do\n"
                 "  [ -e \"$f\" ] || exit 1\n"
                 "  i=${f#" + in + ".part}\n"
                 "  i=${i%.dat}\n"
                 "  { printf '" + out + " part=%s events=%s\\n' \"$i\" \"$EVENTS\";"
                 " cat \"$f\"; } > \"" + out + ".part$i.dat\"\n"
                 "done\n");
        }
        spit(dir / "conf_default.conf", "EVENTS=10\n");
        spit(dir / "conf_full.conf", "EVENTS=100\n");
    }

    std::string pipeline_manifest() const {
        return R"({
  "apps": [
    {"app_id": "gen-app",  "files": [{"path": "gen.sh",  "entry": true}]},
    {"app_id": "sim-app",  "files": [{"path": "sim.sh",  "entry": true}]},
    {"app_id": "digi-app", "files": [{"path": "digi.sh", "entry": true}]},
    {"app_id": "reco-app", "files": [{"path": "reco.sh", "entry": true}]}
  ],
  "stages": [
    {"name": "generation", "app": "gen-app", "count": 1, "inputs": [],
     "output": "gen.part{index}.dat",
     "env": [{"path": "conf_full.conf", "name": "stage.conf"}],
     "deadline_secs": 60, "max_retries": 3},
    {"name": "simulation", "app": "sim-app", "count": 10,
     "inputs": ["gen.part{index}.dat"], "output": "sim.part{index}.dat",
     "env": [{"path": "conf_default.conf", "name": "stage.conf"}],
     "patch": [{"path": "conf_full.conf", "name": "stage.conf"}],
     "predecessors": ["generation"], "deadline_secs": 60, "max_retries": 3},
    {"name": "digitization", "app": "digi-app", "count": 10,
     "inputs": ["sim.part{index}.dat"], "output": "digi.part{index}.dat",
     "env": [{"path": "conf_full.conf", "name": "stage.conf"}],
     "predecessors": ["simulation"], "deadline_secs": 60, "max_retries": 3},
    {"name": "reconstruction", "app": "reco-app", "count": 10,
     "inputs": ["digi.part{index}.dat"], "output": "reco.part{index}.dat",
     "env": [{"path": "conf_full.conf", "name": "stage.conf"}],
     "predecessors": ["digitization"], "deadline_secs": 60, "max_retries": 3}
  ]
})";
    }
};

struct Cluster {
    fs::path root;
    std::string name;
    Proc server;
    std::vector<Proc> workers;
    std::string addr;
    std::uint16_t fixed_port = 0;

    fs::path keypair() const { return root / "project.key"; }
    fs::path pubkey() const { return root / "project.key.pub"; }
    fs::path server_dir() const { return root / "server-data"; }

    bool keygen() {
        Proc p = spawn({g_cli, "keygen", "--out", keypair().string()}, root / "keygen.log");
        return p.wait_exit() == 0;
    }

    bool start_server(double wait_window, double tick = 0.2, double backoff = 0.2) {
        std::string listen = "127.0.0.1:" + std::to_string(fixed_port);
        server = spawn({g_cli, "server", "--listen", listen, "--data-dir",
                        server_dir().string(), "--keypair", keypair().string(),
                        "--tick-secs", std::to_string(tick), "--backoff-secs",
                        std::to_string(backoff), "--wait-window-secs",
                        std::to_string(wait_window)},
                       root / ("server-" + std::to_string(::time(nullptr)) + ".log"));
        addr = wait_for_server(server);
        return !addr.empty();
    }

    Proc& start_worker(int i, const std::string& user) {
        fs::path data = root / ("w" + std::to_string(i)) / "data";
        fs::path work = root / ("w" + std::to_string(i)) / "work";
        fs::create_directories(data);
        workers.push_back(spawn({g_cli, "worker", "--server", addr, "--data-dir",
                                 data.string(), "--work-dir", work.string(),
                                 "--project-key", pubkey().string(), "--user", user},
                                root / ("worker" + std::to_string(i) + ".log")));
        return workers.back();
    }

    std::string submit(const fs::path& manifest) {
        Proc p = spawn({g_cli, "submit", "--server", addr, "--manifest", manifest.string(),
                        "--keypair", keypair().string()},
                       root / "submit.log");
        if (p.wait_exit() != 0) return "";
        std::string log = slurp(root / "submit.log");
        auto pos = log.rfind("job job"); // the log accumulates across submits
        if (pos == std::string::npos) return "";
        auto end = log.find(' ', pos + 4);
        return log.substr(pos + 4, end - pos - 4);
    }

    void teardown() {
        for (auto& w : workers) w.kill_now();
        workers.clear();
        server.kill_now();
    }
};

// Criterion 6 shares its archives with criterion 10's determinism check.
Bytes g_fetch_once, g_fetch_twice;

void criterion_6_end_to_end() {
    double start = wall_now();
    Cluster cluster;
    cluster.root = g_root / "e2e";
    cluster.fixed_port = pick_free_port();
    fs::create_directories(cluster.root);
    StubSet stubs{cluster.root / "fixture"};
    stubs.write_pipeline_stubs();
    spit(stubs.dir / "pipeline.json", stubs.pipeline_manifest());

    std::string detail;
    bool ok = false;
    do {
        if (!cluster.keygen()) { detail = "keygen failed"; break; }
        if (!cluster.start_server(/*wait_window=*/30)) { detail = "server did not start"; break; }
        for (int i = 1; i <= 3; ++i) cluster.start_worker(i, "user" + std::to_string(i));
        std::string job = cluster.submit(stubs.dir / "pipeline.json");
        if (job.empty()) { detail = "submit failed: " + slurp(cluster.root / "submit.log"); break; }

        if (!wait_status(cluster.addr, 90, [](const StatusReply& s) {
                return count_state(s, "DONE") == 31;
            })) {
            StatusReply s = status_of(cluster.addr);
            std::ostringstream os;
            os << "pipeline stalled:";
            for (const auto& [state, count] : s.state_counts)
                if (count) os << " " << state << "=" << count;
            detail = os.str();
            break;
        }

        // Fetch through the CLI, then twice more over the wire for the
        // determinism criterion.
        fs::path archive_path = cluster.root / "job.lfar";
        Proc fetch = spawn({g_cli, "fetch", "--server", cluster.addr, "--job", job, "--out",
                            archive_path.string()},
                           cluster.root / "fetch.log");
        if (fetch.wait_exit() != 0) { detail = "cli fetch failed"; break; }

        Bytes archive = read_file_bytes(archive_path);
        std::vector<ArchiveEntry> entries = parse_archive(archive); // digest-verified
        int reco = 0;
        bool patched_events_seen = false;
        for (const auto& e : entries) {
            if (e.file.name.rfind("reco.part", 0) == 0) ++reco;
            if (e.file.name == "sim.part0.dat") {
                std::string text(e.data.begin(), e.data.end());
                patched_events_seen = text.find("events=100") != std::string::npos;
            }
        }
        if (reco != 10) { detail = "archive has " + std::to_string(reco) + " reco outputs"; break; }
        if (!patched_events_seen) { detail = "patch overlay did not reach the stage"; break; }

        Message f1 = rpc(cluster.addr, FetchRequest{job});
        Message f2 = rpc(cluster.addr, FetchRequest{job});
        if (!std::holds_alternative<FetchReply>(f1) || !std::holds_alternative<FetchReply>(f2)) {
            detail = "wire fetch failed";
            break;
        }
        g_fetch_once = std::get<FetchReply>(f1).archive;
        g_fetch_twice = std::get<FetchReply>(f2).archive;

        // Identical resubmission: blobs deduplicate by digest, workunits are new.
        std::size_t blobs_before =
            std::distance(fs::directory_iterator(cluster.server_dir() / "blobs"),
                          fs::directory_iterator{});
        std::string job2 = cluster.submit(stubs.dir / "pipeline.json");
        std::size_t blobs_after =
            std::distance(fs::directory_iterator(cluster.server_dir() / "blobs"),
                          fs::directory_iterator{});
        if (job2.empty() || job2 == job) { detail = "resubmission did not create a new job"; break; }
        if (blobs_after != blobs_before) { detail = "identical blobs were not deduplicated"; break; }

        // Audit the transfer logs: no pipeline data file was ever downloaded.
        bool leaked = false;
        for (int i = 1; i <= 3; ++i) {
            std::istringstream log(
                slurp(cluster.root / ("w" + std::to_string(i)) / "work" / "transfer.log"));
            std::string direction, purpose, name, bytes, at;
            while (log >> direction >> purpose >> name >> bytes >> at) {
                if (direction == "down" && name.find(".part") != std::string::npos)
                    leaked = true;
            }
        }
        if (leaked) { detail = "an input partition crossed the wire"; break; }

        double elapsed = wall_now() - start;
        std::ostringstream os;
        os << "31/31 DONE on 3 workers, archive " << archive.size() << " bytes with " << reco
           << " reconstruction outputs, digests verified, no input downloads, " << elapsed
           << "s";
        detail = os.str();
        ok = elapsed < 120;
    } while (false);

    cluster.teardown();
    report(6, "end-to-end loopback pipeline", ok, detail);
}

void criterion_7_get_input_fallback() {
    std::string detail;
    bool ok_with = false, ok_without = false;

    // (a) nobody has seed.dat, the get-input stub makes it.
    {
        Cluster cluster;
        cluster.root = g_root / "getinput-a";
        cluster.fixed_port = pick_free_port();
        fs::create_directories(cluster.root);
        fs::path fixture = cluster.root / "fixture";
        spit(fixture / "consume.sh",
             "#!/bin/sh\n[ -e seed.dat ] || exit 1\ncat seed.dat > out.dat\n");
        spit(fixture / "fetch.sh",
             "#!/bin/sh\nprintf 'seeded-content' > \"$LOCFLOW_DATA_DIR/seed.dat\"\n");
        spit(fixture / "job.json", R"({
  "apps": [
    {"app_id": "consume-app", "files": [{"path": "consume.sh", "entry": true}]},
    {"app_id": "fetch-app",   "files": [{"path": "fetch.sh",   "entry": true}]}
  ],
  "stages": [
    {"name": "consume", "app": "consume-app", "count": 1, "inputs": ["seed.dat"],
     "output": "out.dat", "get_input_app": "fetch-app",
     "deadline_secs": 30, "max_retries": 3}
  ]
})");
        do {
            if (!cluster.keygen() || !cluster.start_server(/*wait_window=*/1)) {
                detail = "setup failed";
                break;
            }
            cluster.start_worker(1, "alice");
            std::string job = cluster.submit(fixture / "job.json");
            if (job.empty()) { detail = "submit failed"; break; }
            ok_with = wait_status(cluster.addr, 45, [](const StatusReply& s) {
                return count_state(s, "DONE") == 1;
            });
            if (!ok_with) detail = "workunit never finished via get-input";
        } while (false);
        cluster.teardown();
    }

    // (b) same input, no get-input application: FAILED after the window.
    if (ok_with) {
        Cluster cluster;
        cluster.root = g_root / "getinput-b";
        cluster.fixed_port = pick_free_port();
        fs::create_directories(cluster.root);
        fs::path fixture = cluster.root / "fixture";
        spit(fixture / "consume.sh", "#!/bin/sh\ncat seed.dat > out.dat\n");
        spit(fixture / "job.json", R"({
  "apps": [
    {"app_id": "consume-app", "files": [{"path": "consume.sh", "entry": true}]}
  ],
  "stages": [
    {"name": "consume", "app": "consume-app", "count": 1, "inputs": ["seed.dat"],
     "output": "out.dat", "deadline_secs": 30, "max_retries": 3}
  ]
})");
        do {
            if (!cluster.keygen() || !cluster.start_server(/*wait_window=*/1)) {
                detail = "setup failed (b)";
                break;
            }
            cluster.start_worker(1, "alice");
            std::string job = cluster.submit(fixture / "job.json");
            if (job.empty()) { detail = "submit failed (b)"; break; }
            ok_without = wait_status(cluster.addr, 30, [](const StatusReply& s) {
                return count_state(s, "FAILED") == 1;
            });
            if (!ok_without) detail = "workunit without get-input did not fail";
        } while (false);
        cluster.teardown();
    }

    bool ok = ok_with && ok_without;
    if (ok)
        detail = "missing input fetched via get-input and completed; without the "
                 "get-input application the workunit FAILED after the wait window";
    report(7, "get-input fallback", ok, detail);
}

void criterion_8_fault_tolerance() {
    std::string detail;
    bool worker_kill_ok = false, server_restart_ok = false;

    // (a) kill the executing worker; the replica holder finishes the job.
    {
        Cluster cluster;
        cluster.root = g_root / "faults-worker";
        cluster.fixed_port = pick_free_port();
        fs::create_directories(cluster.root);
        fs::path fixture = cluster.root / "fixture";
        spit(fixture / "slow.sh", "#!/bin/sh\nsleep 2\ncat task.in > out.dat\n");
        spit(fixture / "job.json", R"({
  "apps": [
    {"app_id": "slow-app", "files": [{"path": "slow.sh", "entry": true}]}
  ],
  "stages": [
    {"name": "crunch", "app": "slow-app", "count": 1, "inputs": ["task.in"],
     "output": "out.dat", "deadline_secs": 4, "max_retries": 2}
  ]
})");
        do {
            if (!cluster.keygen() || !cluster.start_server(/*wait_window=*/60)) {
                detail = "setup failed";
                break;
            }
            // Replicated input data on both workers.
            fs::create_directories(cluster.root / "w1" / "data");
            fs::create_directories(cluster.root / "w2" / "data");
            spit(cluster.root / "w1" / "data" / "task.in", "replicated payload");
            spit(cluster.root / "w2" / "data" / "task.in", "replicated payload");

            cluster.start_worker(1, "alice");
            if (!wait_status(cluster.addr, 20,
                             [](const StatusReply& s) { return s.clients.size() == 1; })) {
                detail = "first worker never registered";
                break;
            }
            std::string first_client = status_of(cluster.addr).clients[0].client_id;
            cluster.start_worker(2, "bob");
            if (!wait_status(cluster.addr, 20,
                             [](const StatusReply& s) { return s.clients.size() == 2; })) {
                detail = "second worker never registered";
                break;
            }

            std::string job = cluster.submit(fixture / "job.json");
            if (job.empty()) { detail = "submit failed"; break; }

            std::string assigned_client;
            if (!wait_status(cluster.addr, 20, [&](const StatusReply& s) {
                    for (const auto& r : s.results) {
                        if (r.state == "IN_PROGRESS") {
                            assigned_client = r.client_id;
                            return true;
                        }
                    }
                    return false;
                })) {
                detail = "no assignment observed";
                break;
            }
            // Kill the executing worker mid-task.
            Proc& victim = assigned_client == first_client ? cluster.workers[0]
                                                           : cluster.workers[1];
            victim.kill_now();

            bool finished = wait_status(cluster.addr, 45, [&](const StatusReply& s) {
                bool timed_out = false, done = false;
                for (const auto& r : s.results) {
                    if (r.state == "TIMEOUT" && r.client_id == assigned_client)
                        timed_out = true;
                    if (r.state == "SUCCESS" && r.client_id != assigned_client) done = true;
                }
                return timed_out && done && count_state(s, "DONE") == 1;
            });
            if (!finished) { detail = "workunit did not recover on the replica holder"; break; }
            worker_kill_ok = true;
        } while (false);
        cluster.teardown();
    }

    // (b) SIGKILL the server mid-pipeline; a restart on the same journal
    // finishes the run.
    if (worker_kill_ok) {
        Cluster cluster;
        cluster.root = g_root / "faults-server";
        cluster.fixed_port = pick_free_port();
        fs::create_directories(cluster.root);
        StubSet stubs{cluster.root / "fixture"};
        stubs.write_pipeline_stubs();
        spit(stubs.dir / "pipeline.json", stubs.pipeline_manifest());
        do {
            if (!cluster.keygen() || !cluster.start_server(/*wait_window=*/30)) {
                detail = "setup failed (server restart)";
                break;
            }
            cluster.start_worker(1, "alice");
            cluster.start_worker(2, "bob");
            std::string job = cluster.submit(stubs.dir / "pipeline.json");
            if (job.empty()) { detail = "submit failed (server restart)"; break; }

            if (!wait_status(cluster.addr, 60, [](const StatusReply& s) {
                    return count_state(s, "DONE") >= 5;
                })) {
                detail = "pipeline made no progress before the crash";
                break;
            }
            cluster.server.kill_now(); // SIGKILL, no goodbye
            sleep_secs(0.5);
            if (!cluster.start_server(/*wait_window=*/30)) {
                detail = "server did not come back";
                break;
            }
            if (!wait_status(cluster.addr, 90, [](const StatusReply& s) {
                    return count_state(s, "DONE") == 31;
                })) {
                StatusReply s = status_of(cluster.addr);
                std::ostringstream os;
                os << "pipeline stalled after restart:";
                for (const auto& [state, count] : s.state_counts)
                    if (count) os << " " << state << "=" << count;
                detail = os.str();
                break;
            }
            // No workunit may own two live results after the replay.
            StatusReply s = status_of(cluster.addr);
            std::map<std::string, int> live;
            for (const auto& r : s.results) {
                if (r.state == "IN_PROGRESS" || r.state == "UNSENT") live[r.wu_id]++;
            }
            bool dup = false;
            for (const auto& [wu, n] : live)
                if (n > 1) dup = true;
            if (dup) { detail = "duplicated live results after replay"; break; }
            server_restart_ok = true;
        } while (false);
        cluster.teardown();
    }

    bool ok = worker_kill_ok && server_restart_ok;
    if (ok)
        detail = "killed worker timed out and the replica holder completed the workunit; "
                 "killed+restarted server resumed from its journal and finished 31/31";
    report(8, "fault tolerance", ok, detail);
}

void criterion_9_security_gates() {
    std::string detail;
    bool ok = false;
    // In-process server instance exercised over real TCP.
    fs::path root = g_root / "security";
    fs::create_directories(root / "data");
    KeyPair keys = KeyPair::generate();
    keys.save((root / "project.key").string());

    ServerConfig config;
    config.data_dir = root / "data";
    config.keypair_path = root / "project.key";
    config.tick_secs = 1.0; // deadline sweeps are irrelevant here
    Server server(config);
    server.start();
    std::thread serve([&] { server.serve_forever(); });
    std::string addr = server.address();

    do {
        Bytes script{'#', '!', '/', 'b', 'i', 'n', '/', 's', 'h', '\n'};
        SubmitAppRequest app;
        app.spec.app_id = "gated-app";
        SignedFile f;
        f.file = file_id_of_bytes("run.sh", script);
        f.signature = sign_bytes(script, keys);
        f.entry = true;
        app.spec.files.push_back(f);
        app.blobs.push_back(BlobPayload{f.file.digest, script});

        // Tampered blob: flip one bit.
        SubmitAppRequest tampered = app;
        tampered.blobs[0].data[0] ^= 0x01;
        Message t_reply = rpc(addr, tampered);
        const auto* t_err = std::get_if<ErrorReply>(&t_reply);
        if (!t_err || t_err->code != "DigestMismatch") {
            detail = "tampered blob was not rejected";
            break;
        }

        // Signature from the wrong key.
        KeyPair interloper = KeyPair::generate();
        SubmitAppRequest forged = app;
        forged.spec.files[0].signature = sign_bytes(script, interloper);
        Message f_reply = rpc(addr, forged);
        const auto* f_err = std::get_if<ErrorReply>(&f_reply);
        if (!f_err || f_err->code != "BadSignature") {
            detail = "forged signature was not rejected";
            break;
        }

        // The genuine submission still lands.
        if (!std::holds_alternative<SubmitAppReply>(rpc(addr, app))) {
            detail = "valid app rejected";
            break;
        }

        // Oversize: limit 8 bytes, upload 9.
        SubmitJobRequest job;
        JobStage stage;
        stage.name = "tight";
        stage.app_id = "gated-app";
        stage.count = 1;
        stage.output_pattern = "out.dat";
        stage.max_result_size_bytes = 8;
        stage.deadline_secs = 60;
        stage.max_retries = 1;
        job.stages.push_back(stage);
        Message j_reply = rpc(addr, job);
        if (!std::holds_alternative<SubmitJobReply>(j_reply)) {
            detail = "job submit failed";
            break;
        }
        std::string wu_id = std::get<SubmitJobReply>(j_reply).wu_ids[0];

        RegisterRequest reg;
        reg.client.user_id = "mallory";
        reg.client.memory_mb = 1024;
        reg.client.disk_mb = 1024;
        std::string client_id = std::get<RegisterReply>(rpc(addr, reg)).client_id;

        auto request_work = [&]() {
            WorkRequest wr;
            wr.client_id = client_id;
            wr.memory_mb = 1024;
            wr.disk_mb = 1024;
            return std::get<WorkReply>(rpc(addr, wr));
        };
        auto upload_oversize = [&](const std::string& result_id) {
            ResultUpload upload;
            upload.result_id = result_id;
            upload.status = UploadStatus::SUCCESS;
            OutputPayload o;
            o.data = Bytes(9, 'x'); // limit + 1
            o.file = file_id_of_bytes("out.dat", o.data);
            upload.outputs.push_back(o);
            return std::get<UploadReply>(rpc(addr, upload));
        };

        WorkReply first = request_work();
        if (first.kind != WorkReplyKind::ASSIGNMENT) { detail = "no assignment"; break; }
        UploadReply first_verdict = upload_oversize(first.result_id);
        if (first_verdict.recorded_state != "OVERSIZE") {
            detail = "oversize result recorded as " + first_verdict.recorded_state;
            break;
        }
        // Retry was scheduled: the workunit is assignable again.
        WorkReply second = request_work();
        if (second.kind != WorkReplyKind::ASSIGNMENT || second.wu_id != wu_id) {
            detail = "oversize attempt was not retried";
            break;
        }
        upload_oversize(second.result_id); // retries exhausted
        StatusReply status = status_of(addr);
        if (count_state(status, "FAILED") != 1) {
            detail = "workunit not FAILED after exhausting retries";
            break;
        }
        ok = true;
        detail = "tampered blob => DigestMismatch, wrong key => BadSignature, oversize "
                 "result => OVERSIZE then retried, FAILED after retry budget";
    } while (false);

    server.stop();
    serve.join();
    report(9, "security gates", ok, detail);
}

void criterion_10_determinism() {
    SimConfig c;
    c.events = 100;
    c.n_clients = 8;
    c.mode = SimMode::REPLICATE;
    std::string csv1 = emit_report({simulate(c)});
    std::string csv2 = emit_report({simulate(c)});
    SimConfig g = c;
    g.mode = SimMode::GET_INPUT;
    std::string gcsv1 = emit_report({simulate(g)});
    std::string gcsv2 = emit_report({simulate(g)});

    bool sims_equal = csv1 == csv2 && gcsv1 == gcsv2;
    bool archives_equal = !g_fetch_once.empty() && g_fetch_once == g_fetch_twice;
    std::ostringstream os;
    os << "simulator double-runs byte-identical: " << (sims_equal ? "yes" : "NO")
       << "; aggregation double-fetch byte-identical: "
       << (archives_equal ? "yes" : "NO") << " (" << g_fetch_once.size() << " bytes)";
    report(10, "determinism", sims_equal && archives_equal, os.str());
}

} // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: acceptance <path-to-locflow-cli>\n";
        return 2;
    }
    g_cli = argv[1];
    g_root = fs::temp_directory_path() /
             ("locflow-acceptance-" + std::to_string(::getpid()));
    fs::create_directories(g_root);

    criterion_1_locality();
    criterion_2_oracle();
    criterion_3_zero_input_movement();
    criterion_4_group_a();
    criterion_5_group_b();
    criterion_6_end_to_end();
    criterion_7_get_input_fallback();
    criterion_8_fault_tolerance();
    criterion_9_security_gates();
    criterion_10_determinism();

    std::error_code ec;
    fs::remove_all(g_root, ec);
    if (g_failures == 0) {
        std::cout << "all acceptance criteria passed" << std::endl;
        return 0;
    }
    std::cout << g_failures << " acceptance criteria FAILED" << std::endl;
    return 1;
}
