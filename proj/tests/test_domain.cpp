#include <doctest.h>

#include <random>

#include "locflow/domain.hpp"

using namespace locflow;

namespace {

Workunit wu(const std::string& id, std::vector<std::string> preds) {
    Workunit w;
    w.wu_id = id;
    w.app_id = "app";
    w.env_id = "env";
    w.output_template = FileTemplate{"out.dat"};
    w.predecessors = std::move(preds);
    return w;
}

// Independent cycle oracle: transitive closure by Floyd-Warshall style
// relaxation; a cycle exists iff some node reaches itself.
bool has_cycle_oracle(int n, const std::vector<std::pair<int, int>>& edges) {
    std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
    for (auto [a, b] : edges) reach[a][b] = true;
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (reach[i][k] && reach[k][j]) reach[i][j] = true;
    for (int i = 0; i < n; ++i)
        if (reach[i][i]) return true;
    return false;
}

bool validator_accepts(int n, const std::vector<std::pair<int, int>>& edges) {
    std::vector<Workunit> wus;
    for (int i = 0; i < n; ++i) wus.push_back(wu("n" + std::to_string(i), {}));
    for (auto [a, b] : edges) wus[a].predecessors.push_back("n" + std::to_string(b));
    try {
        validate_workunit_set(wus);
        return true;
    } catch (const Error& e) {
        REQUIRE(e.code() == ErrorCode::CycleDetected);
        return false;
    }
}

} // namespace

TEST_CASE("file names") {
    CHECK(valid_file_name("gen.part0.dat"));
    CHECK(valid_file_name("a"));
    CHECK_FALSE(valid_file_name(""));
    CHECK_FALSE(valid_file_name("a/b"));
    CHECK_FALSE(valid_file_name("a\\b"));
    CHECK_FALSE(valid_file_name(".hidden"));
    CHECK_FALSE(valid_file_name("."));
    CHECK_FALSE(valid_file_name(".."));
    CHECK_FALSE(valid_file_name("with space"));
    CHECK_FALSE(valid_file_name(std::string(256, 'x')));
    CHECK(valid_file_name(std::string(255, 'x')));
}

TEST_CASE("file id invariants") {
    FileId ok{"a.dat", std::string(64, 'a'), 3};
    CHECK_NOTHROW(validate_file_id(ok));

    FileId bad_digest{"a.dat", "abc", 3};
    CHECK_THROWS_AS(validate_file_id(bad_digest), Error);
    FileId upper{"a.dat", std::string(63, 'a') + "A", 3};
    CHECK_THROWS_AS(validate_file_id(upper), Error);

    Bytes content{'h', 'i'};
    FileId derived = file_id_of_bytes("hi.txt", content);
    CHECK(derived.size_bytes == 2);
    CHECK(derived.digest.size() == 64);
}

TEST_CASE("resolve_template substitutes every occurrence") {
    CHECK(resolve_template(FileTemplate{"gen.part{index}.dat"}, 3) == "gen.part3.dat");
    CHECK(resolve_template(FileTemplate{"fixed.dat"}, 7) == "fixed.dat");
    CHECK(resolve_template(FileTemplate{"{index}{index}.dat"}, 1) == "11.dat");
    CHECK(resolve_template(FileTemplate{"a{index}b{index}c"}, 42) == "a42b42c");
    // Resolving to an invalid name is an error, not a silent product.
    CHECK_THROWS_AS(resolve_template(FileTemplate{"bad/{index}"}, 0), Error);
    CHECK_THROWS_AS(resolve_template(FileTemplate{""}, 0), Error);
}

TEST_CASE("match_template inverts resolve") {
    FileTemplate t{"gen.part{index}.dat"};
    auto m = match_template(t, "gen.part7.dat");
    REQUIRE(m.has_value());
    CHECK(*m == 7);
    CHECK_FALSE(match_template(t, "gen.partx.dat").has_value());
    CHECK_FALSE(match_template(t, "gen.part.dat").has_value());
    CHECK_FALSE(match_template(t, "gen.part07.dat").has_value()); // canonical decimal only
    CHECK(match_template(t, "gen.part0.dat").has_value());

    FileTemplate twice{"{index}x{index}.d"};
    CHECK(match_template(twice, "3x3.d").has_value());
    CHECK_FALSE(match_template(twice, "3x4.d").has_value());

    FileTemplate fixed{"fixed.dat"};
    CHECK(match_template(fixed, "fixed.dat").has_value());
    CHECK_FALSE(match_template(fixed, "other.dat").has_value());

    std::mt19937_64 rng(7);
    for (int i = 0; i < 200; ++i) {
        std::uint64_t idx = rng() % 1000000;
        std::string name = resolve_template(t, idx);
        auto back = match_template(t, name);
        REQUIRE(back.has_value());
        CHECK(*back == idx);
    }
}

TEST_CASE("validate_workunit_set examples") {
    CHECK_NOTHROW(validate_workunit_set({})); // vacuous

    // chain: c depends on b, b depends on a
    CHECK_NOTHROW(validate_workunit_set({wu("a", {}), wu("b", {"a"}), wu("c", {"b"})}));

    try {
        validate_workunit_set({wu("a", {"b"}), wu("b", {"a"})});
        FAIL("2-cycle not detected");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::CycleDetected);
    }

    try {
        validate_workunit_set({wu("a", {"ghost"})});
        FAIL("dangling predecessor not detected");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DanglingPredecessor);
    }

    try {
        validate_workunit_set({wu("a", {"a"})});
        FAIL("self-cycle not detected");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::CycleDetected);
    }

    // duplicate required input names
    Workunit dup = wu("d", {});
    dup.required_inputs = {"x.dat", "x.dat"};
    CHECK_THROWS_AS(validate_workunit_set({dup}), Error);
}

TEST_CASE("DAG check agrees with reachability oracle, exhaustive n<=3") {
    for (int n = 1; n <= 3; ++n) {
        std::vector<std::pair<int, int>> all_edges;
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                if (a != b) all_edges.emplace_back(a, b);
        std::uint32_t combos = 1u << all_edges.size();
        for (std::uint32_t mask = 0; mask < combos; ++mask) {
            std::vector<std::pair<int, int>> edges;
            for (std::size_t i = 0; i < all_edges.size(); ++i)
                if (mask & (1u << i)) edges.push_back(all_edges[i]);
            CHECK(validator_accepts(n, edges) == !has_cycle_oracle(n, edges));
        }
    }
}

TEST_CASE("DAG check agrees with reachability oracle, random n<=6") {
    std::mt19937_64 rng(42);
    for (int round = 0; round < 3000; ++round) {
        int n = 2 + static_cast<int>(rng() % 5);
        std::vector<std::pair<int, int>> edges;
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                if (a != b && rng() % 3 == 0) edges.emplace_back(a, b);
        CHECK(validator_accepts(n, edges) == !has_cycle_oracle(n, edges));
    }
}

TEST_CASE("workunit state machine") {
    using S = WuState;
    auto allowed = [](S a, S b) { return wu_transition_allowed(a, b); };
    CHECK(allowed(S::PENDING, S::READY));
    CHECK(allowed(S::PENDING, S::WAITING_FOR_DATA));
    CHECK(allowed(S::WAITING_FOR_DATA, S::READY));
    CHECK(allowed(S::WAITING_FOR_DATA, S::FAILED));
    CHECK(allowed(S::READY, S::ASSIGNED));
    CHECK(allowed(S::ASSIGNED, S::DONE));
    CHECK(allowed(S::ASSIGNED, S::READY));
    CHECK(allowed(S::ASSIGNED, S::FAILED));
    CHECK(allowed(S::ASSIGNED, S::WAITING_FOR_DATA)); // holder lost after timeout

    CHECK_FALSE(allowed(S::PENDING, S::ASSIGNED));
    CHECK_FALSE(allowed(S::PENDING, S::DONE));
    CHECK(allowed(S::READY, S::WAITING_FOR_DATA)); // holder vanished
    CHECK_FALSE(allowed(S::READY, S::DONE));
    CHECK_FALSE(allowed(S::DONE, S::READY));
    CHECK_FALSE(allowed(S::DONE, S::FAILED));
    CHECK_FALSE(allowed(S::FAILED, S::READY));

    for (S s : {S::PENDING, S::WAITING_FOR_DATA, S::READY, S::ASSIGNED, S::DONE, S::FAILED}) {
        CHECK(wu_state_from_name(wu_state_name(s)) == s);
    }
}

TEST_CASE("result state machine") {
    using R = ResultState;
    CHECK(result_transition_allowed(R::UNSENT, R::IN_PROGRESS));
    for (R terminal : {R::SUCCESS, R::ERROR, R::TIMEOUT, R::OVERSIZE}) {
        CHECK(result_transition_allowed(R::IN_PROGRESS, terminal));
        CHECK(result_state_terminal(terminal));
        for (R next : {R::UNSENT, R::IN_PROGRESS, R::SUCCESS, R::ERROR, R::TIMEOUT,
                       R::OVERSIZE}) {
            CHECK_FALSE(result_transition_allowed(terminal, next));
        }
    }
    CHECK_FALSE(result_transition_allowed(R::UNSENT, R::SUCCESS));
    CHECK_FALSE(result_state_terminal(R::IN_PROGRESS));
}

TEST_CASE("transition trace validator") {
    std::vector<Transition> good{
        {Transition::Kind::WORKUNIT, "w", "PENDING", "READY", 0},
        {Transition::Kind::RESULT, "r", "UNSENT", "IN_PROGRESS", 0},
    };
    CHECK_NOTHROW(validate_transition_trace(good));
    std::vector<Transition> bad{{Transition::Kind::WORKUNIT, "w", "DONE", "READY", 0}};
    CHECK_THROWS_AS(validate_transition_trace(bad), Error);
}

TEST_CASE("credit ledger") {
    CreditLedger ledger;
    ledger.grant("alice", "phys", 200);
    ledger.grant("bob", "phys", 50);
    ledger.grant("alice", "phys", 0); // zero grant changes nothing
    CHECK(ledger.user_credit("alice") == doctest::Approx(200));
    CHECK(ledger.user_credit("bob") == doctest::Approx(50));
    CHECK(ledger.group_credit("phys") == doctest::Approx(250));
    CHECK(ledger.user_credit("nobody") == 0.0);
    ledger.grant("carol", "", 10); // no group
    CHECK(ledger.groups().count("") == 0);
    CHECK_THROWS_AS(ledger.grant("alice", "phys", -1), Error);
}

TEST_CASE("client record validation") {
    ClientRecord c;
    c.client_id = "c1";
    c.user_id = "u";
    c.benchmark_gflops = 2.0;
    FileId f{"a.dat", std::string(64, '0'), 1};
    c.inventory["a.dat"] = f;
    CHECK_NOTHROW(validate_client(c));

    c.inventory["wrong"] = f; // key does not match the contained name
    CHECK_THROWS_AS(validate_client(c), Error);
    c.inventory.erase("wrong");
    c.benchmark_gflops = 0;
    CHECK_THROWS_AS(validate_client(c), Error);
}

TEST_CASE("application validation needs exactly one signed entry") {
    KeyPair keys = KeyPair::generate();
    Bytes exe{'#', '!', '/', 'b', 'i', 'n', '/', 's', 'h', '\n'};
    ApplicationSpec app;
    app.app_id = "demo";
    SignedFile f;
    f.file = file_id_of_bytes("run.sh", exe);
    f.signature = sign_bytes(exe, keys);
    f.entry = true;
    app.files.push_back(f);
    CHECK_NOTHROW(validate_application(app, keys.public_key));

    SUBCASE("no entry flag") {
        app.files[0].entry = false;
        CHECK_THROWS_AS(validate_application(app, keys.public_key), Error);
    }
    SUBCASE("wrong key") {
        KeyPair other = KeyPair::generate();
        CHECK_THROWS_AS(validate_application(app, other.public_key), Error);
    }
    SUBCASE("no files") {
        app.files.clear();
        CHECK_THROWS_AS(validate_application(app, keys.public_key), Error);
    }
}

TEST_CASE("patch overlay names must be distinct") {
    FileId a{"opts.txt", std::string(64, '1'), 4};
    FileId b{"opts.txt", std::string(64, '2'), 4};
    Patch p{"p1", "env1", {a, b}};
    CHECK_THROWS_AS(validate_patch(p), Error);
    Patch ok{"p1", "env1", {a}};
    CHECK_NOTHROW(validate_patch(ok));
}
