#include "locflow/domain.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace locflow {

bool valid_file_name(const std::string& name) {
    if (name.empty() || name.size() > 255) return false;
    if (name == "." || name == "..") return false;
    if (name.front() == '.') return false; // hidden files never enter an inventory
    for (unsigned char c : name) {
        if (c <= 0x20 || c >= 0x7f) return false;
        if (c == '/' || c == '\\') return false;
    }
    return true;
}

void validate_file_id(const FileId& id) {
    if (!valid_file_name(id.name))
        throw Error(ErrorCode::InvalidName, "bad file name: '" + id.name + "'");
    if (!is_hex_digest(id.digest))
        throw Error(ErrorCode::InvalidName, "bad digest for " + id.name);
}

FileId file_id_of_bytes(const std::string& name, const Bytes& content) {
    FileId id{name, sha256_hex(content), content.size()};
    validate_file_id(id);
    return id;
}

// ---------------------------------------------------------------------------

namespace {

constexpr const char kIndexVar[] = "{index}";
constexpr std::size_t kIndexVarLen = sizeof(kIndexVar) - 1;

std::vector<std::string> split_on_index(const std::string& pattern) {
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (true) {
        std::size_t hit = pattern.find(kIndexVar, pos);
        if (hit == std::string::npos) {
            parts.push_back(pattern.substr(pos));
            return parts;
        }
        parts.push_back(pattern.substr(pos, hit - pos));
        pos = hit + kIndexVarLen;
    }
}

} // namespace

std::string resolve_template(const FileTemplate& t, std::uint64_t index) {
    std::vector<std::string> parts = split_on_index(t.pattern);
    std::string num = std::to_string(index);
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        out += parts[i];
        if (i + 1 < parts.size()) out += num;
    }
    if (!valid_file_name(out))
        throw Error(ErrorCode::InvalidName, "template '" + t.pattern +
                                                "' resolves to invalid name '" + out + "'");
    return out;
}

std::optional<std::uint64_t> match_template(const FileTemplate& t, const std::string& name) {
    std::vector<std::string> parts = split_on_index(t.pattern);
    if (parts.size() == 1) {
        if (parts[0] == name) return 0; // fixed name, index irrelevant
        return std::nullopt;
    }
    // The first gap fixes the index; every other occurrence must repeat it.
    if (name.size() < parts[0].size() || name.compare(0, parts[0].size(), parts[0]) != 0)
        return std::nullopt;
    std::size_t pos = parts[0].size();
    std::size_t digits_end = pos;
    while (digits_end < name.size() && name[digits_end] >= '0' && name[digits_end] <= '9')
        ++digits_end;
    if (digits_end == pos) return std::nullopt;
    // Canonical decimal only: resolve() never emits leading zeros.
    std::string num = name.substr(pos, digits_end - pos);
    if (num.size() > 1 && num[0] == '0') return std::nullopt;
    if (num.size() > 20) return std::nullopt;
    std::uint64_t index = 0;
    try {
        index = std::stoull(num);
    } catch (const std::exception&) {
        return std::nullopt;
    }
    try {
        if (resolve_template(t, index) == name) return index;
    } catch (const Error&) {
        return std::nullopt;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------

void validate_application(const ApplicationSpec& app, const Bytes& project_public_key) {
    if (app.app_id.empty()) throw Error(ErrorCode::InvalidName, "empty app_id");
    if (app.version < 1) throw Error(ErrorCode::BadConfig, "app version must be >= 1");
    if (app.files.empty())
        throw Error(ErrorCode::BadConfig, "application " + app.app_id + " has no files");
    int entries = 0;
    std::set<std::string> names;
    for (const auto& f : app.files) {
        validate_file_id(f.file);
        if (!names.insert(f.file.name).second)
            throw Error(ErrorCode::InvalidName, "duplicate app file " + f.file.name);
        if (f.entry) ++entries;
        if (!verify_digest_signature(from_hex(f.file.digest), f.signature, project_public_key))
            throw Error(ErrorCode::BadSignature,
                        "signature of " + f.file.name + " does not verify");
    }
    if (entries != 1)
        throw Error(ErrorCode::BadConfig,
                    "application " + app.app_id + " must flag exactly one entry executable");
}

void validate_environment(const EnvironmentBundle& env) {
    if (env.env_id.empty()) throw Error(ErrorCode::InvalidName, "empty env_id");
    std::set<std::string> names;
    for (const auto& f : env.files) {
        validate_file_id(f);
        if (!names.insert(f.name).second)
            throw Error(ErrorCode::InvalidName,
                        "duplicate file " + f.name + " in environment " + env.env_id);
    }
}

void validate_patch(const Patch& patch) {
    if (patch.patch_id.empty()) throw Error(ErrorCode::InvalidName, "empty patch_id");
    std::set<std::string> names;
    for (const auto& f : patch.overlay_files) {
        validate_file_id(f);
        if (!names.insert(f.name).second)
            throw Error(ErrorCode::InvalidName,
                        "duplicate overlay file " + f.name + " in patch " + patch.patch_id);
    }
}

// ---------------------------------------------------------------------------

const char* wu_state_name(WuState s) {
    switch (s) {
        case WuState::PENDING: return "PENDING";
        case WuState::WAITING_FOR_DATA: return "WAITING_FOR_DATA";
        case WuState::READY: return "READY";
        case WuState::ASSIGNED: return "ASSIGNED";
        case WuState::DONE: return "DONE";
        case WuState::FAILED: return "FAILED";
    }
    return "?";
}

WuState wu_state_from_name(const std::string& name) {
    for (WuState s : {WuState::PENDING, WuState::WAITING_FOR_DATA, WuState::READY,
                      WuState::ASSIGNED, WuState::DONE, WuState::FAILED}) {
        if (name == wu_state_name(s)) return s;
    }
    throw Error(ErrorCode::MalformedMessage, "unknown workunit state " + name);
}

bool wu_transition_allowed(WuState from, WuState to) {
    switch (from) {
        case WuState::PENDING:
            return to == WuState::WAITING_FOR_DATA || to == WuState::READY;
        case WuState::WAITING_FOR_DATA:
            return to == WuState::READY || to == WuState::FAILED;
        case WuState::READY:
            // WAITING_FOR_DATA re-entry covers inventory shrink: the only
            // believed holder dropped the files or went silent.
            return to == WuState::ASSIGNED || to == WuState::WAITING_FOR_DATA;
        case WuState::ASSIGNED:
            // WAITING_FOR_DATA re-entry covers a timed-out attempt whose
            // holding client vanished together with the data.
            return to == WuState::DONE || to == WuState::READY || to == WuState::FAILED ||
                   to == WuState::WAITING_FOR_DATA;
        case WuState::DONE:
        case WuState::FAILED:
            return false;
    }
    return false;
}

namespace {

// Brute-force friendly cycle reporting: DFS with path recording.
bool find_cycle(const std::string& node,
                const std::map<std::string, std::vector<std::string>>& edges,
                std::map<std::string, int>& color, std::vector<std::string>& path,
                std::string& cycle_out) {
    color[node] = 1;
    path.push_back(node);
    auto it = edges.find(node);
    if (it != edges.end()) {
        for (const auto& next : it->second) {
            int c = color.count(next) ? color[next] : 0;
            if (c == 1) {
                std::ostringstream os;
                auto start = std::find(path.begin(), path.end(), next);
                for (auto p = start; p != path.end(); ++p) os << *p << " -> ";
                os << next;
                cycle_out = os.str();
                return true;
            }
            if (c == 0 && find_cycle(next, edges, color, path, cycle_out)) return true;
        }
    }
    path.pop_back();
    color[node] = 2;
    return false;
}

} // namespace

void validate_workunit_set(const std::vector<Workunit>& wus) {
    std::set<std::string> ids;
    for (const auto& wu : wus) {
        if (!ids.insert(wu.wu_id).second)
            throw Error(ErrorCode::InvalidName, "duplicate wu_id " + wu.wu_id);
        std::set<std::string> names(wu.required_inputs.begin(), wu.required_inputs.end());
        if (names.size() != wu.required_inputs.size())
            throw Error(ErrorCode::InvalidName,
                        "duplicate required input names in " + wu.wu_id);
    }
    std::map<std::string, std::vector<std::string>> edges;
    for (const auto& wu : wus) {
        for (const auto& pred : wu.predecessors) {
            if (!ids.count(pred))
                throw Error(ErrorCode::DanglingPredecessor,
                            wu.wu_id + " references unknown predecessor " + pred);
            edges[wu.wu_id].push_back(pred);
        }
    }
    std::map<std::string, int> color;
    std::vector<std::string> path;
    std::string cycle;
    for (const auto& wu : wus) {
        if ((color.count(wu.wu_id) ? color[wu.wu_id] : 0) == 0) {
            if (find_cycle(wu.wu_id, edges, color, path, cycle))
                throw Error(ErrorCode::CycleDetected, cycle);
        }
    }
}

// ---------------------------------------------------------------------------

const char* result_state_name(ResultState s) {
    switch (s) {
        case ResultState::UNSENT: return "UNSENT";
        case ResultState::IN_PROGRESS: return "IN_PROGRESS";
        case ResultState::SUCCESS: return "SUCCESS";
        case ResultState::ERROR: return "ERROR";
        case ResultState::TIMEOUT: return "TIMEOUT";
        case ResultState::OVERSIZE: return "OVERSIZE";
    }
    return "?";
}

ResultState result_state_from_name(const std::string& name) {
    for (ResultState s : {ResultState::UNSENT, ResultState::IN_PROGRESS, ResultState::SUCCESS,
                          ResultState::ERROR, ResultState::TIMEOUT, ResultState::OVERSIZE}) {
        if (name == result_state_name(s)) return s;
    }
    throw Error(ErrorCode::MalformedMessage, "unknown result state " + name);
}

bool result_state_terminal(ResultState s) {
    return s == ResultState::SUCCESS || s == ResultState::ERROR || s == ResultState::TIMEOUT ||
           s == ResultState::OVERSIZE;
}

bool result_transition_allowed(ResultState from, ResultState to) {
    if (result_state_terminal(from)) return false;
    if (from == ResultState::UNSENT) return to == ResultState::IN_PROGRESS;
    if (from == ResultState::IN_PROGRESS) return result_state_terminal(to);
    return false;
}

// ---------------------------------------------------------------------------

void validate_client(const ClientRecord& client) {
    if (client.client_id.empty()) throw Error(ErrorCode::InvalidName, "empty client_id");
    if (client.cpu_count < 1) throw Error(ErrorCode::BadConfig, "cpu_count must be >= 1");
    if (!(client.benchmark_gflops > 0))
        throw Error(ErrorCode::BadConfig, "benchmark_gflops must be positive");
    for (const auto& [name, fid] : client.inventory) {
        validate_file_id(fid);
        if (name != fid.name)
            throw Error(ErrorCode::InvalidName,
                        "inventory key " + name + " does not match file name " + fid.name);
    }
}

// ---------------------------------------------------------------------------

void CreditLedger::grant(const std::string& user_id, const std::string& group_id,
                         double amount) {
    if (amount < 0) throw Error(ErrorCode::BadConfig, "credit grants cannot be negative");
    users_[user_id] += amount;
    if (!group_id.empty()) groups_[group_id] += amount;
}

double CreditLedger::user_credit(const std::string& user_id) const {
    auto it = users_.find(user_id);
    return it == users_.end() ? 0.0 : it->second;
}

double CreditLedger::group_credit(const std::string& group_id) const {
    auto it = groups_.find(group_id);
    return it == groups_.end() ? 0.0 : it->second;
}

// ---------------------------------------------------------------------------

void validate_transition_trace(const std::vector<Transition>& trace) {
    for (const auto& tr : trace) {
        bool ok = false;
        if (tr.kind == Transition::Kind::WORKUNIT) {
            ok = wu_transition_allowed(wu_state_from_name(tr.from), wu_state_from_name(tr.to));
        } else {
            ok = result_transition_allowed(result_state_from_name(tr.from),
                                           result_state_from_name(tr.to));
        }
        if (!ok)
            throw Error(ErrorCode::BadConfig, "illegal transition " + tr.id + ": " + tr.from +
                                                  " -> " + tr.to);
    }
}

} // namespace locflow
