#include "locflow/wire.hpp"

#include <json.hpp>

#include <algorithm>
#include <set>

namespace locflow {

using json = nlohmann::ordered_json;

namespace {

constexpr char kB64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

// Decode-side failure; converted to a WireError at the entry points.
struct DecodeFail {
    std::string detail;
};

[[noreturn]] void fail(const std::string& detail) { throw DecodeFail{detail}; }

void require_keys(const json& obj, std::initializer_list<const char*> keys,
                  const char* where) {
    if (!obj.is_object()) fail(std::string(where) + ": expected object");
    std::set<std::string> expected(keys.begin(), keys.end());
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!expected.count(it.key()))
            fail(std::string(where) + ": unknown field '" + it.key() + "'");
    }
    for (const auto& k : expected) {
        if (!obj.contains(k)) fail(std::string(where) + ": missing field '" + k + "'");
    }
}

std::string get_str(const json& obj, const char* key) {
    const json& v = obj.at(key);
    if (!v.is_string()) fail(std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
}

std::uint64_t get_u64(const json& obj, const char* key) {
    const json& v = obj.at(key);
    if (!v.is_number_unsigned())
        fail(std::string("field '") + key + "' must be a non-negative integer");
    return v.get<std::uint64_t>();
}

double get_num(const json& obj, const char* key) {
    const json& v = obj.at(key);
    if (!v.is_number()) fail(std::string("field '") + key + "' must be a number");
    return v.get<double>();
}

bool get_bool(const json& obj, const char* key) {
    const json& v = obj.at(key);
    if (!v.is_boolean()) fail(std::string("field '") + key + "' must be a boolean");
    return v.get<bool>();
}

const json& get_array(const json& obj, const char* key) {
    const json& v = obj.at(key);
    if (!v.is_array()) fail(std::string("field '") + key + "' must be an array");
    return v;
}

Bytes get_b64(const json& obj, const char* key) {
    auto decoded = base64_decode(get_str(obj, key));
    if (!decoded) fail(std::string("field '") + key + "' is not valid base64");
    return *decoded;
}

// --- FileId ---------------------------------------------------------------

json file_id_to_json(const FileId& f) {
    return json{{"name", f.name}, {"digest", f.digest}, {"size", f.size_bytes}};
}

FileId file_id_from_json(const json& j) {
    require_keys(j, {"name", "digest", "size"}, "file");
    FileId f{get_str(j, "name"), get_str(j, "digest"), get_u64(j, "size")};
    try {
        validate_file_id(f);
    } catch (const Error& e) {
        fail(e.message());
    }
    return f;
}

json file_list_to_json(const std::vector<FileId>& files) {
    json arr = json::array();
    for (const auto& f : files) arr.push_back(file_id_to_json(f));
    return arr;
}

std::vector<FileId> file_list_from_json(const json& arr, bool distinct_names) {
    std::vector<FileId> out;
    std::set<std::string> names;
    for (const auto& j : arr) {
        FileId f = file_id_from_json(j);
        if (distinct_names && !names.insert(f.name).second)
            fail("duplicate file name '" + f.name + "'");
        out.push_back(std::move(f));
    }
    return out;
}

// --- ClientRecord ----------------------------------------------------------

json client_to_json(const ClientRecord& c) {
    json inv = json::array();
    for (const auto& [name, fid] : c.inventory) inv.push_back(file_id_to_json(fid));
    return json{{"client_id", c.client_id},
                {"user_id", c.user_id},
                {"group_id", c.group_id},
                {"cpu_count", c.cpu_count},
                {"benchmark_gflops", c.benchmark_gflops},
                {"memory_mb", c.memory_mb},
                {"disk_mb", c.disk_mb},
                {"inventory", inv},
                {"last_contact", c.last_contact}};
}

ClientRecord client_from_json(const json& j) {
    require_keys(j,
                 {"client_id", "user_id", "group_id", "cpu_count", "benchmark_gflops",
                  "memory_mb", "disk_mb", "inventory", "last_contact"},
                 "client");
    ClientRecord c;
    c.client_id = get_str(j, "client_id");
    c.user_id = get_str(j, "user_id");
    c.group_id = get_str(j, "group_id");
    c.cpu_count = static_cast<std::uint32_t>(get_u64(j, "cpu_count"));
    c.benchmark_gflops = get_num(j, "benchmark_gflops");
    c.memory_mb = get_u64(j, "memory_mb");
    c.disk_mb = get_u64(j, "disk_mb");
    for (const auto& f : file_list_from_json(get_array(j, "inventory"), true))
        c.inventory.emplace(f.name, f);
    c.last_contact = get_num(j, "last_contact");
    return c;
}

// --- Manifest ---------------------------------------------------------------

const char* purpose_name(FilePurpose p) {
    switch (p) {
        case FilePurpose::APP: return "APP";
        case FilePurpose::ENV: return "ENV";
        case FilePurpose::PATCH: return "PATCH";
    }
    return "?";
}

FilePurpose purpose_from_name(const std::string& s) {
    if (s == "APP") return FilePurpose::APP;
    if (s == "ENV") return FilePurpose::ENV;
    if (s == "PATCH") return FilePurpose::PATCH;
    fail("unknown file purpose '" + s + "'");
}

json manifest_to_json(const std::vector<ManifestEntry>& manifest) {
    json arr = json::array();
    for (const auto& e : manifest) {
        arr.push_back(json{{"file", file_id_to_json(e.file)},
                           {"purpose", purpose_name(e.purpose)},
                           {"sig", base64_encode(e.signature)}});
    }
    return arr;
}

std::vector<ManifestEntry> manifest_from_json(const json& arr) {
    std::vector<ManifestEntry> out;
    for (const auto& j : arr) {
        require_keys(j, {"file", "purpose", "sig"}, "manifest entry");
        ManifestEntry e;
        e.file = file_id_from_json(j.at("file"));
        e.purpose = purpose_from_name(get_str(j, "purpose"));
        e.signature = get_b64(j, "sig");
        if (e.purpose == FilePurpose::APP && e.signature.empty())
            fail("APP manifest entry for " + e.file.name + " lacks a signature");
        out.push_back(std::move(e));
    }
    return out;
}

// --- SignedFile / ApplicationSpec -------------------------------------------

json app_to_json(const ApplicationSpec& a) {
    json files = json::array();
    for (const auto& f : a.files) {
        files.push_back(json{{"file", file_id_to_json(f.file)},
                             {"sig", base64_encode(f.signature)},
                             {"entry", f.entry}});
    }
    return json{{"app_id", a.app_id},
                {"version", a.version},
                {"files", files},
                {"min_memory_mb", a.min_memory_mb},
                {"min_disk_mb", a.min_disk_mb}};
}

ApplicationSpec app_from_json(const json& j) {
    require_keys(j, {"app_id", "version", "files", "min_memory_mb", "min_disk_mb"}, "app");
    ApplicationSpec a;
    a.app_id = get_str(j, "app_id");
    const json& ver = j.at("version");
    if (!ver.is_number_integer()) fail("field 'version' must be an integer");
    a.version = ver.get<int>();
    for (const auto& fj : get_array(j, "files")) {
        require_keys(fj, {"file", "sig", "entry"}, "app file");
        SignedFile f;
        f.file = file_id_from_json(fj.at("file"));
        f.signature = get_b64(fj, "sig");
        f.entry = get_bool(fj, "entry");
        a.files.push_back(std::move(f));
    }
    a.min_memory_mb = get_u64(j, "min_memory_mb");
    a.min_disk_mb = get_u64(j, "min_disk_mb");
    return a;
}

json blobs_to_json(const std::vector<BlobPayload>& blobs) {
    json arr = json::array();
    for (const auto& b : blobs)
        arr.push_back(json{{"digest", b.digest}, {"data", base64_encode(b.data)}});
    return arr;
}

std::vector<BlobPayload> blobs_from_json(const json& arr) {
    std::vector<BlobPayload> out;
    for (const auto& j : arr) {
        require_keys(j, {"digest", "data"}, "blob");
        BlobPayload b;
        b.digest = get_str(j, "digest");
        if (!is_hex_digest(b.digest)) fail("bad blob digest");
        b.data = get_b64(j, "data");
        out.push_back(std::move(b));
    }
    return out;
}

// --- Bodies ------------------------------------------------------------------

json body_of(const RegisterRequest& m) {
    return json{{"client", client_to_json(m.client)}, {"protocol_version", m.protocol_version}};
}

json body_of(const RegisterReply& m) { return json{{"client_id", m.client_id}}; }

json body_of(const WorkRequest& m) {
    return json{{"client_id", m.client_id},
                {"cpu_count", m.cpu_count},
                {"benchmark_gflops", m.benchmark_gflops},
                {"memory_mb", m.memory_mb},
                {"disk_mb", m.disk_mb},
                {"inventory", file_list_to_json(m.inventory)},
                {"protocol_version", m.protocol_version}};
}

json body_of(const WorkReply& m) {
    return json{{"kind", work_reply_kind_name(m.kind)},
                {"result_id", m.result_id},
                {"wu_id", m.wu_id},
                {"deadline_at", m.deadline_at},
                {"manifest", manifest_to_json(m.manifest)},
                {"input_names", m.input_names},
                {"output_template", m.output_template},
                {"backoff_secs", m.backoff_secs}};
}

json body_of(const InventoryQuery& m) { return json{{"names", m.names}}; }

json body_of(const InventoryAnswerBatch& m) {
    json arr = json::array();
    for (const auto& a : m.answers)
        arr.push_back(json{{"client_id", a.client_id}, {"names", a.names}});
    return json{{"answers", arr}};
}

json body_of(const ResultUpload& m) {
    json outs = json::array();
    for (const auto& o : m.outputs) {
        outs.push_back(
            json{{"file", file_id_to_json(o.file)}, {"data", base64_encode(o.data)}});
    }
    return json{{"result_id", m.result_id},
                {"status", m.status == UploadStatus::SUCCESS ? "SUCCESS" : "ERROR"},
                {"cpu_seconds", m.cpu_seconds},
                {"outputs", outs}};
}

json body_of(const UploadReply& m) { return json{{"recorded_state", m.recorded_state}}; }

json body_of(const DownloadRequest& m) { return json{{"digest", m.digest}}; }

json body_of(const DownloadReply& m) { return json{{"data", base64_encode(m.data)}}; }

json body_of(const SubmitAppRequest& m) {
    return json{{"spec", app_to_json(m.spec)}, {"blobs", blobs_to_json(m.blobs)}};
}

json body_of(const SubmitAppReply& m) { return json{{"app_id", m.app_id}}; }

json stage_to_json(const JobStage& s) {
    return json{{"name", s.name},
                {"app_id", s.app_id},
                {"count", s.count},
                {"input_patterns", s.input_patterns},
                {"output_pattern", s.output_pattern},
                {"env_files", file_list_to_json(s.env_files)},
                {"patch_files", file_list_to_json(s.patch_files)},
                {"get_input_app", s.get_input_app},
                {"predecessors", s.predecessors},
                {"max_result_size_bytes", s.max_result_size_bytes},
                {"deadline_secs", s.deadline_secs},
                {"max_retries", s.max_retries}};
}

JobStage stage_from_json(const json& j) {
    require_keys(j,
                 {"name", "app_id", "count", "input_patterns", "output_pattern", "env_files",
                  "patch_files", "get_input_app", "predecessors", "max_result_size_bytes",
                  "deadline_secs", "max_retries"},
                 "stage");
    JobStage s;
    s.name = get_str(j, "name");
    s.app_id = get_str(j, "app_id");
    s.count = static_cast<std::uint32_t>(get_u64(j, "count"));
    for (const auto& p : get_array(j, "input_patterns")) {
        if (!p.is_string()) fail("input_patterns entries must be strings");
        s.input_patterns.push_back(p.get<std::string>());
    }
    s.output_pattern = get_str(j, "output_pattern");
    s.env_files = file_list_from_json(get_array(j, "env_files"), true);
    s.patch_files = file_list_from_json(get_array(j, "patch_files"), true);
    s.get_input_app = get_str(j, "get_input_app");
    for (const auto& p : get_array(j, "predecessors")) {
        if (!p.is_string()) fail("predecessors entries must be strings");
        s.predecessors.push_back(p.get<std::string>());
    }
    s.max_result_size_bytes = get_u64(j, "max_result_size_bytes");
    s.deadline_secs = get_num(j, "deadline_secs");
    s.max_retries = static_cast<std::uint32_t>(get_u64(j, "max_retries"));
    return s;
}

json body_of(const SubmitJobRequest& m) {
    json stages = json::array();
    for (const auto& s : m.stages) stages.push_back(stage_to_json(s));
    return json{{"stages", stages}, {"blobs", blobs_to_json(m.blobs)}};
}

json body_of(const SubmitJobReply& m) {
    return json{{"job_id", m.job_id}, {"wu_ids", m.wu_ids}};
}

json body_of(const StatusRequest& m) { return json{{"job_id", m.job_id}}; }

json body_of(const StatusReply& m) {
    json counts = json::array();
    for (const auto& [state, n] : m.state_counts)
        counts.push_back(json{{"state", state}, {"count", n}});
    json wus = json::array();
    for (const auto& w : m.workunits)
        wus.push_back(json{{"wu_id", w.wu_id}, {"state", w.state}, {"job_id", w.job_id}});
    json results = json::array();
    for (const auto& r : m.results)
        results.push_back(json{{"result_id", r.result_id},
                               {"wu_id", r.wu_id},
                               {"client_id", r.client_id},
                               {"state", r.state}});
    json clients = json::array();
    for (const auto& c : m.clients)
        clients.push_back(json{{"client_id", c.client_id},
                               {"inventory_files", c.inventory_files},
                               {"last_contact", c.last_contact}});
    auto credit_rows = [](const std::vector<CreditRow>& rows) {
        json arr = json::array();
        for (const auto& r : rows) arr.push_back(json{{"id", r.id}, {"credit", r.credit}});
        return arr;
    };
    return json{{"state_counts", counts}, {"workunits", wus},
                {"results", results},    {"clients", clients},
                {"users", credit_rows(m.users)}, {"groups", credit_rows(m.groups)}};
}

json body_of(const FetchRequest& m) { return json{{"job_id", m.job_id}}; }

json body_of(const FetchReply& m) { return json{{"archive", base64_encode(m.archive)}}; }

json body_of(const ErrorReply& m) {
    return json{{"code", m.code}, {"message", m.message}};
}

json body_of(const Ack&) { return json::object(); }
json body_of(const TickWaits&) { return json::object(); }
json body_of(const TickDeadlines&) { return json::object(); }

// --- Body decoders -------------------------------------------------------------

RegisterRequest register_request_from(const json& j) {
    require_keys(j, {"client", "protocol_version"}, "register_request");
    RegisterRequest m;
    m.client = client_from_json(j.at("client"));
    m.protocol_version = static_cast<int>(get_u64(j, "protocol_version"));
    return m;
}

RegisterReply register_reply_from(const json& j) {
    require_keys(j, {"client_id"}, "register_reply");
    return RegisterReply{get_str(j, "client_id")};
}

WorkRequest work_request_from(const json& j) {
    require_keys(j,
                 {"client_id", "cpu_count", "benchmark_gflops", "memory_mb", "disk_mb",
                  "inventory", "protocol_version"},
                 "work_request");
    WorkRequest m;
    m.client_id = get_str(j, "client_id");
    m.cpu_count = static_cast<std::uint32_t>(get_u64(j, "cpu_count"));
    m.benchmark_gflops = get_num(j, "benchmark_gflops");
    m.memory_mb = get_u64(j, "memory_mb");
    m.disk_mb = get_u64(j, "disk_mb");
    m.inventory = file_list_from_json(get_array(j, "inventory"), true);
    m.protocol_version = static_cast<int>(get_u64(j, "protocol_version"));
    return m;
}

WorkReply work_reply_from(const json& j) {
    require_keys(j,
                 {"kind", "result_id", "wu_id", "deadline_at", "manifest", "input_names",
                  "output_template", "backoff_secs"},
                 "work_reply");
    WorkReply m;
    std::string kind = get_str(j, "kind");
    if (kind == "ASSIGNMENT") m.kind = WorkReplyKind::ASSIGNMENT;
    else if (kind == "GET_INPUT_ASSIGNMENT") m.kind = WorkReplyKind::GET_INPUT_ASSIGNMENT;
    else if (kind == "NO_WORK") m.kind = WorkReplyKind::NO_WORK;
    else fail("unknown work reply kind '" + kind + "'");
    m.result_id = get_str(j, "result_id");
    m.wu_id = get_str(j, "wu_id");
    m.deadline_at = get_num(j, "deadline_at");
    m.manifest = manifest_from_json(get_array(j, "manifest"));
    for (const auto& n : get_array(j, "input_names")) {
        if (!n.is_string()) fail("input_names entries must be strings");
        m.input_names.push_back(n.get<std::string>());
    }
    m.output_template = get_str(j, "output_template");
    m.backoff_secs = get_num(j, "backoff_secs");
    if (m.kind != WorkReplyKind::NO_WORK && (m.result_id.empty() || m.wu_id.empty()))
        fail("assignment reply without result_id/wu_id");
    if (m.backoff_secs < 0) fail("negative backoff");
    return m;
}

InventoryQuery inventory_query_from(const json& j) {
    require_keys(j, {"names"}, "inventory_query");
    InventoryQuery m;
    for (const auto& n : get_array(j, "names")) {
        if (!n.is_string()) fail("names entries must be strings");
        m.names.push_back(n.get<std::string>());
    }
    return m;
}

InventoryAnswerBatch inventory_answers_from(const json& j) {
    require_keys(j, {"answers"}, "inventory_answers");
    InventoryAnswerBatch m;
    for (const auto& a : get_array(j, "answers")) {
        require_keys(a, {"client_id", "names"}, "inventory answer");
        InventoryAnswer ans;
        ans.client_id = get_str(a, "client_id");
        for (const auto& n : get_array(a, "names")) {
            if (!n.is_string()) fail("names entries must be strings");
            ans.names.push_back(n.get<std::string>());
        }
        m.answers.push_back(std::move(ans));
    }
    return m;
}

ResultUpload result_upload_from(const json& j) {
    require_keys(j, {"result_id", "status", "cpu_seconds", "outputs"}, "result_upload");
    ResultUpload m;
    m.result_id = get_str(j, "result_id");
    std::string status = get_str(j, "status");
    if (status == "SUCCESS") m.status = UploadStatus::SUCCESS;
    else if (status == "ERROR") m.status = UploadStatus::ERROR;
    else fail("unknown upload status '" + status + "'");
    m.cpu_seconds = get_num(j, "cpu_seconds");
    if (m.cpu_seconds < 0) fail("negative cpu_seconds");
    for (const auto& oj : get_array(j, "outputs")) {
        require_keys(oj, {"file", "data"}, "output");
        OutputPayload o;
        o.file = file_id_from_json(oj.at("file"));
        o.data = get_b64(oj, "data");
        if (o.data.size() != o.file.size_bytes)
            fail("output " + o.file.name + " payload length does not match declared size");
        m.outputs.push_back(std::move(o));
    }
    return m;
}

UploadReply upload_reply_from(const json& j) {
    require_keys(j, {"recorded_state"}, "upload_reply");
    return UploadReply{get_str(j, "recorded_state")};
}

DownloadRequest download_request_from(const json& j) {
    require_keys(j, {"digest"}, "download_request");
    DownloadRequest m{get_str(j, "digest")};
    if (!is_hex_digest(m.digest)) fail("bad digest");
    return m;
}

DownloadReply download_reply_from(const json& j) {
    require_keys(j, {"data"}, "download_reply");
    return DownloadReply{get_b64(j, "data")};
}

SubmitAppRequest submit_app_request_from(const json& j) {
    require_keys(j, {"spec", "blobs"}, "submit_app_request");
    SubmitAppRequest m;
    m.spec = app_from_json(j.at("spec"));
    m.blobs = blobs_from_json(get_array(j, "blobs"));
    return m;
}

SubmitAppReply submit_app_reply_from(const json& j) {
    require_keys(j, {"app_id"}, "submit_app_reply");
    return SubmitAppReply{get_str(j, "app_id")};
}

SubmitJobRequest submit_job_request_from(const json& j) {
    require_keys(j, {"stages", "blobs"}, "submit_job_request");
    SubmitJobRequest m;
    for (const auto& sj : get_array(j, "stages")) m.stages.push_back(stage_from_json(sj));
    m.blobs = blobs_from_json(get_array(j, "blobs"));
    return m;
}

SubmitJobReply submit_job_reply_from(const json& j) {
    require_keys(j, {"job_id", "wu_ids"}, "submit_job_reply");
    SubmitJobReply m;
    m.job_id = get_str(j, "job_id");
    for (const auto& w : get_array(j, "wu_ids")) {
        if (!w.is_string()) fail("wu_ids entries must be strings");
        m.wu_ids.push_back(w.get<std::string>());
    }
    return m;
}

StatusRequest status_request_from(const json& j) {
    require_keys(j, {"job_id"}, "status_request");
    return StatusRequest{get_str(j, "job_id")};
}

StatusReply status_reply_from(const json& j) {
    require_keys(j, {"state_counts", "workunits", "results", "clients", "users", "groups"},
                 "status_reply");
    StatusReply m;
    for (const auto& c : get_array(j, "state_counts")) {
        require_keys(c, {"state", "count"}, "state count");
        m.state_counts.emplace_back(get_str(c, "state"), get_u64(c, "count"));
    }
    for (const auto& w : get_array(j, "workunits")) {
        require_keys(w, {"wu_id", "state", "job_id"}, "workunit status");
        m.workunits.push_back(
            WorkunitStatus{get_str(w, "wu_id"), get_str(w, "state"), get_str(w, "job_id")});
    }
    for (const auto& r : get_array(j, "results")) {
        require_keys(r, {"result_id", "wu_id", "client_id", "state"}, "result status");
        m.results.push_back(ResultStatus{get_str(r, "result_id"), get_str(r, "wu_id"),
                                         get_str(r, "client_id"), get_str(r, "state")});
    }
    for (const auto& c : get_array(j, "clients")) {
        require_keys(c, {"client_id", "inventory_files", "last_contact"}, "client status");
        m.clients.push_back(ClientStatus{get_str(c, "client_id"),
                                         get_u64(c, "inventory_files"),
                                         get_num(c, "last_contact")});
    }
    auto rows = [](const json& arr) {
        std::vector<CreditRow> out;
        for (const auto& r : arr) {
            require_keys(r, {"id", "credit"}, "credit row");
            out.push_back(CreditRow{get_str(r, "id"), get_num(r, "credit")});
        }
        return out;
    };
    m.users = rows(get_array(j, "users"));
    m.groups = rows(get_array(j, "groups"));
    return m;
}

FetchRequest fetch_request_from(const json& j) {
    require_keys(j, {"job_id"}, "fetch_request");
    return FetchRequest{get_str(j, "job_id")};
}

FetchReply fetch_reply_from(const json& j) {
    require_keys(j, {"archive"}, "fetch_reply");
    return FetchReply{get_b64(j, "archive")};
}

ErrorReply error_reply_from(const json& j) {
    require_keys(j, {"code", "message"}, "error");
    return ErrorReply{get_str(j, "code"), get_str(j, "message")};
}

// --- Dispatch -------------------------------------------------------------------

json envelope_of(const Message& m) {
    json body = std::visit([](const auto& v) { return body_of(v); }, m);
    return json{{"v", kProtocolVersion}, {"kind", message_kind(m)}, {"body", std::move(body)}};
}

Message message_from_envelope(const json& envelope) {
    require_keys(envelope, {"v", "kind", "body"}, "envelope");
    const json& vj = envelope.at("v");
    if (!vj.is_number_unsigned()) fail("field 'v' must be a non-negative integer");
    if (vj.get<std::uint64_t>() != static_cast<std::uint64_t>(kProtocolVersion))
        throw Error(ErrorCode::VersionMismatch,
                    "unsupported protocol version " + vj.dump());
    std::string kind = get_str(envelope, "kind");
    const json& body = envelope.at("body");
    if (kind == "register_request") return register_request_from(body);
    if (kind == "register_reply") return register_reply_from(body);
    if (kind == "work_request") return work_request_from(body);
    if (kind == "work_reply") return work_reply_from(body);
    if (kind == "inventory_query") return inventory_query_from(body);
    if (kind == "inventory_answers") return inventory_answers_from(body);
    if (kind == "result_upload") return result_upload_from(body);
    if (kind == "upload_reply") return upload_reply_from(body);
    if (kind == "download_request") return download_request_from(body);
    if (kind == "download_reply") return download_reply_from(body);
    if (kind == "submit_app_request") return submit_app_request_from(body);
    if (kind == "submit_app_reply") return submit_app_reply_from(body);
    if (kind == "submit_job_request") return submit_job_request_from(body);
    if (kind == "submit_job_reply") return submit_job_reply_from(body);
    if (kind == "status_request") return status_request_from(body);
    if (kind == "status_reply") return status_reply_from(body);
    if (kind == "fetch_request") return fetch_request_from(body);
    if (kind == "fetch_reply") return fetch_reply_from(body);
    if (kind == "error") return error_reply_from(body);
    if (kind == "ack") { require_keys(body, {}, "ack"); return Ack{}; }
    if (kind == "tick_waits") { require_keys(body, {}, "tick_waits"); return TickWaits{}; }
    if (kind == "tick_deadlines") {
        require_keys(body, {}, "tick_deadlines");
        return TickDeadlines{};
    }
    fail("unknown message kind '" + kind + "'");
}

Bytes dump_canonical(const json& j) {
    std::string text = j.dump();
    return Bytes(text.begin(), text.end());
}

} // namespace

const char* file_purpose_name(FilePurpose p) { return purpose_name(p); }

const char* work_reply_kind_name(WorkReplyKind k) {
    switch (k) {
        case WorkReplyKind::ASSIGNMENT: return "ASSIGNMENT";
        case WorkReplyKind::GET_INPUT_ASSIGNMENT: return "GET_INPUT_ASSIGNMENT";
        case WorkReplyKind::NO_WORK: return "NO_WORK";
    }
    return "?";
}

const char* message_kind(const Message& m) {
    struct Namer {
        const char* operator()(const RegisterRequest&) { return "register_request"; }
        const char* operator()(const RegisterReply&) { return "register_reply"; }
        const char* operator()(const WorkRequest&) { return "work_request"; }
        const char* operator()(const WorkReply&) { return "work_reply"; }
        const char* operator()(const InventoryQuery&) { return "inventory_query"; }
        const char* operator()(const InventoryAnswerBatch&) { return "inventory_answers"; }
        const char* operator()(const ResultUpload&) { return "result_upload"; }
        const char* operator()(const UploadReply&) { return "upload_reply"; }
        const char* operator()(const DownloadRequest&) { return "download_request"; }
        const char* operator()(const DownloadReply&) { return "download_reply"; }
        const char* operator()(const SubmitAppRequest&) { return "submit_app_request"; }
        const char* operator()(const SubmitAppReply&) { return "submit_app_reply"; }
        const char* operator()(const SubmitJobRequest&) { return "submit_job_request"; }
        const char* operator()(const SubmitJobReply&) { return "submit_job_reply"; }
        const char* operator()(const StatusRequest&) { return "status_request"; }
        const char* operator()(const StatusReply&) { return "status_reply"; }
        const char* operator()(const FetchRequest&) { return "fetch_request"; }
        const char* operator()(const FetchReply&) { return "fetch_reply"; }
        const char* operator()(const ErrorReply&) { return "error"; }
        const char* operator()(const Ack&) { return "ack"; }
        const char* operator()(const TickWaits&) { return "tick_waits"; }
        const char* operator()(const TickDeadlines&) { return "tick_deadlines"; }
    };
    return std::visit(Namer{}, m);
}

Bytes encode_message(const Message& m) { return dump_canonical(envelope_of(m)); }

DecodeResult decode_message(const std::uint8_t* data, std::size_t len) {
    json envelope;
    try {
        envelope = json::parse(data, data + len);
    } catch (const json::parse_error& e) {
        return WireError{ErrorCode::MalformedMessage,
                         static_cast<std::size_t>(e.byte), e.what()};
    }
    try {
        return message_from_envelope(envelope);
    } catch (const DecodeFail& f) {
        return WireError{ErrorCode::MalformedMessage, 0, f.detail};
    } catch (const Error& e) {
        return WireError{e.code(), 0, e.message()};
    } catch (const json::exception& e) {
        return WireError{ErrorCode::MalformedMessage, 0, e.what()};
    }
}

DecodeResult decode_message(const Bytes& body) { return decode_message(body.data(), body.size()); }

Bytes frame_message(const Message& m) {
    Bytes body = encode_message(m);
    Bytes out;
    out.reserve(body.size() + 4);
    std::uint32_t n = static_cast<std::uint32_t>(body.size());
    out.push_back(static_cast<std::uint8_t>((n >> 24) & 0xff));
    out.push_back(static_cast<std::uint8_t>((n >> 16) & 0xff));
    out.push_back(static_cast<std::uint8_t>((n >> 8) & 0xff));
    out.push_back(static_cast<std::uint8_t>(n & 0xff));
    out.insert(out.end(), body.begin(), body.end());
    return out;
}

DecodeResult decode_frame(const std::uint8_t* data, std::size_t len, std::size_t* consumed) {
    if (len < 4)
        return WireError{ErrorCode::MalformedMessage, len, "truncated length prefix"};
    std::uint32_t n = (static_cast<std::uint32_t>(data[0]) << 24) |
                      (static_cast<std::uint32_t>(data[1]) << 16) |
                      (static_cast<std::uint32_t>(data[2]) << 8) |
                      static_cast<std::uint32_t>(data[3]);
    if (n > kMaxFrameBytes)
        return WireError{ErrorCode::MalformedMessage, 0, "frame too large"};
    if (len < 4 + static_cast<std::size_t>(n))
        return WireError{ErrorCode::MalformedMessage, len, "truncated frame body"};
    if (consumed) *consumed = 4 + static_cast<std::size_t>(n);
    return decode_message(data + 4, n);
}

Bytes encode_event(const TimedMessage& ev) {
    json j{{"t", ev.t},
           {"msg", envelope_of(ev.msg)}};
    return dump_canonical(j);
}

std::variant<TimedMessage, WireError> decode_event(const Bytes& body) {
    json j;
    try {
        j = json::parse(body.begin(), body.end());
    } catch (const json::parse_error& e) {
        return WireError{ErrorCode::MalformedMessage, static_cast<std::size_t>(e.byte),
                         e.what()};
    }
    try {
        require_keys(j, {"t", "msg"}, "event");
        TimedMessage ev;
        ev.t = get_num(j, "t");
        ev.msg = message_from_envelope(j.at("msg"));
        return ev;
    } catch (const DecodeFail& f) {
        return WireError{ErrorCode::MalformedMessage, 0, f.detail};
    } catch (const Error& e) {
        return WireError{e.code(), 0, e.message()};
    } catch (const json::exception& e) {
        return WireError{ErrorCode::MalformedMessage, 0, e.what()};
    }
}

std::string base64_encode(const Bytes& data) {
    std::string out;
    out.reserve(((data.size() + 2) / 3) * 4);
    std::size_t i = 0;
    while (i + 3 <= data.size()) {
        std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
        out.push_back(kB64Alphabet[(v >> 18) & 63]);
        out.push_back(kB64Alphabet[(v >> 12) & 63]);
        out.push_back(kB64Alphabet[(v >> 6) & 63]);
        out.push_back(kB64Alphabet[v & 63]);
        i += 3;
    }
    std::size_t rest = data.size() - i;
    if (rest == 1) {
        std::uint32_t v = data[i] << 16;
        out.push_back(kB64Alphabet[(v >> 18) & 63]);
        out.push_back(kB64Alphabet[(v >> 12) & 63]);
        out += "==";
    } else if (rest == 2) {
        std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8);
        out.push_back(kB64Alphabet[(v >> 18) & 63]);
        out.push_back(kB64Alphabet[(v >> 12) & 63]);
        out.push_back(kB64Alphabet[(v >> 6) & 63]);
        out += "=";
    }
    return out;
}

std::optional<Bytes> base64_decode(const std::string& text) {
    if (text.size() % 4 != 0) return std::nullopt;
    auto value_of = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    Bytes out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        int pad = 0;
        std::uint32_t v = 0;
        for (int k = 0; k < 4; ++k) {
            char c = text[i + k];
            if (c == '=') {
                // Padding may appear only in the final two positions.
                if (i + 4 != text.size() || k < 2) return std::nullopt;
                ++pad;
                v <<= 6;
                continue;
            }
            if (pad > 0) return std::nullopt;
            int val = value_of(c);
            if (val < 0) return std::nullopt;
            v = (v << 6) | static_cast<std::uint32_t>(val);
        }
        out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
        if (pad < 2) out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
        if (pad < 1) out.push_back(static_cast<std::uint8_t>(v & 0xff));
    }
    return out;
}

} // namespace locflow
