#include "locflow/archive.hpp"

#include <cstring>

#include "locflow/crypto.hpp"
#include "locflow/errors.hpp"

namespace locflow {

namespace {

constexpr char kMagic[5] = {'L', 'F', 'A', 'R', 0x01};

void put_u32(Bytes& out, std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8)
        out.push_back(static_cast<std::uint8_t>((v >> shift) & 0xff));
}

void put_u64(Bytes& out, std::uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8)
        out.push_back(static_cast<std::uint8_t>((v >> shift) & 0xff));
}

struct Reader {
    const Bytes& data;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > data.size())
            throw Error(ErrorCode::MalformedMessage,
                        "archive truncated at offset " + std::to_string(pos));
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = (v << 8) | data[pos++];
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v = (v << 8) | data[pos++];
        return v;
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s(data.begin() + static_cast<std::ptrdiff_t>(pos),
                      data.begin() + static_cast<std::ptrdiff_t>(pos + n));
        pos += n;
        return s;
    }
    Bytes bytes(std::size_t n) {
        need(n);
        Bytes b(data.begin() + static_cast<std::ptrdiff_t>(pos),
                data.begin() + static_cast<std::ptrdiff_t>(pos + n));
        pos += n;
        return b;
    }
};

} // namespace

Bytes build_archive(const std::vector<ArchiveEntry>& entries) {
    Bytes out;
    out.insert(out.end(), kMagic, kMagic + sizeof(kMagic));
    put_u32(out, static_cast<std::uint32_t>(entries.size()));
    for (const auto& e : entries) {
        validate_file_id(e.file);
        if (e.data.size() != e.file.size_bytes)
            throw Error(ErrorCode::DigestMismatch,
                        "payload size mismatch for " + e.file.name);
        if (sha256_hex(e.data) != e.file.digest)
            throw Error(ErrorCode::DigestMismatch, "payload digest mismatch for " + e.file.name);
        put_u32(out, static_cast<std::uint32_t>(e.wu_id.size()));
        out.insert(out.end(), e.wu_id.begin(), e.wu_id.end());
        put_u32(out, static_cast<std::uint32_t>(e.file.name.size()));
        out.insert(out.end(), e.file.name.begin(), e.file.name.end());
        put_u64(out, e.file.size_bytes);
        Bytes digest = from_hex(e.file.digest);
        out.insert(out.end(), digest.begin(), digest.end());
    }
    for (const auto& e : entries) out.insert(out.end(), e.data.begin(), e.data.end());
    return out;
}

std::vector<ArchiveEntry> parse_archive(const Bytes& archive) {
    Reader r{archive};
    r.need(sizeof(kMagic));
    if (std::memcmp(archive.data(), kMagic, sizeof(kMagic)) != 0)
        throw Error(ErrorCode::MalformedMessage, "bad archive magic");
    r.pos = sizeof(kMagic);
    std::uint32_t count = r.u32();
    std::vector<ArchiveEntry> entries;
    entries.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        ArchiveEntry e;
        e.wu_id = r.str(r.u32());
        e.file.name = r.str(r.u32());
        e.file.size_bytes = r.u64();
        e.file.digest = to_hex(r.bytes(32));
        entries.push_back(std::move(e));
    }
    for (auto& e : entries) {
        e.data = r.bytes(e.file.size_bytes);
        if (sha256_hex(e.data) != e.file.digest)
            throw Error(ErrorCode::DigestMismatch, "archive payload for " + e.file.name +
                                                       " does not match its manifest digest");
    }
    if (r.pos != archive.size())
        throw Error(ErrorCode::MalformedMessage, "trailing bytes after archive payload");
    return entries;
}

} // namespace locflow
