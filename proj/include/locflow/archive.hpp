#pragma once

#include <string>
#include <vector>

#include "locflow/domain.hpp"

namespace locflow {

// Deterministic uncompressed result archive. Layout (all integers big endian):
//   magic "LFAR" + 0x01
//   u32 entry count
//   per entry: u32 wu_id length, wu_id, u32 name length, name,
//              u64 payload size, 32 raw digest bytes      (the manifest)
//   per entry, same order: the payload bytes
// Entry order is fixed by the caller (workunit submit order, then name), so
// the same job aggregates to the same bytes every time.
struct ArchiveEntry {
    std::string wu_id;
    FileId file;
    Bytes data;

    bool operator==(const ArchiveEntry&) const = default;
};

Bytes build_archive(const std::vector<ArchiveEntry>& entries);

// Parses and digest-verifies an archive. Throws Error(MalformedMessage) on
// structural damage and Error(DigestMismatch) when a payload does not hash
// to its manifest digest.
std::vector<ArchiveEntry> parse_archive(const Bytes& archive);

} // namespace locflow
