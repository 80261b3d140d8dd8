#pragma once

#include <filesystem>
#include <string>

#include "locflow/crypto.hpp"

namespace locflow {

// Content-addressed file store: one file per blob, named by its sha256.
// Writes go through a temp file + rename, so a killed process never leaves
// a half-written blob under a valid name.
class BlobStore {
public:
    explicit BlobStore(std::filesystem::path dir);

    // Stores the blob and returns its digest. Idempotent.
    std::string put(const Bytes& data);
    // Stores a blob the caller already hashed; throws Error(DigestMismatch)
    // when the content does not hash to `digest`.
    void put_with_digest(const Bytes& data, const std::string& digest);

    // Reads and re-verifies the blob. Throws Error(NotFound) or
    // Error(DigestMismatch) when the stored bytes rotted.
    Bytes get(const std::string& digest) const;
    bool has(const std::string& digest) const;

    std::filesystem::path path_of(const std::string& digest) const;
    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
};

Bytes read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const Bytes& data);

} // namespace locflow
