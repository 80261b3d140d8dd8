#include "locflow/blobstore.hpp"

#include <fstream>

#include <unistd.h>

#include "locflow/errors.hpp"

namespace locflow {

namespace fs = std::filesystem;

Bytes read_file_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return data;
}

void write_file_bytes(const fs::path& path, const Bytes& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size()));
    if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

BlobStore::BlobStore(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create blob dir " + dir_.string());
}

std::string BlobStore::put(const Bytes& data) {
    std::string digest = sha256_hex(data);
    put_with_digest(data, digest);
    return digest;
}

void BlobStore::put_with_digest(const Bytes& data, const std::string& digest) {
    if (sha256_hex(data) != digest)
        throw Error(ErrorCode::DigestMismatch, "blob content does not hash to " + digest);
    fs::path final_path = path_of(digest);
    if (fs::exists(final_path)) return;
    fs::path tmp = dir_ / ("tmp." + digest + "." + std::to_string(::getpid()));
    write_file_bytes(tmp, data);
    std::error_code ec;
    fs::rename(tmp, final_path, ec);
    if (ec) {
        fs::remove(tmp);
        if (!fs::exists(final_path))
            throw Error(ErrorCode::IoError, "cannot store blob " + digest);
    }
}

Bytes BlobStore::get(const std::string& digest) const {
    fs::path p = path_of(digest);
    if (!fs::exists(p)) throw Error(ErrorCode::NotFound, "blob " + digest);
    Bytes data = read_file_bytes(p);
    if (sha256_hex(data) != digest)
        throw Error(ErrorCode::DigestMismatch, "stored blob " + digest + " is corrupt");
    return data;
}

bool BlobStore::has(const std::string& digest) const { return fs::exists(path_of(digest)); }

fs::path BlobStore::path_of(const std::string& digest) const {
    if (!is_hex_digest(digest)) throw Error(ErrorCode::InvalidName, "bad digest " + digest);
    return dir_ / digest;
}

} // namespace locflow
