#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace locflow {

using Bytes = std::vector<std::uint8_t>;

// SHA-256, lowercase hex (64 chars).
std::string sha256_hex(const void* data, std::size_t len);
std::string sha256_hex(const Bytes& data);
std::string sha256_hex(const std::string& data);
std::string sha256_hex_file(const std::string& path);

// Raw 32-byte SHA-256.
Bytes sha256_raw(const void* data, std::size_t len);

bool is_hex_digest(const std::string& s);

// Project signing identity. Signatures are Ed25519 over the raw SHA-256
// digest of the file bytes, so a signature stays valid for any transport
// that preserves content.
struct KeyPair {
    Bytes public_key;  // 32 bytes
    Bytes secret_key;  // 32-byte seed

    static KeyPair generate();

    void save(const std::string& path) const;      // secret + public
    void save_public(const std::string& path) const;

    static KeyPair load(const std::string& path);
    static Bytes load_public(const std::string& path);
};

Bytes sign_digest(const Bytes& raw_digest, const KeyPair& key);
bool verify_digest_signature(const Bytes& raw_digest, const Bytes& signature,
                             const Bytes& public_key);

// Sign/verify over whole file contents (hashes then signs the digest).
Bytes sign_bytes(const Bytes& content, const KeyPair& key);
bool verify_bytes(const Bytes& content, const Bytes& signature, const Bytes& public_key);

std::string to_hex(const Bytes& data);
Bytes from_hex(const std::string& hex);  // throws Error on odd length / bad chars

} // namespace locflow
