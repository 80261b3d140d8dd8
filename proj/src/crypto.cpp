#include "locflow/crypto.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "locflow/errors.hpp"

namespace locflow {

namespace {

constexpr char kHexAlphabet[] = "0123456789abcdef";

std::string hex_of(const unsigned char* buf, std::size_t len) {
    std::string out;
    out.resize(len * 2);
    for (std::size_t i = 0; i < len; ++i) {
        out[2 * i] = kHexAlphabet[buf[i] >> 4];
        out[2 * i + 1] = kHexAlphabet[buf[i] & 0xf];
    }
    return out;
}

struct EvpMdCtxDeleter {
    void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};
struct EvpPkeyDeleter {
    void operator()(EVP_PKEY* key) const { EVP_PKEY_free(key); }
};
struct EvpPkeyCtxDeleter {
    void operator()(EVP_PKEY_CTX* ctx) const { EVP_PKEY_CTX_free(ctx); }
};

using MdCtx = std::unique_ptr<EVP_MD_CTX, EvpMdCtxDeleter>;
using Pkey = std::unique_ptr<EVP_PKEY, EvpPkeyDeleter>;

Pkey raw_private(const Bytes& seed) {
    EVP_PKEY* key = EVP_PKEY_new_raw_private_key(EVP_PKEY_ED25519, nullptr,
                                                 seed.data(), seed.size());
    if (!key) throw Error(ErrorCode::BadConfig, "invalid ed25519 secret key");
    return Pkey(key);
}

Pkey raw_public(const Bytes& pub) {
    EVP_PKEY* key = EVP_PKEY_new_raw_public_key(EVP_PKEY_ED25519, nullptr,
                                                pub.data(), pub.size());
    if (!key) throw Error(ErrorCode::BadConfig, "invalid ed25519 public key");
    return Pkey(key);
}

} // namespace

Bytes sha256_raw(const void* data, std::size_t len) {
    Bytes out(32);
    unsigned int outlen = 0;
    if (EVP_Digest(data, len, out.data(), &outlen, EVP_sha256(), nullptr) != 1 ||
        outlen != 32) {
        throw Error(ErrorCode::IoError, "sha256 failed");
    }
    return out;
}

std::string sha256_hex(const void* data, std::size_t len) {
    Bytes raw = sha256_raw(data, len);
    return hex_of(raw.data(), raw.size());
}

std::string sha256_hex(const Bytes& data) { return sha256_hex(data.data(), data.size()); }

std::string sha256_hex(const std::string& data) { return sha256_hex(data.data(), data.size()); }

std::string sha256_hex_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    MdCtx ctx(EVP_MD_CTX_new());
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
        throw Error(ErrorCode::IoError, "sha256 init failed");
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        std::streamsize n = in.gcount();
        if (n > 0 && EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(n)) != 1)
            throw Error(ErrorCode::IoError, "sha256 update failed");
    }
    unsigned char raw[32];
    unsigned int outlen = 0;
    if (EVP_DigestFinal_ex(ctx.get(), raw, &outlen) != 1 || outlen != 32)
        throw Error(ErrorCode::IoError, "sha256 final failed");
    return hex_of(raw, 32);
}

bool is_hex_digest(const std::string& s) {
    if (s.size() != 64) return false;
    for (char c : s) {
        bool ok = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
        if (!ok) return false;
    }
    return true;
}

KeyPair KeyPair::generate() {
    std::unique_ptr<EVP_PKEY_CTX, EvpPkeyCtxDeleter> ctx(
        EVP_PKEY_CTX_new_id(EVP_PKEY_ED25519, nullptr));
    EVP_PKEY* raw = nullptr;
    if (!ctx || EVP_PKEY_keygen_init(ctx.get()) != 1 || EVP_PKEY_keygen(ctx.get(), &raw) != 1)
        throw Error(ErrorCode::IoError, "ed25519 keygen failed");
    Pkey key(raw);

    KeyPair pair;
    std::size_t len = 32;
    pair.secret_key.resize(len);
    if (EVP_PKEY_get_raw_private_key(key.get(), pair.secret_key.data(), &len) != 1 || len != 32)
        throw Error(ErrorCode::IoError, "ed25519 export secret failed");
    len = 32;
    pair.public_key.resize(len);
    if (EVP_PKEY_get_raw_public_key(key.get(), pair.public_key.data(), &len) != 1 || len != 32)
        throw Error(ErrorCode::IoError, "ed25519 export public failed");
    return pair;
}

void KeyPair::save(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    out << "ed25519-secret " << to_hex(secret_key) << "\n";
    out << "ed25519-public " << to_hex(public_key) << "\n";
}

void KeyPair::save_public(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    out << "ed25519-public " << to_hex(public_key) << "\n";
}

namespace {

void parse_key_lines(const std::string& path, Bytes* secret, Bytes* pub) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open key file " + path);
    std::string kind, hex;
    while (in >> kind >> hex) {
        if (kind == "ed25519-secret" && secret) *secret = from_hex(hex);
        if (kind == "ed25519-public" && pub) *pub = from_hex(hex);
    }
}

} // namespace

KeyPair KeyPair::load(const std::string& path) {
    KeyPair pair;
    parse_key_lines(path, &pair.secret_key, &pair.public_key);
    if (pair.secret_key.size() != 32)
        throw Error(ErrorCode::BadConfig, "key file has no usable secret key: " + path);
    if (pair.public_key.size() != 32) {
        // Derive the public half from the seed.
        Pkey key = raw_private(pair.secret_key);
        std::size_t len = 32;
        pair.public_key.resize(len);
        if (EVP_PKEY_get_raw_public_key(key.get(), pair.public_key.data(), &len) != 1)
            throw Error(ErrorCode::BadConfig, "cannot derive public key");
    }
    return pair;
}

Bytes KeyPair::load_public(const std::string& path) {
    Bytes pub;
    parse_key_lines(path, nullptr, &pub);
    if (pub.size() != 32)
        throw Error(ErrorCode::BadConfig, "key file has no usable public key: " + path);
    return pub;
}

Bytes sign_digest(const Bytes& raw_digest, const KeyPair& key) {
    Pkey pkey = raw_private(key.secret_key);
    MdCtx ctx(EVP_MD_CTX_new());
    if (!ctx || EVP_DigestSignInit(ctx.get(), nullptr, nullptr, nullptr, pkey.get()) != 1)
        throw Error(ErrorCode::IoError, "ed25519 sign init failed");
    std::size_t siglen = 0;
    if (EVP_DigestSign(ctx.get(), nullptr, &siglen, raw_digest.data(), raw_digest.size()) != 1)
        throw Error(ErrorCode::IoError, "ed25519 sign failed");
    Bytes sig(siglen);
    if (EVP_DigestSign(ctx.get(), sig.data(), &siglen, raw_digest.data(), raw_digest.size()) != 1)
        throw Error(ErrorCode::IoError, "ed25519 sign failed");
    sig.resize(siglen);
    return sig;
}

bool verify_digest_signature(const Bytes& raw_digest, const Bytes& signature,
                             const Bytes& public_key) {
    if (signature.empty() || public_key.size() != 32) return false;
    try {
        Pkey pkey = raw_public(public_key);
        MdCtx ctx(EVP_MD_CTX_new());
        if (!ctx || EVP_DigestVerifyInit(ctx.get(), nullptr, nullptr, nullptr, pkey.get()) != 1)
            return false;
        return EVP_DigestVerify(ctx.get(), signature.data(), signature.size(),
                                raw_digest.data(), raw_digest.size()) == 1;
    } catch (const Error&) {
        return false;
    }
}

Bytes sign_bytes(const Bytes& content, const KeyPair& key) {
    return sign_digest(sha256_raw(content.data(), content.size()), key);
}

bool verify_bytes(const Bytes& content, const Bytes& signature, const Bytes& public_key) {
    return verify_digest_signature(sha256_raw(content.data(), content.size()), signature,
                                   public_key);
}

std::string to_hex(const Bytes& data) { return hex_of(data.data(), data.size()); }

Bytes from_hex(const std::string& hex) {
    if (hex.size() % 2 != 0) throw Error(ErrorCode::MalformedMessage, "odd hex length");
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    Bytes out(hex.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        int hi = nibble(hex[2 * i]);
        int lo = nibble(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) throw Error(ErrorCode::MalformedMessage, "bad hex char");
        out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
    }
    return out;
}

} // namespace locflow
