#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "locflow/wire.hpp"

namespace locflow {

// Blocking TCP connection carrying framed protocol messages.
class TcpConn {
public:
    TcpConn() = default;
    explicit TcpConn(int fd) : fd_(fd) {}
    ~TcpConn();

    TcpConn(TcpConn&& other) noexcept;
    TcpConn& operator=(TcpConn&& other) noexcept;
    TcpConn(const TcpConn&) = delete;
    TcpConn& operator=(const TcpConn&) = delete;

    static TcpConn connect(const std::string& host, std::uint16_t port);

    void send(const Message& m);
    // One framed message; nullopt on clean EOF. Throws Error(IoError) on a
    // broken stream and Error(MalformedMessage) on an unparseable frame
    // header.
    std::optional<Bytes> recv_body();

    bool valid() const { return fd_ >= 0; }
    void close();

private:
    int fd_ = -1;
};

class TcpListener {
public:
    TcpListener() = default;
    ~TcpListener();

    TcpListener(TcpListener&& other) noexcept;
    TcpListener& operator=(TcpListener&& other) noexcept;
    TcpListener(const TcpListener&) = delete;
    TcpListener& operator=(const TcpListener&) = delete;

    // port 0 picks an ephemeral port; see port().
    static TcpListener bind(const std::string& host, std::uint16_t port);

    // Blocks; returns an invalid conn when the listener was closed.
    TcpConn accept();

    std::uint16_t port() const { return port_; }
    void close();

private:
    int fd_ = -1;
    std::uint16_t port_ = 0;
};

// "host:port" -> parts. Throws Error(BadConfig).
std::pair<std::string, std::uint16_t> split_host_port(const std::string& addr);

// One request/response exchange on a fresh connection (the protocol's
// normal shape). Throws Error(IoError) on transport failure and surfaces
// in-band error replies as-is.
Message rpc(const std::string& addr, const Message& request);

} // namespace locflow
