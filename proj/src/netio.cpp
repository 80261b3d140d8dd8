#include "locflow/netio.hpp"

#include <cstring>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include "locflow/errors.hpp"

namespace locflow {

namespace {

void write_all(int fd, const std::uint8_t* data, std::size_t len) {
    std::size_t off = 0;
    while (off < len) {
        ssize_t n = ::send(fd, data + off, len - off, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw Error(ErrorCode::IoError, std::string("send: ") + std::strerror(errno));
        }
        off += static_cast<std::size_t>(n);
    }
}

// false on clean EOF at a record boundary.
bool read_exact(int fd, std::uint8_t* data, std::size_t len) {
    std::size_t off = 0;
    while (off < len) {
        ssize_t n = ::recv(fd, data + off, len - off, 0);
        if (n == 0) {
            if (off == 0) return false;
            throw Error(ErrorCode::MalformedMessage, "connection closed mid-frame");
        }
        if (n < 0) {
            if (errno == EINTR) continue;
            throw Error(ErrorCode::IoError, std::string("recv: ") + std::strerror(errno));
        }
        off += static_cast<std::size_t>(n);
    }
    return true;
}

sockaddr_in make_addr(const std::string& host, std::uint16_t port) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
        throw Error(ErrorCode::BadConfig, "bad IPv4 address '" + host + "'");
    return addr;
}

} // namespace

TcpConn::~TcpConn() { close(); }

TcpConn::TcpConn(TcpConn&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

TcpConn& TcpConn::operator=(TcpConn&& other) noexcept {
    if (this != &other) {
        close();
        fd_ = other.fd_;
        other.fd_ = -1;
    }
    return *this;
}

void TcpConn::close() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

TcpConn TcpConn::connect(const std::string& host, std::uint16_t port) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw Error(ErrorCode::IoError, "socket() failed");
    sockaddr_in addr = make_addr(host, port);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        int err = errno;
        ::close(fd);
        throw Error(ErrorCode::IoError,
                    "connect " + host + ":" + std::to_string(port) + ": " + std::strerror(err));
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    return TcpConn(fd);
}

void TcpConn::send(const Message& m) {
    Bytes frame = frame_message(m);
    write_all(fd_, frame.data(), frame.size());
}

std::optional<Bytes> TcpConn::recv_body() {
    std::uint8_t header[4];
    if (!read_exact(fd_, header, 4)) return std::nullopt;
    std::uint32_t len = (static_cast<std::uint32_t>(header[0]) << 24) |
                        (static_cast<std::uint32_t>(header[1]) << 16) |
                        (static_cast<std::uint32_t>(header[2]) << 8) |
                        static_cast<std::uint32_t>(header[3]);
    if (len > kMaxFrameBytes) throw Error(ErrorCode::MalformedMessage, "frame too large");
    Bytes body(len);
    if (len > 0 && !read_exact(fd_, body.data(), len))
        throw Error(ErrorCode::MalformedMessage, "connection closed mid-frame");
    return body;
}

TcpListener::~TcpListener() { close(); }

TcpListener::TcpListener(TcpListener&& other) noexcept
    : fd_(other.fd_), port_(other.port_) {
    other.fd_ = -1;
}

TcpListener& TcpListener::operator=(TcpListener&& other) noexcept {
    if (this != &other) {
        close();
        fd_ = other.fd_;
        port_ = other.port_;
        other.fd_ = -1;
    }
    return *this;
}

void TcpListener::close() {
    if (fd_ >= 0) {
        ::shutdown(fd_, SHUT_RDWR);
        ::close(fd_);
        fd_ = -1;
    }
}

TcpListener TcpListener::bind(const std::string& host, std::uint16_t port) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw Error(ErrorCode::IoError, "socket() failed");
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr = make_addr(host, port);
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        int err = errno;
        ::close(fd);
        throw Error(ErrorCode::IoError,
                    "bind " + host + ":" + std::to_string(port) + ": " + std::strerror(err));
    }
    if (::listen(fd, 64) != 0) {
        ::close(fd);
        throw Error(ErrorCode::IoError, "listen() failed");
    }
    sockaddr_in bound{};
    socklen_t len = sizeof(bound);
    if (::getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &len) != 0) {
        ::close(fd);
        throw Error(ErrorCode::IoError, "getsockname() failed");
    }
    TcpListener l;
    l.fd_ = fd;
    l.port_ = ntohs(bound.sin_port);
    return l;
}

TcpConn TcpListener::accept() {
    while (true) {
        int fd = ::accept(fd_, nullptr, nullptr);
        if (fd >= 0) return TcpConn(fd);
        if (errno == EINTR) continue;
        return TcpConn(); // listener closed
    }
}

std::pair<std::string, std::uint16_t> split_host_port(const std::string& addr) {
    std::size_t colon = addr.rfind(':');
    if (colon == std::string::npos || colon + 1 >= addr.size())
        throw Error(ErrorCode::BadConfig, "expected host:port, got '" + addr + "'");
    int port = 0;
    try {
        port = std::stoi(addr.substr(colon + 1));
    } catch (const std::exception&) {
        throw Error(ErrorCode::BadConfig, "bad port in '" + addr + "'");
    }
    if (port < 1 || port > 65535) throw Error(ErrorCode::BadConfig, "port out of range");
    return {addr.substr(0, colon), static_cast<std::uint16_t>(port)};
}

Message rpc(const std::string& addr, const Message& request) {
    auto [host, port] = split_host_port(addr);
    TcpConn conn = TcpConn::connect(host, port);
    conn.send(request);
    auto body = conn.recv_body();
    if (!body) throw Error(ErrorCode::IoError, "server closed connection without a reply");
    DecodeResult decoded = decode_message(*body);
    if (std::holds_alternative<WireError>(decoded)) {
        const auto& err = std::get<WireError>(decoded);
        throw Error(err.code, "bad reply: " + err.detail);
    }
    return std::get<Message>(std::move(decoded));
}

} // namespace locflow
