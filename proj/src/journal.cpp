#include "locflow/journal.hpp"

#include <zlib.h>

#include <cstring>

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include "locflow/errors.hpp"

namespace locflow {

namespace {

std::uint32_t crc_of(const Bytes& body) {
    return static_cast<std::uint32_t>(
        ::crc32(0L, reinterpret_cast<const Bytef*>(body.data()),
                static_cast<uInt>(body.size())));
}

void put_u32(Bytes& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
}

std::uint32_t read_u32(const std::uint8_t* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) |
           (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

} // namespace

Journal::Journal(std::filesystem::path file) : path_(std::move(file)) {}

Journal::~Journal() {
    if (fd_ >= 0) ::close(fd_);
}

std::vector<TimedMessage> Journal::recover() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
    std::vector<TimedMessage> events;
    std::uint64_t valid_end = 0;

    int rfd = ::open(path_.c_str(), O_RDONLY);
    if (rfd >= 0) {
        Bytes content;
        char buf[1 << 16];
        ssize_t n = 0;
        while ((n = ::read(rfd, buf, sizeof(buf))) > 0)
            content.insert(content.end(), buf, buf + n);
        ::close(rfd);

        std::size_t pos = 0;
        while (pos + 8 <= content.size()) {
            std::uint32_t len = read_u32(content.data() + pos);
            std::uint32_t crc = read_u32(content.data() + pos + 4);
            if (len > kMaxFrameBytes || pos + 8 + len > content.size()) break;
            Bytes body(content.begin() + static_cast<std::ptrdiff_t>(pos) + 8,
                       content.begin() + static_cast<std::ptrdiff_t>(pos) + 8 + len);
            if (crc_of(body) != crc) break;
            auto decoded = decode_event(body);
            if (std::holds_alternative<WireError>(decoded)) break;
            events.push_back(std::get<TimedMessage>(std::move(decoded)));
            pos += 8 + len;
            valid_end = pos;
        }
    }

    fd_ = ::open(path_.c_str(), O_RDWR | O_CREAT, 0644);
    if (fd_ < 0) throw Error(ErrorCode::IoError, "cannot open journal " + path_.string());
    if (::ftruncate(fd_, static_cast<off_t>(valid_end)) != 0)
        throw Error(ErrorCode::IoError, "cannot truncate journal " + path_.string());
    if (::lseek(fd_, 0, SEEK_END) < 0)
        throw Error(ErrorCode::IoError, "cannot seek journal " + path_.string());
    return events;
}

void Journal::append(const TimedMessage& event) {
    if (fd_ < 0) throw Error(ErrorCode::IoError, "journal not recovered/opened");
    Bytes body = encode_event(event);
    Bytes record;
    record.reserve(body.size() + 8);
    put_u32(record, static_cast<std::uint32_t>(body.size()));
    put_u32(record, crc_of(body));
    record.insert(record.end(), body.begin(), body.end());

    std::size_t off = 0;
    while (off < record.size()) {
        ssize_t n = ::write(fd_, record.data() + off, record.size() - off);
        if (n < 0) throw Error(ErrorCode::IoError, "journal write failed");
        off += static_cast<std::size_t>(n);
    }
    if (::fsync(fd_) != 0) throw Error(ErrorCode::IoError, "journal fsync failed");
}

} // namespace locflow
