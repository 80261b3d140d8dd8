#pragma once

#include <filesystem>
#include <vector>

#include "locflow/wire.hpp"

namespace locflow {

// Append-only event log backing the server state machine. Every record is
// [u32 length][u32 crc32][body]; an append is flushed and fsynced before the
// caller acknowledges the event. Recovery replays the valid prefix and
// truncates anything torn by a crash.
class Journal {
public:
    explicit Journal(std::filesystem::path file);
    ~Journal();

    Journal(const Journal&) = delete;
    Journal& operator=(const Journal&) = delete;

    // Reads every intact record, truncates the file after the last one and
    // opens it for appending.
    std::vector<TimedMessage> recover();

    void append(const TimedMessage& event);

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    int fd_ = -1;
};

} // namespace locflow
