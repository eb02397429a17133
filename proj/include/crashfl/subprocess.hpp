// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

namespace crashfl {

/// Child process with piped stdin/stdout, POSIX only. Used to drive a
/// language server over its standard streams.
class Subprocess {
public:
    explicit Subprocess(const std::vector<std::string>& argv);
    ~Subprocess();

    Subprocess(const Subprocess&) = delete;
    Subprocess& operator=(const Subprocess&) = delete;

    bool running() const;

    /// Write all bytes to the child's stdin. Returns false on a broken pipe.
    bool write_all(std::string_view data);

    /// Read up to `max_bytes`, waiting at most `timeout_ms`. Empty optional
    /// means timeout; empty string means EOF.
    std::optional<std::string> read_some(int timeout_ms, std::size_t max_bytes = 65536);

    void close_stdin();

    /// Terminate (SIGTERM, then SIGKILL after a grace period) and reap.
    void terminate();

private:
    int pid_ = -1;
    int stdin_fd_ = -1;
    int stdout_fd_ = -1;
};

}  // namespace crashfl
