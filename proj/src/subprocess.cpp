// SPDX-License-Identifier: Apache-2.0
#include "crashfl/subprocess.hpp"

#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <stdexcept>
#include <thread>

namespace crashfl {

Subprocess::Subprocess(const std::vector<std::string>& argv) {
    if (argv.empty()) throw std::invalid_argument("empty argv");

    int to_child[2];
    int from_child[2];
    if (pipe(to_child) != 0 || pipe(from_child) != 0) {
        throw std::runtime_error("pipe() failed: " + std::string(std::strerror(errno)));
    }

    pid_ = fork();
    if (pid_ < 0) {
        throw std::runtime_error("fork() failed: " + std::string(std::strerror(errno)));
    }
    if (pid_ == 0) {
        dup2(to_child[0], STDIN_FILENO);
        dup2(from_child[1], STDOUT_FILENO);
        close(to_child[0]);
        close(to_child[1]);
        close(from_child[0]);
        close(from_child[1]);
        std::vector<char*> cargv;
        cargv.reserve(argv.size() + 1);
        for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
        cargv.push_back(nullptr);
        execvp(cargv[0], cargv.data());
        _exit(127);
    }

    close(to_child[0]);
    close(from_child[1]);
    stdin_fd_ = to_child[1];
    stdout_fd_ = from_child[0];
    signal(SIGPIPE, SIG_IGN);
}

Subprocess::~Subprocess() { terminate(); }

bool Subprocess::running() const {
    if (pid_ < 0) return false;
    return waitpid(pid_, nullptr, WNOHANG) == 0;
}

bool Subprocess::write_all(std::string_view data) {
    if (stdin_fd_ < 0) return false;
    std::size_t off = 0;
    while (off < data.size()) {
        ssize_t n = write(stdin_fd_, data.data() + off, data.size() - off);
        if (n < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        off += static_cast<std::size_t>(n);
    }
    return true;
}

std::optional<std::string> Subprocess::read_some(int timeout_ms, std::size_t max_bytes) {
    if (stdout_fd_ < 0) return std::string{};
    pollfd pfd{stdout_fd_, POLLIN, 0};
    int rc = poll(&pfd, 1, timeout_ms);
    if (rc == 0) return std::nullopt;
    if (rc < 0) return std::string{};

    std::string buf(max_bytes, '\0');
    ssize_t n = read(stdout_fd_, buf.data(), buf.size());
    if (n <= 0) return std::string{};
    buf.resize(static_cast<std::size_t>(n));
    return buf;
}

void Subprocess::close_stdin() {
    if (stdin_fd_ >= 0) {
        close(stdin_fd_);
        stdin_fd_ = -1;
    }
}

void Subprocess::terminate() {
    if (pid_ < 0) return;
    close_stdin();
    if (stdout_fd_ >= 0) {
        close(stdout_fd_);
        stdout_fd_ = -1;
    }
    if (waitpid(pid_, nullptr, WNOHANG) == 0) {
        kill(pid_, SIGTERM);
        for (int i = 0; i < 50 && waitpid(pid_, nullptr, WNOHANG) == 0; ++i) {
            std::this_thread::sleep_for(std::chrono::milliseconds(10));
        }
        if (waitpid(pid_, nullptr, WNOHANG) == 0) {
            kill(pid_, SIGKILL);
            waitpid(pid_, nullptr, 0);
        }
    }
    pid_ = -1;
}

}  // namespace crashfl
