// SPDX-License-Identifier: Apache-2.0
#include "crashfl/lsp.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cstring>
#include <fstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace crashfl {

namespace {

std::string hex_digit(int v) {
    const char* digits = "0123456789ABCDEF";
    return std::string(1, digits[v]);
}

}  // namespace

std::string path_to_uri(const fs::path& path) {
    std::string out = "file://";
    for (unsigned char c : path.generic_string()) {
        if (std::isalnum(c) || std::strchr("-._~/", c)) {
            out += static_cast<char>(c);
        } else {
            out += '%';
            out += hex_digit(c >> 4);
            out += hex_digit(c & 0xF);
        }
    }
    return out;
}

std::optional<fs::path> uri_to_path(const std::string& uri) {
    constexpr std::string_view scheme = "file://";
    if (uri.rfind(scheme, 0) != 0) return std::nullopt;
    std::string_view rest(uri);
    rest.remove_prefix(scheme.size());
    // file://host/path is not expected from local servers; tolerate empty host.
    std::string out;
    for (std::size_t i = 0; i < rest.size(); ++i) {
        if (rest[i] == '%' && i + 2 < rest.size()) {
            int v = 0;
            auto [p, ec] = std::from_chars(rest.data() + i + 1, rest.data() + i + 3, v, 16);
            if (ec == std::errc() && p == rest.data() + i + 3) {
                out += static_cast<char>(v);
                i += 2;
                continue;
            }
        }
        out += rest[i];
    }
    return fs::path(out);
}

LspSession::LspSession(LspConfig config) : config_(std::move(config)) {
    if (config_.command.empty()) {
        throw std::invalid_argument("LSP server command is empty");
    }
}

LspSession::~LspSession() {
    if (proc_ && initialized_) {
        // Best effort: shutdown request, exit notification.
        send({{"jsonrpc", "2.0"}, {"id", next_id_++}, {"method", "shutdown"}});
        await_response(next_id_ - 1, 500);
        send({{"jsonrpc", "2.0"}, {"method", "exit"}});
    }
}

void LspSession::send(const json& message) {
    const std::string body = message.dump();
    std::string frame = "Content-Length: " + std::to_string(body.size()) + "\r\n\r\n" + body;
    proc_->write_all(frame);
}

std::optional<json> LspSession::next_message(int timeout_ms) {
    const auto deadline =
        std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    while (true) {
        // A full frame may already be buffered.
        auto header_end = read_buffer_.find("\r\n\r\n");
        if (header_end != std::string::npos) {
            std::size_t content_length = 0;
            std::string_view headers(read_buffer_.data(), header_end);
            auto pos = headers.find("Content-Length:");
            if (pos != std::string_view::npos) {
                pos += std::string_view("Content-Length:").size();
                while (pos < headers.size() && headers[pos] == ' ') ++pos;
                std::size_t end = pos;
                while (end < headers.size() && std::isdigit(static_cast<unsigned char>(headers[end])))
                    ++end;
                std::from_chars(headers.data() + pos, headers.data() + end, content_length);
            }
            if (read_buffer_.size() >= header_end + 4 + content_length) {
                std::string body = read_buffer_.substr(header_end + 4, content_length);
                read_buffer_.erase(0, header_end + 4 + content_length);
                json parsed = json::parse(body, nullptr, false);
                if (parsed.is_discarded()) continue;
                return parsed;
            }
        }

        const auto now = std::chrono::steady_clock::now();
        if (now >= deadline) return std::nullopt;
        const int remaining = static_cast<int>(
            std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count());
        auto chunk = proc_->read_some(std::max(1, remaining));
        if (!chunk) return std::nullopt;       // timeout
        if (chunk->empty()) return std::nullopt;  // EOF: server died
        read_buffer_ += *chunk;
    }
}

std::optional<json> LspSession::await_response(int id, int timeout_ms) {
    const auto deadline =
        std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    while (true) {
        const auto now = std::chrono::steady_clock::now();
        if (now >= deadline) return std::nullopt;
        const int remaining = static_cast<int>(
            std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count());
        auto message = next_message(remaining);
        if (!message) return std::nullopt;
        if (message->contains("id") && (*message)["id"] == id &&
            (message->contains("result") || message->contains("error"))) {
            return message;
        }
        // Server-to-client request: answer with a null result so the server
        // does not stall; notifications are simply dropped.
        if (message->contains("id") && message->contains("method")) {
            send({{"jsonrpc", "2.0"}, {"id", (*message)["id"]}, {"result", nullptr}});
        }
    }
}

bool LspSession::ensure_initialized(const RepoSnapshot& repo, std::string& error) {
    if (initialized_) return true;
    try {
        proc_ = std::make_unique<Subprocess>(config_.command);
    } catch (const std::exception& e) {
        error = e.what();
        return false;
    }

    root_uri_ = path_to_uri(fs::absolute(repo.root()));
    const int id = next_id_++;
    send({{"jsonrpc", "2.0"},
          {"id", id},
          {"method", "initialize"},
          {"params",
           {{"processId", nullptr},
            {"rootUri", root_uri_},
            {"capabilities", json::object()}}}});
    auto reply = await_response(id, config_.request_timeout_ms);
    if (!reply || reply->contains("error")) {
        error = "initialize failed or timed out";
        return false;
    }
    send({{"jsonrpc", "2.0"}, {"method", "initialized"}, {"params", json::object()}});
    initialized_ = true;
    return true;
}

bool LspSession::ensure_open(const RepoSnapshot& repo, const std::string& rel_path,
                             std::string& error) {
    if (opened_.count(rel_path)) return true;
    std::ifstream in(repo.root() / fs::path(rel_path), std::ios::binary);
    if (!in) {
        error = "cannot read " + rel_path;
        return false;
    }
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    send({{"jsonrpc", "2.0"},
          {"method", "textDocument/didOpen"},
          {"params",
           {{"textDocument",
             {{"uri", path_to_uri(fs::absolute(repo.root()) / fs::path(rel_path))},
              {"languageId", "cpp"},
              {"version", 1},
              {"text", text}}}}}});
    opened_.insert(rel_path);
    return true;
}

NavResult<DefinitionLocation> LspSession::definition(const RepoSnapshot& repo,
                                                     const std::string& rel_path, int line,
                                                     int column, const std::string& term) {
    std::lock_guard<std::mutex> lock(mutex_);
    std::string error;
    if (!ensure_initialized(repo, error) || !ensure_open(repo, rel_path, error)) {
        return NavError{NavErrorKind::NavigationFailed, "language server: " + error};
    }

    const int id = next_id_++;
    send({{"jsonrpc", "2.0"},
          {"id", id},
          {"method", "textDocument/definition"},
          {"params",
           {{"textDocument",
             {{"uri", path_to_uri(fs::absolute(repo.root()) / fs::path(rel_path))}}},
            {"position", {{"line", line - 1}, {"character", column}}}}}});

    auto reply = await_response(id, config_.request_timeout_ms);
    if (!reply) {
        return NavError{NavErrorKind::NavigationFailed,
                        "definition request timed out for '" + term + "'"};
    }
    if (reply->contains("error")) {
        return NavError{NavErrorKind::NavigationFailed,
                        "server error: " + (*reply)["error"].dump()};
    }

    const json& result = (*reply)["result"];
    json location;
    if (result.is_array() && !result.empty()) {
        location = result.front();
    } else if (result.is_object()) {
        location = result;
    } else {
        return NavError{NavErrorKind::NavigationFailed, "no definition for '" + term + "'"};
    }

    std::string uri;
    int def_line = 0;
    if (location.contains("uri")) {  // Location
        uri = location["uri"].get<std::string>();
        def_line = location["range"]["start"]["line"].get<int>() + 1;
    } else if (location.contains("targetUri")) {  // LocationLink
        uri = location["targetUri"].get<std::string>();
        const char* range_key =
            location.contains("targetSelectionRange") ? "targetSelectionRange" : "targetRange";
        def_line = location[range_key]["start"]["line"].get<int>() + 1;
    } else {
        return NavError{NavErrorKind::NavigationFailed, "unrecognized definition shape"};
    }

    auto abs_path = uri_to_path(uri);
    if (!abs_path) {
        return NavError{NavErrorKind::NavigationFailed, "unparseable uri: " + uri};
    }
    const fs::path rel = abs_path->lexically_relative(fs::absolute(repo.root()));
    const std::string rel_str = rel.generic_string();
    if (rel_str.empty() || rel_str.rfind("..", 0) == 0) {
        return NavError{NavErrorKind::NavigationFailed,
                        "definition outside repository: " + abs_path->string()};
    }

    auto lines = repo.read_lines(rel_str);
    if (!lines.ok()) {
        return NavError{NavErrorKind::NavigationFailed, "definition in unknown file: " + rel_str};
    }
    if (def_line < 1 || def_line > static_cast<int>(lines.value().size())) {
        return NavError{NavErrorKind::NavigationFailed, "definition line out of range"};
    }
    return DefinitionLocation{rel_str, def_line,
                              lines.value()[static_cast<std::size_t>(def_line - 1)]};
}

}  // namespace crashfl
