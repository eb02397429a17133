// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "crashfl/reponav.hpp"
#include "crashfl/subprocess.hpp"

namespace crashfl {

struct LspConfig {
    std::vector<std::string> command;  // e.g. {"clangd", "--background-index=false"}
    int request_timeout_ms = 10000;
};

/// Language-server-backed symbol resolver. One session drives one server
/// process over its standard streams (JSON-RPC 2.0, Content-Length framed)
/// and serializes requests; use one session per concurrent agent run.
class LspSession : public SymbolResolver {
public:
    explicit LspSession(LspConfig config);
    ~LspSession() override;

    NavResult<DefinitionLocation> definition(const RepoSnapshot& repo, const std::string& rel_path,
                                             int line, int column, const std::string& term) override;

    bool initialized() const { return initialized_; }

private:
    bool ensure_initialized(const RepoSnapshot& repo, std::string& error);
    bool ensure_open(const RepoSnapshot& repo, const std::string& rel_path, std::string& error);

    void send(const nlohmann::json& message);
    /// Wait for the response to `id`, answering or discarding other traffic.
    std::optional<nlohmann::json> await_response(int id, int timeout_ms);
    std::optional<nlohmann::json> next_message(int timeout_ms);

    LspConfig config_;
    std::unique_ptr<Subprocess> proc_;
    std::string read_buffer_;
    int next_id_ = 1;
    bool initialized_ = false;
    std::string root_uri_;
    std::unordered_set<std::string> opened_;
    std::mutex mutex_;
};

/// "file:///abs/path" <-> filesystem path helpers (percent-encoding kept to
/// the subset LSP servers emit for source trees).
std::string path_to_uri(const std::filesystem::path& path);
std::optional<std::filesystem::path> uri_to_path(const std::string& uri);

}  // namespace crashfl
