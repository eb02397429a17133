// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace crashfl {

enum class Role { System, User, Assistant, Tool };

std::string_view to_string(Role role);

struct ToolCall {
    std::string id;
    std::string name;
    nlohmann::json arguments;  // decoded JSON object
};

struct ChatMessage {
    Role role = Role::User;
    std::string content;
    std::vector<ToolCall> tool_calls;  // assistant messages only
    std::string tool_call_id;          // tool messages only

    static ChatMessage system(std::string text);
    static ChatMessage user(std::string text);
    static ChatMessage assistant(std::string text);
    static ChatMessage tool_result(std::string call_id, std::string text);

    bool has_tool_calls() const { return !tool_calls.empty(); }
};

struct ToolSpec {
    std::string name;
    std::string description;
    nlohmann::json parameters;  // JSON-schema-shaped descriptor
};

enum class BackendKind { Http, Scripted };

struct BackendConfig {
    BackendKind kind = BackendKind::Scripted;
    std::string endpoint_url;  // Http: OpenAI-compatible chat completions base
    std::string model_name;
    double temperature = 1.0;  // run diversity feeds the voting aggregation
    int max_response_tokens = 1024;
    std::filesystem::path script_path;  // Scripted
    std::string api_key_env = "CRASHFL_API_KEY";
    std::vector<int> retry_backoff_ms = {1000, 2000, 4000};
};

class BackendError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class BackendUnavailable : public BackendError {
public:
    using BackendError::BackendError;
};
class ContextLengthExceeded : public BackendError {
public:
    using BackendError::BackendError;
};
class ScriptExhausted : public BackendError {
public:
    using BackendError::BackendError;
};
class MalformedScript : public BackendError {
public:
    using BackendError::BackendError;
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    /// Returns the next assistant message. Messages must be non-empty and
    /// start with a System message; inputs are never mutated.
    virtual ChatMessage complete(const std::vector<ChatMessage>& messages,
                                 const std::vector<ToolSpec>& tools) = 0;
};

/// One scripted reply per line: {"tool": ..., "args": {...}},
/// {"final": text} or {"files": [paths]}.
struct ScriptReply {
    enum class Kind { Tool, Final, Files };
    Kind kind = Kind::Final;
    std::string tool_name;
    nlohmann::json args;
    std::string text;
    std::vector<std::string> files;
};

std::vector<ScriptReply> load_script(const std::filesystem::path& path);
std::vector<ScriptReply> parse_script(std::string_view text, const std::string& origin);

/// Deterministic replay backend. Holds a cursor, so one instance serves
/// exactly one agent run.
class ScriptedBackend : public ChatBackend {
public:
    explicit ScriptedBackend(std::vector<ScriptReply> replies);

    ChatMessage complete(const std::vector<ChatMessage>& messages,
                         const std::vector<ToolSpec>& tools) override;

    std::size_t remaining() const { return replies_.size() - cursor_; }

private:
    std::vector<ScriptReply> replies_;
    std::size_t cursor_ = 0;
    int call_counter_ = 0;
};

/// OpenAI-compatible chat completions over HTTP. Retries 429/5xx/transport
/// failures with exponential backoff; context-length errors surface as
/// ContextLengthExceeded so callers can fall back to sanitized inputs.
class HttpBackend : public ChatBackend {
public:
    explicit HttpBackend(BackendConfig config);

    ChatMessage complete(const std::vector<ChatMessage>& messages,
                         const std::vector<ToolSpec>& tools) override;

private:
    BackendConfig config_;
};

std::unique_ptr<ChatBackend> make_backend(const BackendConfig& config);

/// Wire-format helpers, exposed so fixtures can pin the serialization.
nlohmann::json build_chat_request(const BackendConfig& config,
                                  const std::vector<ChatMessage>& messages,
                                  const std::vector<ToolSpec>& tools);
nlohmann::json message_to_json(const ChatMessage& message);
ChatMessage parse_chat_response(const nlohmann::json& response);

}  // namespace crashfl
