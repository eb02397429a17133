// SPDX-License-Identifier: Apache-2.0
#include "crashfl/llm.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

using nlohmann::json;

namespace crashfl {

std::string_view to_string(Role role) {
    switch (role) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
        case Role::Tool: return "tool";
    }
    return "user";
}

ChatMessage ChatMessage::system(std::string text) {
    return ChatMessage{Role::System, std::move(text), {}, {}};
}
ChatMessage ChatMessage::user(std::string text) {
    return ChatMessage{Role::User, std::move(text), {}, {}};
}
ChatMessage ChatMessage::assistant(std::string text) {
    return ChatMessage{Role::Assistant, std::move(text), {}, {}};
}
ChatMessage ChatMessage::tool_result(std::string call_id, std::string text) {
    return ChatMessage{Role::Tool, std::move(text), {}, std::move(call_id)};
}

namespace {

void check_preconditions(const std::vector<ChatMessage>& messages) {
    if (messages.empty() || messages.front().role != Role::System) {
        throw std::invalid_argument("conversation must start with a system message");
    }
}

}  // namespace

std::vector<ScriptReply> parse_script(std::string_view text, const std::string& origin) {
    std::vector<ScriptReply> replies;
    std::size_t pos = 0;
    int line_no = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos
                                                                              : nl - pos);
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

        json doc = json::parse(line, nullptr, false);
        if (doc.is_discarded() || !doc.is_object()) {
            throw MalformedScript(origin + ":" + std::to_string(line_no) + ": not a JSON object");
        }
        ScriptReply reply;
        if (doc.contains("tool")) {
            reply.kind = ScriptReply::Kind::Tool;
            reply.tool_name = doc["tool"].get<std::string>();
            reply.args = doc.value("args", json::object());
        } else if (doc.contains("final")) {
            reply.kind = ScriptReply::Kind::Final;
            reply.text = doc["final"].get<std::string>();
        } else if (doc.contains("files")) {
            reply.kind = ScriptReply::Kind::Files;
            for (const auto& f : doc["files"]) reply.files.push_back(f.get<std::string>());
        } else {
            throw MalformedScript(origin + ":" + std::to_string(line_no) +
                                  ": expected \"tool\", \"final\" or \"files\"");
        }
        replies.push_back(std::move(reply));
    }
    if (replies.empty()) {
        throw MalformedScript(origin + ": script has no replies");
    }
    return replies;
}

std::vector<ScriptReply> load_script(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw MalformedScript("cannot open script: " + path.string());
    }
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_script(text, path.string());
}

ScriptedBackend::ScriptedBackend(std::vector<ScriptReply> replies)
    : replies_(std::move(replies)) {}

ChatMessage ScriptedBackend::complete(const std::vector<ChatMessage>& messages,
                                      const std::vector<ToolSpec>& tools) {
    (void)tools;
    check_preconditions(messages);
    if (cursor_ >= replies_.size()) {
        throw ScriptExhausted("scripted backend has no reply left (consumed " +
                              std::to_string(cursor_) + ")");
    }
    const ScriptReply& reply = replies_[cursor_++];
    switch (reply.kind) {
        case ScriptReply::Kind::Tool: {
            ChatMessage msg = ChatMessage::assistant("");
            msg.tool_calls.push_back(
                {"call_" + std::to_string(call_counter_++), reply.tool_name, reply.args});
            return msg;
        }
        case ScriptReply::Kind::Final:
            return ChatMessage::assistant(reply.text);
        case ScriptReply::Kind::Files: {
            json arr = json::array();
            for (const auto& f : reply.files) arr.push_back(f);
            return ChatMessage::assistant(arr.dump());
        }
    }
    throw MalformedScript("unreachable reply kind");
}

nlohmann::json message_to_json(const ChatMessage& message) {
    json out{{"role", std::string(to_string(message.role))}, {"content", message.content}};
    if (!message.tool_calls.empty()) {
        json calls = json::array();
        for (const auto& call : message.tool_calls) {
            calls.push_back({{"id", call.id},
                             {"type", "function"},
                             {"function", {{"name", call.name}, {"arguments", call.arguments.dump()}}}});
        }
        out["tool_calls"] = calls;
    }
    if (!message.tool_call_id.empty()) out["tool_call_id"] = message.tool_call_id;
    return out;
}

nlohmann::json build_chat_request(const BackendConfig& config,
                                  const std::vector<ChatMessage>& messages,
                                  const std::vector<ToolSpec>& tools) {
    json body{{"model", config.model_name},
              {"temperature", config.temperature},
              {"max_tokens", config.max_response_tokens}};
    json msgs = json::array();
    for (const auto& m : messages) msgs.push_back(message_to_json(m));
    body["messages"] = msgs;
    if (!tools.empty()) {
        json specs = json::array();
        for (const auto& t : tools) {
            specs.push_back({{"type", "function"},
                             {"function",
                              {{"name", t.name},
                               {"description", t.description},
                               {"parameters", t.parameters}}}});
        }
        body["tools"] = specs;
    }
    return body;
}

ChatMessage parse_chat_response(const nlohmann::json& response) {
    const json& message = response.at("choices").at(0).at("message");
    ChatMessage out = ChatMessage::assistant("");
    if (message.contains("content") && message["content"].is_string()) {
        out.content = message["content"].get<std::string>();
    }
    if (message.contains("tool_calls")) {
        for (const auto& call : message["tool_calls"]) {
            ToolCall tc;
            tc.id = call.at("id").get<std::string>();
            tc.name = call.at("function").at("name").get<std::string>();
            const std::string raw_args = call.at("function").at("arguments").get<std::string>();
            tc.arguments = json::parse(raw_args, nullptr, false);
            if (tc.arguments.is_discarded()) tc.arguments = json::object();
            out.tool_calls.push_back(std::move(tc));
        }
    }
    return out;
}

HttpBackend::HttpBackend(BackendConfig config) : config_(std::move(config)) {
    if (config_.endpoint_url.empty() || config_.model_name.empty()) {
        throw std::invalid_argument("HTTP backend requires endpoint_url and model_name");
    }
}

namespace {

// Split "http://host:port/v1" into client base and request path.
std::pair<std::string, std::string> split_endpoint(const std::string& url) {
    auto scheme_end = url.find("://");
    std::size_t path_start =
        scheme_end == std::string::npos ? url.find('/') : url.find('/', scheme_end + 3);
    std::string base = path_start == std::string::npos ? url : url.substr(0, path_start);
    std::string path = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!path.empty() && path.back() == '/') path.pop_back();
    if (path.find("/chat/completions") == std::string::npos) path += "/chat/completions";
    return {base, path};
}

bool looks_like_context_overflow(const std::string& body) {
    return body.find("context_length_exceeded") != std::string::npos ||
           body.find("maximum context length") != std::string::npos;
}

}  // namespace

ChatMessage HttpBackend::complete(const std::vector<ChatMessage>& messages,
                                  const std::vector<ToolSpec>& tools) {
    check_preconditions(messages);
    const auto [base, path] = split_endpoint(config_.endpoint_url);
    const std::string body = build_chat_request(config_, messages, tools).dump();

    httplib::Headers headers{{"Content-Type", "application/json"}};
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    const int attempts = static_cast<int>(config_.retry_backoff_ms.size());
    std::string last_error = "no attempt made";
    for (int attempt = 0; attempt < attempts; ++attempt) {
        httplib::Client client(base);
        client.set_read_timeout(120, 0);
        client.set_connection_timeout(10, 0);
        auto res = client.Post(path, headers, body, "application/json");

        if (res && res->status == 200) {
            json doc = json::parse(res->body, nullptr, false);
            if (!doc.is_discarded()) return parse_chat_response(doc);
            last_error = "unparseable response body";
        } else if (res && res->status == 400 && looks_like_context_overflow(res->body)) {
            throw ContextLengthExceeded("provider rejected request: context length exceeded");
        } else if (res && res->status != 429 && res->status < 500) {
            throw BackendUnavailable("chat endpoint returned status " +
                                     std::to_string(res->status) + ": " + res->body);
        } else {
            last_error = res ? "status " + std::to_string(res->status)
                             : "transport error: " + httplib::to_string(res.error());
        }

        if (attempt + 1 < attempts) {
            std::this_thread::sleep_for(
                std::chrono::milliseconds(config_.retry_backoff_ms[attempt]));
        }
    }
    throw BackendUnavailable("chat endpoint unavailable after " + std::to_string(attempts) +
                             " attempts (" + last_error + ")");
}

std::unique_ptr<ChatBackend> make_backend(const BackendConfig& config) {
    switch (config.kind) {
        case BackendKind::Http:
            return std::make_unique<HttpBackend>(config);
        case BackendKind::Scripted:
            if (config.script_path.empty()) {
                throw std::invalid_argument("scripted backend requires script_path");
            }
            return std::make_unique<ScriptedBackend>(load_script(config.script_path));
    }
    throw std::invalid_argument("unknown backend kind");
}

}  // namespace crashfl
