// SPDX-License-Identifier: Apache-2.0
#include "crashfl/agent.hpp"

#include <atomic>
#include <fstream>
#include <regex>
#include <thread>
#include <unordered_set>

#include "crashfl/lsp.hpp"

using nlohmann::json;

namespace crashfl {

std::string_view to_string(RunStatus status) {
    switch (status) {
        case RunStatus::Completed: return "completed";
        case RunStatus::BudgetExhausted: return "budget_exhausted";
        case RunStatus::BackendFailed: return "backend_failed";
        case RunStatus::ContextLengthExceeded: return "context_length_exceeded";
    }
    return "backend_failed";
}

namespace {

std::string nav_error_text(const NavError& error) {
    return std::string("ERROR(") + to_string(error.kind) + "): " + error.detail;
}

std::string record_error(ToolContext& ctx, const std::string& tool, NavError error) {
    if (ctx.errors) ctx.errors->push_back({tool, error.kind});
    return nav_error_text(error);
}

// Models sometimes pass lines as numbers, sometimes as digit strings.
std::optional<long long> arg_as_line(const json& args, const char* key) {
    if (!args.contains(key)) return std::nullopt;
    const json& v = args[key];
    if (v.is_number_integer()) return v.get<long long>();
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        if (!s.empty() && s.find_first_not_of("0123456789") == std::string::npos) {
            return std::stoll(s);
        }
    }
    return std::nullopt;
}

std::optional<std::string> arg_as_string(const json& args, const char* key) {
    if (!args.contains(key) || !args[key].is_string()) return std::nullopt;
    return args[key].get<std::string>();
}

std::string crash_extinfo_tool(const json&, ToolContext& ctx) {
    if (!ctx.sanitize) return std::string(ctx.dump->section("CRASH_EXTINFO"));
    if (!ctx.extinfo) {
        return record_error(ctx, "get_crash_extinfo",
                            {NavErrorKind::InvalidArgument, "CRASH_EXTINFO did not parse"});
    }
    return sanitize_crash_extinfo(*ctx.extinfo);
}

std::string crash_stack_tool(const json&, ToolContext& ctx) {
    if (!ctx.sanitize) return std::string(ctx.dump->section("CRASH_STACK"));
    return sanitize_crash_stack(*ctx.stack);
}

std::string nearby_code_tool(const json& args, ToolContext& ctx) {
    auto path = arg_as_string(args, "path");
    auto line = arg_as_line(args, "line");
    if (!path || !line) {
        return record_error(ctx, "get_nearby_code",
                            {NavErrorKind::InvalidArgument,
                             "expected {\"path\": string, \"line\": integer}"});
    }
    auto result = get_nearby_code(*ctx.repo, *path, *line);
    if (!result.ok()) return record_error(ctx, "get_nearby_code", result.error());
    return result.value().render();
}

std::string term_definition_tool(const json& args, ToolContext& ctx) {
    auto path = arg_as_string(args, "path");
    auto line = arg_as_line(args, "line");
    auto term = arg_as_string(args, "term");
    if (!path || !line || !term) {
        return record_error(ctx, "get_term_definition",
                            {NavErrorKind::InvalidArgument,
                             "expected {\"path\": string, \"line\": integer, \"term\": string}"});
    }
    auto result =
        get_term_definition(*ctx.repo, *ctx.resolver, *path, *line, *term, ctx.strict_term_check);
    if (!result.ok()) return record_error(ctx, "get_term_definition", result.error());
    const DefinitionLocation& def = result.value();
    return "'" + *term + "' is defined at " + def.path + ":" + std::to_string(def.line) + "\n" +
           std::to_string(def.line) + "|" + def.defining_text;
}

json no_params_schema() {
    return json{{"type", "object"}, {"properties", json::object()}, {"required", json::array()}};
}

json location_schema(bool with_term) {
    json properties{
        {"path", {{"type", "string"}, {"description", "repository-relative file path"}}},
        {"line", {{"type", "integer"}, {"description", "1-based line number"}}}};
    json required = json::array({"path", "line"});
    if (with_term) {
        properties["term"] = {{"type", "string"},
                              {"description", "identifier appearing on that line"}};
        required.push_back("term");
    }
    return json{{"type", "object"}, {"properties", properties}, {"required", required}};
}

}  // namespace

ToolRegistry ToolRegistry::standard(bool enable_deep_search) {
    ToolRegistry registry;
    registry.add({"get_crash_extinfo",
                  "Returns the crash signal summary (signal, code, faulting address) and host "
                  "metadata recorded at the time of the crash.",
                  no_params_schema()},
                 crash_extinfo_tool);
    registry.add({"get_crash_stack",
                  "Returns the stack report extracted from the crashdump: the symbolic backtrace "
                  "at the point of failure and any pending exceptions.",
                  no_params_schema()},
                 crash_stack_tool);
    registry.add({"get_nearby_code",
                  "Returns the 10 lines before, the target line itself, and the 10 lines after "
                  "the given location in a repository file, each prefixed with its line number.",
                  location_schema(false)},
                 nearby_code_tool);
    if (enable_deep_search) {
        registry.add({"get_term_definition",
                      "Returns the repository location where the identifier `term`, which appears "
                      "on the given line of the given file, is defined.",
                      location_schema(true)},
                     term_definition_tool);
    }
    return registry;
}

void ToolRegistry::add(ToolSpec spec, Handler handler) {
    if (handlers_.count(spec.name)) {
        throw std::invalid_argument("duplicate tool name: " + spec.name);
    }
    handlers_[spec.name] = std::move(handler);
    specs_.push_back(std::move(spec));
}

bool ToolRegistry::has(const std::string& name) const { return handlers_.count(name) > 0; }

std::string ToolRegistry::inventory() const {
    std::string out;
    for (const auto& spec : specs_) {
        out += "- " + spec.name + ": " + spec.description + "\n";
    }
    if (!out.empty()) out.pop_back();
    return out;
}

std::string execute_tool(const ToolRegistry& registry, const ToolCall& call, ToolContext& ctx) {
    auto it = registry.handlers_.find(call.name);
    if (it == registry.handlers_.end()) {
        return record_error(ctx, call.name,
                            {NavErrorKind::InvalidArgument, "unknown tool '" + call.name + "'"});
    }
    const json args = call.arguments.is_object() ? call.arguments : json::object();
    try {
        return it->second(args, ctx);
    } catch (const std::exception& e) {
        return record_error(ctx, call.name, {NavErrorKind::InvalidArgument, e.what()});
    }
}

namespace {

const std::regex kPathTokenRe(R"(([A-Za-z0-9_\-./+]+\.(?:c|cc|cpp|h|hpp|hxx|cxx))\b)");

std::optional<std::vector<std::string>> try_parse_array(const std::string& content,
                                                        std::size_t open) {
    // Find the matching ']' with a scanner that respects strings.
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = open; i < content.size(); ++i) {
        const char c = content[i];
        if (in_string) {
            if (c == '\\') ++i;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '[') ++depth;
        else if (c == ']' && --depth == 0) {
            json arr = json::parse(content.substr(open, i - open + 1), nullptr, false);
            if (arr.is_discarded() || !arr.is_array()) return std::nullopt;
            std::vector<std::string> out;
            for (const auto& item : arr) {
                if (item.is_string()) out.push_back(item.get<std::string>());
            }
            if (out.empty()) return std::nullopt;
            return out;
        }
    }
    return std::nullopt;
}

}  // namespace

std::vector<std::string> extract_predicted_paths(const std::string& content,
                                                 std::string* diagnostic) {
    for (std::size_t pos = content.find('['); pos != std::string::npos;
         pos = content.find('[', pos + 1)) {
        if (auto files = try_parse_array(content, pos)) return *files;
    }

    std::vector<std::string> tokens;
    std::size_t start = 0;
    while (start <= content.size()) {
        std::size_t nl = content.find('\n', start);
        const std::string line =
            content.substr(start, nl == std::string::npos ? std::string::npos : nl - start);
        for (auto it = std::sregex_iterator(line.begin(), line.end(), kPathTokenRe);
             it != std::sregex_iterator(); ++it) {
            tokens.push_back((*it)[1].str());
        }
        if (nl == std::string::npos) break;
        start = nl + 1;
    }
    if (tokens.empty() && diagnostic) {
        *diagnostic = "no JSON array and no path-shaped tokens in file-elicitation reply";
    }
    return tokens;
}

namespace {

struct PreparedPrompts {
    std::string system;
    std::string user;
    std::string elicitation;
};

PreparedPrompts prepare_prompts(const AgentConfig& config, const ToolRegistry& registry) {
    const PromptSet& prompts = config.prompts ? *config.prompts : PromptSet::builtin();
    PreparedPrompts out;
    out.system = render_template(prompts.block("system"),
                                 {{"tool_inventory", registry.inventory()}});
    out.user = render_template(
        prompts.block("user"),
        {{"max_interactions", std::to_string(config.max_tool_interactions)}});
    out.elicitation = prompts.block("file_elicitation");
    return out;
}

// Normalize predicted paths through the snapshot, keep unresolvable ones
// verbatim (flagged), drop duplicates while preserving first mention.
void normalize_predictions(const RepoSnapshot& repo, const std::vector<std::string>& raw,
                           AgentRun& run) {
    std::unordered_set<std::string> seen;
    for (const auto& path : raw) {
        auto resolved = resolve_path(repo, path);
        const std::string normalized = resolved.ok() ? resolved.value() : path;
        if (!seen.insert(normalized).second) continue;
        run.predicted_files.push_back(normalized);
        if (!resolved.ok()) run.unresolved_paths.push_back(path);
    }
}

// One attempt at a full trajectory; throws BackendError subtypes.
AgentRun attempt_run(const AgentConfig& config, const Crashdump& dump, const RepoSnapshot& repo,
                     ChatBackend& backend, bool sanitize, int run_index) {
    AgentRun run;
    run.run_index = run_index;

    const CrashStack stack = parse_crash_stack(dump.section("CRASH_STACK"));
    std::optional<CrashExtInfo> extinfo;
    try {
        extinfo = parse_crash_extinfo(dump.section("CRASH_EXTINFO"));
    } catch (const MissingSignal&) {
        // Raw section stays available to the model either way.
    }

    const ToolRegistry registry = ToolRegistry::standard(config.enable_deep_search);

    std::unique_ptr<SymbolResolver> resolver;
    if (config.lsp_command.empty()) {
        resolver = std::make_unique<LexicalResolver>();
    } else {
        resolver = std::make_unique<LspSession>(LspConfig{config.lsp_command});
    }

    ToolContext ctx;
    ctx.dump = &dump;
    ctx.stack = &stack;
    ctx.extinfo = extinfo ? &*extinfo : nullptr;
    ctx.repo = &repo;
    ctx.resolver = resolver.get();
    ctx.sanitize = sanitize;
    ctx.strict_term_check = config.strict_term_check;
    ctx.errors = &run.tool_errors;

    const PreparedPrompts prompts = prepare_prompts(config, registry);
    run.messages.push_back(ChatMessage::system(prompts.system));
    run.messages.push_back(ChatMessage::user(prompts.user));

    const int budget = config.max_tool_interactions;
    run.status = RunStatus::Completed;

    while (true) {
        ChatMessage reply = backend.complete(run.messages, registry.specs());
        run.messages.push_back(reply);

        if (!reply.has_tool_calls()) {
            run.explanation = reply.content;
            break;
        }

        bool budget_hit = false;
        for (const auto& call : reply.tool_calls) {
            if (run.tool_call_count >= budget) {
                // Every call still gets its matching tool message.
                run.messages.push_back(ChatMessage::tool_result(
                    call.id, "ERROR(InvalidArgument): tool interaction budget exhausted"));
                budget_hit = true;
                continue;
            }
            const std::string result = execute_tool(registry, call, ctx);
            ++run.tool_call_count;
            run.messages.push_back(ChatMessage::tool_result(call.id, result));
        }
        if (budget_hit || run.tool_call_count >= budget) {
            run.status = RunStatus::BudgetExhausted;
            break;
        }
    }

    // Phase 2: culprit file elicitation, no tools offered.
    run.messages.push_back(ChatMessage::user(prompts.elicitation));
    ChatMessage files_reply = backend.complete(run.messages, {});
    run.messages.push_back(files_reply);

    std::string parse_diagnostic;
    const std::vector<std::string> raw = extract_predicted_paths(files_reply.content,
                                                                 &parse_diagnostic);
    if (raw.empty()) run.diagnostic = parse_diagnostic;
    normalize_predictions(repo, raw, run);
    return run;
}

}  // namespace

AgentRun run_agent(const AgentConfig& config, const Crashdump& dump, const RepoSnapshot& repo,
                   const BackendFactory& factory, int run_index) {
    if (!dump.has_section("CRASH_STACK") || !dump.has_section("CRASH_EXTINFO")) {
        AgentRun run;
        run.run_index = run_index;
        run.status = RunStatus::BackendFailed;
        run.diagnostic = "dump lacks CRASH_STACK or CRASH_EXTINFO";
        return run;
    }

    bool sanitize = config.sanitize_inputs;
    for (int attempt = 0;; ++attempt) {
        try {
            auto backend = factory(run_index);
            return attempt_run(config, dump, repo, *backend, sanitize, run_index);
        } catch (const ContextLengthExceeded& e) {
            if (!sanitize && attempt == 0) {
                sanitize = true;  // retry once with sanitized inputs forced on
                continue;
            }
            AgentRun run;
            run.run_index = run_index;
            run.status = RunStatus::ContextLengthExceeded;
            run.diagnostic = e.what();
            return run;
        } catch (const BackendError& e) {
            AgentRun run;
            run.run_index = run_index;
            run.status = RunStatus::BackendFailed;
            run.diagnostic = e.what();
            return run;
        }
    }
}

AgentRun run_agent(const AgentConfig& config, const Crashdump& dump, const RepoSnapshot& repo,
                   int run_index) {
    return run_agent(
        config, dump, repo, [&config](int) { return make_backend(config.backend); }, run_index);
}

std::vector<AgentRun> run_repeated(const AgentConfig& config, const Crashdump& dump,
                                   const RepoSnapshot& repo, int R, const BackendFactory& factory,
                                   int jobs) {
    if (R < 1) throw std::invalid_argument("R must be >= 1");
    std::vector<AgentRun> runs(static_cast<std::size_t>(R));

    const int workers = std::max(1, std::min(jobs, R));
    if (workers == 1) {
        for (int i = 0; i < R; ++i) runs[static_cast<std::size_t>(i)] = run_agent(config, dump, repo, factory, i);
        return runs;
    }

    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < R; i = next.fetch_add(1)) {
                runs[static_cast<std::size_t>(i)] = run_agent(config, dump, repo, factory, i);
            }
        });
    }
    for (auto& t : pool) t.join();
    return runs;
}

std::vector<AgentRun> run_repeated(const AgentConfig& config, const Crashdump& dump,
                                   const RepoSnapshot& repo, int R, int jobs) {
    return run_repeated(
        config, dump, repo, R, [&config](int) { return make_backend(config.backend); }, jobs);
}

std::vector<std::vector<std::string>> predictions_of(const std::vector<AgentRun>& runs) {
    std::vector<std::vector<std::string>> out;
    out.reserve(runs.size());
    for (const auto& run : runs) out.push_back(run.predicted_files);
    return out;
}

nlohmann::json run_to_json(const AgentRun& run) {
    json messages = json::array();
    for (const auto& m : run.messages) messages.push_back(message_to_json(m));
    json errors = json::array();
    for (const auto& e : run.tool_errors) {
        errors.push_back({{"tool", e.tool}, {"kind", to_string(e.kind)}});
    }
    return json{{"run_index", run.run_index},
                {"status", std::string(to_string(run.status))},
                {"tool_call_count", run.tool_call_count},
                {"explanation", run.explanation},
                {"predicted_files", run.predicted_files},
                {"unresolved_paths", run.unresolved_paths},
                {"tool_errors", errors},
                {"diagnostic", run.diagnostic},
                {"messages", messages}};
}

void write_trace(const std::filesystem::path& trace_dir, const std::string& crash_id,
                 const std::vector<AgentRun>& runs) {
    std::filesystem::create_directories(trace_dir);
    std::ofstream out(trace_dir / (crash_id + ".jsonl"), std::ios::binary | std::ios::app);
    if (!out) {
        throw std::runtime_error("cannot write trace file in " + trace_dir.string());
    }
    for (const auto& run : runs) out << run_to_json(run).dump() << '\n';
}

}  // namespace crashfl
