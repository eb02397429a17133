// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crashfl/crashdump.hpp"
#include "crashfl/llm.hpp"
#include "crashfl/prompts.hpp"
#include "crashfl/reponav.hpp"

namespace crashfl {

struct AgentConfig {
    int max_tool_interactions = 25;  // N
    bool sanitize_inputs = false;
    bool enable_deep_search = true;  // off: get_term_definition is not offered
    bool strict_term_check = false;
    BackendConfig backend;
    std::vector<std::string> lsp_command;  // empty: lexical symbol resolution
    const PromptSet* prompts = nullptr;    // null: compiled-in defaults
};

enum class RunStatus { Completed, BudgetExhausted, BackendFailed, ContextLengthExceeded };

std::string_view to_string(RunStatus status);

struct ToolErrorRecord {
    std::string tool;
    NavErrorKind kind;
};

struct AgentRun {
    int run_index = 0;
    std::vector<ChatMessage> messages;  // full transcript
    std::string explanation;
    std::vector<std::string> predicted_files;   // ordered, duplicate-free
    std::vector<std::string> unresolved_paths;  // predictions kept verbatim, flagged
    int tool_call_count = 0;
    std::vector<ToolErrorRecord> tool_errors;
    RunStatus status = RunStatus::Completed;
    std::string diagnostic;
};

/// Everything a tool handler may touch. Stack/extinfo views are parsed once
/// per run; `errors` collects the per-run tool failure taxonomy.
struct ToolContext {
    const Crashdump* dump = nullptr;
    const CrashStack* stack = nullptr;
    const CrashExtInfo* extinfo = nullptr;  // null when the section fails to parse
    const RepoSnapshot* repo = nullptr;
    SymbolResolver* resolver = nullptr;
    bool sanitize = false;
    bool strict_term_check = false;
    std::vector<ToolErrorRecord>* errors = nullptr;
};

class ToolRegistry {
public:
    using Handler = std::function<std::string(const nlohmann::json& args, ToolContext& ctx)>;

    /// The standard four tools; with deep search disabled, exactly
    /// get_term_definition is dropped.
    static ToolRegistry standard(bool enable_deep_search = true);

    void add(ToolSpec spec, Handler handler);
    bool has(const std::string& name) const;
    const std::vector<ToolSpec>& specs() const { return specs_; }

    /// Render a short "- name: description" inventory for the system prompt.
    std::string inventory() const;

    friend std::string execute_tool(const ToolRegistry& registry, const ToolCall& call,
                                    ToolContext& ctx);

private:
    std::vector<ToolSpec> specs_;
    std::map<std::string, Handler> handlers_;
};

/// Run one tool call. Never throws: every failure is rendered as a
/// one-line "ERROR(<kind>): ..." result the model can react to.
std::string execute_tool(const ToolRegistry& registry, const ToolCall& call, ToolContext& ctx);

using BackendFactory = std::function<std::unique_ptr<ChatBackend>(int run_index)>;

/// One full agent trajectory: phase 1 gathers evidence through tools until
/// the model answers in plain text (or the interaction budget runs out),
/// phase 2 elicits the culprit file list. A context-length failure retries
/// once with sanitized inputs forced on.
AgentRun run_agent(const AgentConfig& config, const Crashdump& dump, const RepoSnapshot& repo,
                   const BackendFactory& factory, int run_index = 0);
AgentRun run_agent(const AgentConfig& config, const Crashdump& dump, const RepoSnapshot& repo,
                   int run_index = 0);

/// R independent runs; failed runs are kept with their status. `jobs` > 1
/// executes runs on a bounded worker pool, one backend/resolver per run.
std::vector<AgentRun> run_repeated(const AgentConfig& config, const Crashdump& dump,
                                   const RepoSnapshot& repo, int R, const BackendFactory& factory,
                                   int jobs = 1);
std::vector<AgentRun> run_repeated(const AgentConfig& config, const Crashdump& dump,
                                   const RepoSnapshot& repo, int R, int jobs = 1);

/// Predicted file lists in run order, one entry per run (empty for failed
/// runs) — the shape the ranking aggregation consumes.
std::vector<std::vector<std::string>> predictions_of(const std::vector<AgentRun>& runs);

/// Pull the first JSON array of strings out of a phase-2 reply, falling
/// back to path-shaped tokens line by line.
std::vector<std::string> extract_predicted_paths(const std::string& content,
                                                 std::string* diagnostic = nullptr);

nlohmann::json run_to_json(const AgentRun& run);

/// Append one JSON line per run to `<trace_dir>/<crash_id>.jsonl`.
void write_trace(const std::filesystem::path& trace_dir, const std::string& crash_id,
                 const std::vector<AgentRun>& runs);

}  // namespace crashfl
