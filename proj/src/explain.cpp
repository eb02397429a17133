// SPDX-License-Identifier: Apache-2.0
#include "crashfl/explain.hpp"

#include <algorithm>
#include <cctype>
#include <optional>

using nlohmann::json;

namespace crashfl {

namespace {

struct Gathered {
    std::vector<int> source_runs;
    std::vector<const std::string*> explanations;
};

Gathered gather(const std::vector<AgentRun>& runs, const std::string& path) {
    Gathered out;
    for (const auto& run : runs) {
        if (std::find(run.predicted_files.begin(), run.predicted_files.end(), path) !=
            run.predicted_files.end()) {
            out.source_runs.push_back(run.run_index);
            out.explanations.push_back(&run.explanation);
        }
    }
    if (out.source_runs.empty()) {
        throw NoSourceRuns("no run predicted " + path);
    }
    return out;
}

}  // namespace

FileExplanation consolidate(const std::vector<AgentRun>& runs, const std::string& path) {
    const Gathered g = gather(runs, path);
    FileExplanation out;
    out.path = path;
    out.source_runs = g.source_runs;
    if (g.explanations.size() == 1) {
        out.consolidated = *g.explanations.front();
        return out;
    }
    for (std::size_t i = 0; i < g.explanations.size(); ++i) {
        if (i > 0) out.consolidated += "\n\n";
        out.consolidated += "[run " + std::to_string(g.source_runs[i]) + "]\n";
        out.consolidated += *g.explanations[i];
    }
    return out;
}

FileExplanation consolidate(const std::vector<AgentRun>& runs, const std::string& path,
                            ChatBackend& backend, const PromptSet& prompts) {
    const Gathered g = gather(runs, path);
    std::string joined;
    for (std::size_t i = 0; i < g.explanations.size(); ++i) {
        if (i > 0) joined += "\n\n";
        joined += "Explanation " + std::to_string(i + 1) + ":\n" + *g.explanations[i];
    }
    const std::string prompt =
        render_template(prompts.block("consolidate"), {{"path", path}, {"explanations", joined}});

    std::vector<ChatMessage> messages{
        ChatMessage::system("You summarize crash root-cause explanations."),
        ChatMessage::user(prompt)};
    ChatMessage reply = backend.complete(messages, {});

    FileExplanation out;
    out.path = path;
    out.source_runs = g.source_runs;
    out.consolidated = reply.content;
    return out;
}

namespace {

// "aligned" is a substring of "misaligned"; check the longer word first.
std::optional<bool> parse_verdict(const std::string& reply) {
    std::string lowered = reply;
    std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lowered.find("misaligned") != std::string::npos) return false;
    if (lowered.find("aligned") != std::string::npos) return true;
    return std::nullopt;
}

}  // namespace

Verdict judge(ChatBackend& backend, const PromptSet& prompts, const std::string& postmortem,
              const std::string& explanation, int judges) {
    if (judges < 1 || judges % 2 == 0) {
        throw std::invalid_argument("judge count must be odd and positive");
    }
    const std::string prompt = render_template(
        prompts.block("judge"), {{"postmortem", postmortem}, {"explanation", explanation}});

    Verdict verdict;
    verdict.votes_total = judges;
    for (int j = 0; j < judges; ++j) {
        std::optional<bool> aligned;
        for (int tries = 0; tries < 2 && !aligned; ++tries) {
            std::vector<ChatMessage> messages{
                ChatMessage::system("You judge whether two crash explanations match."),
                ChatMessage::user(prompt)};
            aligned = parse_verdict(backend.complete(messages, {}).content);
        }
        if (!aligned) {
            throw UnparseableVerdict("judge reply contains neither 'aligned' nor 'misaligned'");
        }
        if (*aligned) ++verdict.votes_aligned;
    }
    verdict.label = verdict.votes_aligned * 2 > verdict.votes_total ? Verdict::Label::Aligned
                                                                    : Verdict::Label::Misaligned;
    return verdict;
}

AlignmentRates alignment_rates(
    const std::map<std::string, std::vector<std::pair<std::string, Verdict>>>& per_crash) {
    AlignmentRates rates;
    if (per_crash.empty()) return rates;

    int overall = 0, top1 = 0, top3 = 0;
    for (const auto& [crash_id, verdicts] : per_crash) {
        bool any = false, first = false, first3 = false;
        for (std::size_t i = 0; i < verdicts.size(); ++i) {
            if (verdicts[i].second.label != Verdict::Label::Aligned) continue;
            any = true;
            if (i == 0) first = true;
            if (i < 3) first3 = true;
        }
        overall += any;
        top1 += first;
        top3 += first3;
    }
    const double n = static_cast<double>(per_crash.size());
    rates.overall = overall / n;
    rates.top1 = top1 / n;
    rates.top3 = top3 / n;
    return rates;
}

nlohmann::json alignment_report_to_json(
    const std::map<std::string, std::vector<std::pair<std::string, Verdict>>>& per_crash,
    const AlignmentRates& rates) {
    json crashes = json::object();
    for (const auto& [crash_id, verdicts] : per_crash) {
        json list = json::array();
        for (const auto& [path, verdict] : verdicts) {
            list.push_back(
                {{"path", path},
                 {"label", verdict.label == Verdict::Label::Aligned ? "aligned" : "misaligned"},
                 {"votes_aligned", verdict.votes_aligned},
                 {"votes_total", verdict.votes_total}});
        }
        crashes[crash_id] = list;
    }
    return json{{"per_crash", crashes},
                {"rates", {{"overall", rates.overall}, {"top1", rates.top1}, {"top3", rates.top3}}}};
}

}  // namespace crashfl
