// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crashfl/agent.hpp"

namespace crashfl {

class ExplainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class NoSourceRuns : public ExplainError {
public:
    using ExplainError::ExplainError;
};
class UnparseableVerdict : public ExplainError {
public:
    using ExplainError::ExplainError;
};

struct FileExplanation {
    std::string path;
    std::vector<int> source_runs;  // exactly the runs whose prediction contains path
    std::string consolidated;
};

/// Offline consolidation: the single source explanation verbatim, or the
/// explanations concatenated under run-index headers when several runs
/// flagged the file.
FileExplanation consolidate(const std::vector<AgentRun>& runs, const std::string& path);

/// Backend-assisted consolidation: summarize the gathered explanations in
/// one completion using the "consolidate" prompt block.
FileExplanation consolidate(const std::vector<AgentRun>& runs, const std::string& path,
                            ChatBackend& backend, const PromptSet& prompts);

struct Verdict {
    enum class Label { Aligned, Misaligned };
    Label label = Label::Misaligned;
    int votes_aligned = 0;
    int votes_total = 0;
};

/// Majority vote over `judges` independent completions; each reply must
/// contain "aligned" or "misaligned" (one retry per judge, then
/// UnparseableVerdict). `judges` must be odd so ties cannot happen.
Verdict judge(ChatBackend& backend, const PromptSet& prompts, const std::string& postmortem,
              const std::string& explanation, int judges = 5);

struct AlignmentRates {
    double overall = 0.0;
    double top1 = 0.0;
    double top3 = 0.0;
};

/// Per-crash verdict lists, ordered by ranking position. Overall counts a
/// crash when any verdict is Aligned; top1/top3 restrict to positions 1 and
/// 1..3.
AlignmentRates alignment_rates(
    const std::map<std::string, std::vector<std::pair<std::string, Verdict>>>& per_crash);

nlohmann::json alignment_report_to_json(
    const std::map<std::string, std::vector<std::pair<std::string, Verdict>>>& per_crash,
    const AlignmentRates& rates);

}  // namespace crashfl
