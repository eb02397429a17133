// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crashfl/crashdump.hpp"

namespace crashfl {

class CorpusError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// How a generated crash can be solved. Mirrors the observed regimes:
/// backtrace-top crashes fall to both heuristics, pending-only crashes to
/// the pending-first heuristic, and deep-search crashes only to an agent
/// that resolves a symbol definition outside the trace.
enum class Difficulty { StackTop, PendingOnly, DeepSearch };

std::string_view to_string(Difficulty difficulty);

struct CorpusEntry {
    std::string crash_id;
    std::string dump_path;  // relative to the manifest directory
    std::string repo_path;
    std::string revision;
    std::vector<std::string> buggy_files;
    std::string crash_type;
    std::string script_path;      // empty when absent
    std::string postmortem_path;  // empty when absent

    // Generation metadata: predetermined outcomes the tests assert.
    std::string difficulty;
    int buggy_rank = 1;  // position of the buggy file in the scripted answer
    int answer_size = 1; // |S| of the scripted answer set
    bool expect_b1_top1 = false;
    bool expect_b2_top1 = false;
};

struct CorpusManifest {
    std::uint64_t seed = 0;
    std::vector<CorpusEntry> entries;
};

struct MixEntry {
    CrashType type;
    double ratio;
};

/// Crash-type proportions of the published distribution (SIGABRT-heavy).
std::vector<MixEntry> default_crash_mix();

/// Exact per-type counts for n crashes via largest-remainder rounding.
std::vector<std::pair<CrashType, int>> mix_counts(const std::vector<MixEntry>& mix, int n);

/// Generate `n_crashes` synthetic crashes under `out_dir`: a small C++
/// repository with one planted buggy file, a 50+-section dump whose stack
/// places the buggy file per the difficulty class, a scripted agent
/// trajectory that replays a localization, and a postmortem text. Output is
/// byte-identical for identical (seed, n, mix).
CorpusManifest generate_corpus(std::uint64_t seed, int n_crashes,
                               const std::vector<MixEntry>& mix,
                               const std::filesystem::path& out_dir);

/// Check every manifest invariant; one diagnostic string per violation.
std::vector<std::string> validate_manifest(const CorpusManifest& manifest,
                                           const std::filesystem::path& base_dir);

nlohmann::json manifest_to_json(const CorpusManifest& manifest);
CorpusManifest manifest_from_json(const nlohmann::json& doc);
CorpusManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const CorpusManifest& manifest, const std::filesystem::path& path);

}  // namespace crashfl
