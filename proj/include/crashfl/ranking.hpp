// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crashfl/crashdump.hpp"

namespace crashfl {

/// Exact fraction for suspiciousness sums. Votes are 1/|S| with small |S|,
/// so int64 with gcd reduction never gets close to overflow; comparisons
/// cross-multiply in 128 bits anyway.
struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;

    static Rational of(std::int64_t num, std::int64_t den);

    Rational operator+(const Rational& other) const;
    bool operator==(const Rational& other) const;
    bool operator<(const Rational& other) const;

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }

    /// Fixed-point decimal with `digits` fraction digits, round half up.
    /// Rankings serialize at six digits so files are bit-stable.
    std::string decimal_string(int digits = 6) const;
};

struct RankedFile {
    std::string path;
    Rational score;
};

struct ScoredRanking {
    std::vector<RankedFile> entries;  // sorted by score desc, documented tie-break
    int runs = 0;                     // R, counting failed runs
    Rational confidence;              // top score / R, zero when empty

    std::vector<std::string> paths() const;
};

/// Voting aggregation: each run's non-empty predicted set S gives every
/// member 1/|S|; scores add across runs. `run_predictions` must have one
/// entry per launched run (failed runs contribute an empty list) and R is
/// its size. Ties are broken by earliest first suggestion (run index, then
/// position in that run's list), then path.
ScoredRanking aggregate(const std::vector<std::vector<std::string>>& run_predictions, int R);

enum class BaselineKind { B1, B2 };

struct BaselineRanking {
    BaselineKind kind = BaselineKind::B1;
    std::vector<std::string> entries;  // duplicate-free, order preserved
};

/// Files in backtrace order, top (most recent call) first, deduplicated.
BaselineRanking baseline1(const CrashStack& stack);

/// Pending-exception files first, then backtrace files, deduplicated across
/// the concatenation.
BaselineRanking baseline2(const CrashStack& stack);

/// Primary paths in rank order, then filler paths not already present.
std::vector<std::string> augment(const ScoredRanking& primary, const BaselineRanking& filler);

nlohmann::json ranking_to_json(const ScoredRanking& ranking, const std::string& crash_id);
ScoredRanking ranking_from_json(const nlohmann::json& doc);

}  // namespace crashfl
