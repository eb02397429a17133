// SPDX-License-Identifier: Apache-2.0
#include "crashfl/ranking.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace crashfl {

Rational Rational::of(std::int64_t num, std::int64_t den) {
    if (den == 0) throw std::invalid_argument("rational with zero denominator");
    if (den < 0) {
        num = -num;
        den = -den;
    }
    std::int64_t g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) {
        num /= g;
        den /= g;
    }
    return Rational{num, den};
}

Rational Rational::operator+(const Rational& other) const {
    return of(num * other.den + other.num * den, den * other.den);
}

bool Rational::operator==(const Rational& other) const {
    return num == other.num && den == other.den;
}

bool Rational::operator<(const Rational& other) const {
    return static_cast<__int128>(num) * other.den < static_cast<__int128>(other.num) * den;
}

std::string Rational::decimal_string(int digits) const {
    std::int64_t scale = 1;
    for (int i = 0; i < digits; ++i) scale *= 10;
    std::int64_t whole = num / den;
    std::int64_t rem = num % den;
    std::int64_t frac = (rem * scale + den / 2) / den;
    if (frac >= scale) {  // carried over, e.g. 0.9999995 at 6 digits
        ++whole;
        frac -= scale;
    }
    std::string f = std::to_string(frac);
    f.insert(0, static_cast<std::size_t>(digits) - f.size(), '0');
    return std::to_string(whole) + "." + f;
}

std::vector<std::string> ScoredRanking::paths() const {
    std::vector<std::string> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.path);
    return out;
}

ScoredRanking aggregate(const std::vector<std::vector<std::string>>& run_predictions, int R) {
    struct Tally {
        Rational score;
        int first_run = 0;
        int first_pos = 0;
    };
    std::unordered_map<std::string, Tally> totals;

    for (std::size_t run = 0; run < run_predictions.size(); ++run) {
        const auto& files = run_predictions[run];
        if (files.empty()) continue;
        const Rational vote = Rational::of(1, static_cast<std::int64_t>(files.size()));
        for (std::size_t pos = 0; pos < files.size(); ++pos) {
            auto [it, inserted] = totals.try_emplace(
                files[pos], Tally{vote, static_cast<int>(run), static_cast<int>(pos)});
            if (!inserted) it->second.score = it->second.score + vote;
        }
    }

    ScoredRanking out;
    out.runs = R;
    out.entries.reserve(totals.size());
    for (auto& [path, tally] : totals) out.entries.push_back({path, tally.score});

    std::sort(out.entries.begin(), out.entries.end(),
              [&](const RankedFile& a, const RankedFile& b) {
                  if (!(a.score == b.score)) return b.score < a.score;
                  const Tally& ta = totals.at(a.path);
                  const Tally& tb = totals.at(b.path);
                  if (ta.first_run != tb.first_run) return ta.first_run < tb.first_run;
                  if (ta.first_pos != tb.first_pos) return ta.first_pos < tb.first_pos;
                  return a.path < b.path;
              });

    if (!out.entries.empty() && R > 0) {
        const Rational& top = out.entries.front().score;
        out.confidence = Rational::of(top.num, top.den * R);
    }
    return out;
}

namespace {

BaselineRanking dedup_paths(BaselineKind kind,
                            std::initializer_list<const std::vector<StackLocation>*> lists) {
    BaselineRanking out;
    out.kind = kind;
    std::unordered_set<std::string> seen;
    for (const auto* locs : lists) {
        for (const auto& loc : *locs) {
            if (seen.insert(loc.file_path).second) out.entries.push_back(loc.file_path);
        }
    }
    return out;
}

}  // namespace

BaselineRanking baseline1(const CrashStack& stack) {
    return dedup_paths(BaselineKind::B1, {&stack.backtrace});
}

BaselineRanking baseline2(const CrashStack& stack) {
    return dedup_paths(BaselineKind::B2, {&stack.pending, &stack.backtrace});
}

std::vector<std::string> augment(const ScoredRanking& primary, const BaselineRanking& filler) {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (const auto& e : primary.entries) {
        if (seen.insert(e.path).second) out.push_back(e.path);
    }
    for (const auto& path : filler.entries) {
        if (seen.insert(path).second) out.push_back(path);
    }
    return out;
}

nlohmann::json ranking_to_json(const ScoredRanking& ranking, const std::string& crash_id) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : ranking.entries) {
        entries.push_back({{"path", e.path}, {"score", e.score.decimal_string()}});
    }
    return nlohmann::json{{"crash_id", crash_id},
                          {"R", ranking.runs},
                          {"confidence", ranking.confidence.decimal_string()},
                          {"entries", entries}};
}

namespace {

Rational rational_from_decimal(const std::string& text) {
    auto dot = text.find('.');
    if (dot == std::string::npos) return Rational::of(std::stoll(text), 1);
    const std::string whole = text.substr(0, dot);
    const std::string frac = text.substr(dot + 1);
    std::int64_t scale = 1;
    for (std::size_t i = 0; i < frac.size(); ++i) scale *= 10;
    std::int64_t value = std::stoll(whole) * scale;
    if (!frac.empty()) value += std::stoll(frac);
    return Rational::of(value, scale);
}

}  // namespace

ScoredRanking ranking_from_json(const nlohmann::json& doc) {
    ScoredRanking out;
    out.runs = doc.at("R").get<int>();
    out.confidence = rational_from_decimal(doc.at("confidence").get<std::string>());
    for (const auto& e : doc.at("entries")) {
        out.entries.push_back(
            {e.at("path").get<std::string>(), rational_from_decimal(e.at("score").get<std::string>())});
    }
    return out;
}

}  // namespace crashfl
