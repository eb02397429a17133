// SPDX-License-Identifier: Apache-2.0
#include "crashfl/evalkit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_set>

namespace crashfl {

namespace {

std::string basename_of(const std::string& path) {
    auto pos = path.find_last_of('/');
    return pos == std::string::npos ? path : path.substr(pos + 1);
}

void require_equal_lengths(std::size_t a, std::size_t b) {
    if (a != b) {
        throw LengthMismatch("confidences and labels differ in length: " + std::to_string(a) +
                             " vs " + std::to_string(b));
    }
}

bool both_classes_present(const std::vector<int>& labels) {
    bool has0 = false, has1 = false;
    for (int y : labels) (y ? has1 : has0) = true;
    return has0 && has1;
}

}  // namespace

std::map<int, AccAtK> acc_at_k(const std::map<std::string, std::vector<std::string>>& rankings,
                               const std::map<std::string, GroundTruth>& truth,
                               const std::vector<int>& ks) {
    std::map<int, AccAtK> out;
    const int total = static_cast<int>(rankings.size());
    for (int k : ks) out[k] = AccAtK{};

    for (const auto& [crash_id, ranking] : rankings) {
        auto it = truth.find(crash_id);
        if (it == truth.end()) {
            throw MissingGroundTruth("no ground truth for crash: " + crash_id);
        }
        const std::unordered_set<std::string> buggy(it->second.buggy_files.begin(),
                                                    it->second.buggy_files.end());
        int first_hit = -1;
        for (std::size_t i = 0; i < ranking.size(); ++i) {
            if (buggy.count(ranking[i])) {
                first_hit = static_cast<int>(i) + 1;
                break;
            }
        }
        if (first_hit < 0) continue;
        for (int k : ks) {
            if (first_hit <= k) ++out[k].count;
        }
    }
    for (auto& [k, acc] : out) {
        acc.ratio = total > 0 ? static_cast<double>(acc.count) / total : 0.0;
    }
    return out;
}

bool top1_hit(const std::vector<std::string>& ranking, const GroundTruth& truth) {
    if (ranking.empty()) return false;
    return std::find(truth.buggy_files.begin(), truth.buggy_files.end(), ranking.front()) !=
           truth.buggy_files.end();
}

OverlapCounts top1_overlap(const std::map<std::string, std::vector<std::string>>& a,
                           const std::map<std::string, std::vector<std::string>>& b,
                           const std::map<std::string, GroundTruth>& truth) {
    OverlapCounts out;
    for (const auto& [crash_id, ranking_a] : a) {
        auto itb = b.find(crash_id);
        if (itb == b.end()) continue;
        auto itt = truth.find(crash_id);
        if (itt == truth.end()) {
            throw MissingGroundTruth("no ground truth for crash: " + crash_id);
        }
        const bool hit_a = top1_hit(ranking_a, itt->second);
        const bool hit_b = top1_hit(itb->second, itt->second);
        if (hit_a && hit_b) ++out.both;
        else if (hit_a) ++out.only_a;
        else if (hit_b) ++out.only_b;
    }
    return out;
}

double in_trace_ratio(const CrashStack& stack, const GroundTruth& truth) {
    if (truth.buggy_files.empty()) {
        throw DegenerateInput("in_trace_ratio requires non-empty buggy file set");
    }
    std::unordered_set<std::string> trace_names;
    for (const auto* list : {&stack.pending, &stack.backtrace}) {
        for (const auto& loc : *list) trace_names.insert(basename_of(loc.file_path));
    }
    int hits = 0;
    for (const auto& buggy : truth.buggy_files) {
        if (trace_names.count(basename_of(buggy))) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(truth.buggy_files.size());
}

std::vector<BucketStat> bucket_success(const std::vector<double>& confidences,
                                       const std::vector<int>& labels,
                                       const std::vector<double>& bounds) {
    require_equal_lengths(confidences.size(), labels.size());
    for (std::size_t i = 1; i < bounds.size(); ++i) {
        if (bounds[i] <= bounds[i - 1]) {
            throw DegenerateInput("bucket bounds must be strictly increasing");
        }
    }

    std::vector<BucketStat> buckets;
    double lo = 0.0;
    for (double b : bounds) {
        buckets.push_back({lo, b, 0, std::nullopt});
        lo = b;
    }
    buckets.push_back({lo, 1.0, 0, std::nullopt});

    std::vector<int> successes(buckets.size(), 0);
    for (std::size_t i = 0; i < confidences.size(); ++i) {
        const double c = confidences[i];
        std::size_t slot = 0;
        while (slot + 1 < buckets.size() && c > buckets[slot].hi) ++slot;
        ++buckets[slot].n;
        if (labels[i]) ++successes[slot];
    }
    for (std::size_t i = 0; i < buckets.size(); ++i) {
        if (buckets[i].n > 0) {
            buckets[i].success_ratio = static_cast<double>(successes[i]) / buckets[i].n;
        }
    }
    return buckets;
}

namespace {

double beta_continued_fraction(double a, double b, double x) {
    // Lentz's algorithm for the continued fraction of the incomplete beta.
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-14;
    constexpr double kTiny = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

double pearson_r(const std::vector<double>& x, const std::vector<int>& y) {
    const auto n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) {
        throw DegenerateInput("zero variance in correlation input");
    }
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * beta_continued_fraction(a, b, x) / a;
    }
    return 1.0 - std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          b * std::log1p(-x) + a * std::log(x)) *
                     beta_continued_fraction(b, a, 1.0 - x) / b;
}

PointBiserial point_biserial(const std::vector<double>& confidences,
                             const std::vector<int>& labels) {
    require_equal_lengths(confidences.size(), labels.size());
    if (confidences.size() < 3) {
        throw DegenerateInput("point-biserial needs at least 3 samples");
    }
    if (!both_classes_present(labels)) {
        throw DegenerateInput("point-biserial needs both label classes");
    }

    const double r = pearson_r(confidences, labels);
    const double nu = static_cast<double>(confidences.size()) - 2.0;
    PointBiserial out;
    out.r = r;
    if (std::fabs(r) >= 1.0) {
        out.p_value = 0.0;
        return out;
    }
    const double t2 = r * r * nu / (1.0 - r * r);
    // Two-sided: P(|T| > t) = I_{nu/(nu+t^2)}(nu/2, 1/2).
    out.p_value = regularized_incomplete_beta(nu / 2.0, 0.5, nu / (nu + t2));
    return out;
}

double point_biserial_permutation_p(const std::vector<double>& confidences,
                                    const std::vector<int>& labels, int trials,
                                    std::uint64_t seed) {
    const double observed = std::fabs(point_biserial(confidences, labels).r);
    std::mt19937_64 rng(seed);
    std::vector<int> shuffled = labels;
    int at_least = 0;
    for (int t = 0; t < trials; ++t) {
        for (std::size_t i = shuffled.size(); i > 1; --i) {
            std::swap(shuffled[i - 1], shuffled[rng() % i]);
        }
        if (std::fabs(pearson_r(confidences, shuffled)) >= observed - 1e-15) ++at_least;
    }
    return static_cast<double>(at_least + 1) / static_cast<double>(trials + 1);
}

double brier(const std::vector<double>& confidences, const std::vector<int>& labels) {
    require_equal_lengths(confidences.size(), labels.size());
    if (confidences.empty()) throw LengthMismatch("brier over empty input");
    double sum = 0.0;
    for (std::size_t i = 0; i < confidences.size(); ++i) {
        const double d = confidences[i] - static_cast<double>(labels[i]);
        sum += d * d;
    }
    return sum / static_cast<double>(confidences.size());
}

double CalibrationModel::apply(double p) const {
    return 1.0 / (1.0 + std::exp(-(slope * p + intercept)));
}

CalibrationModel platt_fit(const std::vector<double>& confidences,
                           const std::vector<int>& labels) {
    require_equal_lengths(confidences.size(), labels.size());
    if (!both_classes_present(labels)) {
        throw DegenerateInput("platt_fit needs both label classes");
    }

    constexpr double kLambda = 1e-6;
    constexpr double kTol = 1e-8;
    constexpr int kMaxIter = 100;

    CalibrationModel model;
    double a = 0.0, b = 0.0;
    bool converged = false;
    for (int iter = 0; iter < kMaxIter; ++iter) {
        double ga = kLambda * a, gb = kLambda * b;
        double haa = kLambda, hab = 0.0, hbb = kLambda;
        for (std::size_t i = 0; i < confidences.size(); ++i) {
            const double p = confidences[i];
            const double s = 1.0 / (1.0 + std::exp(-(a * p + b)));
            const double e = s - static_cast<double>(labels[i]);
            const double w = s * (1.0 - s);
            ga += e * p;
            gb += e;
            haa += w * p * p;
            hab += w * p;
            hbb += w;
        }
        if (std::sqrt(ga * ga + gb * gb) < kTol) {
            converged = true;
            break;
        }
        const double det = haa * hbb - hab * hab;
        if (det <= 0.0 || !std::isfinite(det)) break;
        a -= (hbb * ga - hab * gb) / det;
        b -= (haa * gb - hab * ga) / det;
    }
    model.slope = a;
    model.intercept = b;
    model.fallback = !converged;
    return model;
}

std::vector<double> platt_cv(const std::vector<double>& confidences,
                             const std::vector<int>& labels, int folds, std::uint64_t seed,
                             int* fold_fallbacks) {
    require_equal_lengths(confidences.size(), labels.size());
    const std::size_t n = confidences.size();
    if (folds < 2 || static_cast<std::size_t>(folds) > n) {
        throw DegenerateInput("fold count must be in [2, n]");
    }
    if (!both_classes_present(labels)) {
        throw DegenerateInput("platt_cv needs both label classes");
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        std::swap(order[i - 1], order[rng() % i]);
    }
    std::vector<int> fold_of(n);
    for (std::size_t i = 0; i < n; ++i) fold_of[order[i]] = static_cast<int>(i % folds);

    CalibrationModel full;
    bool have_full = false;
    int fallbacks = 0;

    std::vector<double> out(n, 0.0);
    for (int f = 0; f < folds; ++f) {
        std::vector<double> train_x;
        std::vector<int> train_y;
        for (std::size_t i = 0; i < n; ++i) {
            if (fold_of[i] != f) {
                train_x.push_back(confidences[i]);
                train_y.push_back(labels[i]);
            }
        }
        CalibrationModel model;
        if (both_classes_present(train_y)) {
            model = platt_fit(train_x, train_y);
        } else {
            // Single-class training fold: reuse the full-data fit.
            if (!have_full) {
                full = platt_fit(confidences, labels);
                have_full = true;
            }
            model = full;
            ++fallbacks;
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (fold_of[i] == f) out[i] = model.apply(confidences[i]);
        }
    }
    if (fold_fallbacks) *fold_fallbacks = fallbacks;
    return out;
}

nlohmann::json eval_report_to_json(const EvalReport& report) {
    nlohmann::json acc = nlohmann::json::object();
    for (const auto& [k, v] : report.acc_at) {
        acc[std::to_string(k)] = {{"count", v.count}, {"ratio", v.ratio}};
    }
    nlohmann::json per_crash = nlohmann::json::object();
    for (const auto& [id, hit] : report.per_crash_success) per_crash[id] = hit;

    nlohmann::json buckets = nlohmann::json::array();
    for (const auto& b : report.bucket_ratios) {
        nlohmann::json jb{{"lo", b.lo}, {"hi", b.hi}, {"n", b.n}};
        jb["success_ratio"] = b.success_ratio ? nlohmann::json(*b.success_ratio)
                                              : nlohmann::json(nullptr);
        buckets.push_back(jb);
    }

    nlohmann::json doc{{"acc_at", acc},
                       {"per_crash_success", per_crash},
                       {"bucket_ratios", buckets},
                       {"brier_raw", report.brier_raw}};
    doc["point_biserial"] =
        report.correlation
            ? nlohmann::json{{"r", report.correlation->r}, {"p_value", report.correlation->p_value}}
            : nlohmann::json(nullptr);
    doc["brier_calibrated"] =
        report.brier_calibrated ? nlohmann::json(*report.brier_calibrated) : nlohmann::json(nullptr);
    if (report.alignment) {
        doc["alignment"] = {{"overall", (*report.alignment)[0]},
                            {"top1", (*report.alignment)[1]},
                            {"top3", (*report.alignment)[2]}};
    } else {
        doc["alignment"] = nullptr;
    }
    doc["cv_seed"] = report.cv_seed;
    doc["cv_folds"] = report.cv_folds;
    return doc;
}

}  // namespace crashfl
