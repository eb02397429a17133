// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crashfl/crashdump.hpp"

namespace crashfl {

class EvalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class MissingGroundTruth : public EvalError {
public:
    using EvalError::EvalError;
};
class LengthMismatch : public EvalError {
public:
    using EvalError::EvalError;
};
class DegenerateInput : public EvalError {
public:
    using EvalError::EvalError;
};

struct GroundTruth {
    std::string crash_id;
    std::vector<std::string> buggy_files;  // non-empty, normalized like predictions
};

struct AccAtK {
    int count = 0;
    double ratio = 0.0;
};

/// acc@k over a set of rankings: for each k, the number of crashes whose
/// top-k contains at least one ground-truth buggy file. Crashes with empty
/// rankings count as misses at every k.
std::map<int, AccAtK> acc_at_k(const std::map<std::string, std::vector<std::string>>& rankings,
                               const std::map<std::string, GroundTruth>& truth,
                               const std::vector<int>& ks);

/// True when the ranking's first entry is a buggy file.
bool top1_hit(const std::vector<std::string>& ranking, const GroundTruth& truth);

struct OverlapCounts {
    int only_a = 0;
    int both = 0;
    int only_b = 0;
};

/// Venn decomposition of top-1 successes between two ranking sets over the
/// crashes they share.
OverlapCounts top1_overlap(const std::map<std::string, std::vector<std::string>>& a,
                           const std::map<std::string, std::vector<std::string>>& b,
                           const std::map<std::string, GroundTruth>& truth);

/// Fraction of buggy files whose base filename appears among the stack's
/// base filenames (pending and backtrace alike).
double in_trace_ratio(const CrashStack& stack, const GroundTruth& truth);

struct BucketStat {
    double lo = 0.0;  // exclusive, except the first bucket which admits 0
    double hi = 0.0;  // inclusive
    int n = 0;
    std::optional<double> success_ratio;  // absent when the bucket is empty
};

inline const std::vector<double> kDefaultBucketBounds{0.33, 0.66};

/// Success ratio per confidence bucket. Intervals are half-open on the left
/// and closed on the right, e.g. (0, 0.33], (0.33, 0.66], (0.66, 1].
/// A confidence of exactly 0 (empty ranking) joins the first bucket.
std::vector<BucketStat> bucket_success(const std::vector<double>& confidences,
                                       const std::vector<int>& labels,
                                       const std::vector<double>& bounds = kDefaultBucketBounds);

struct PointBiserial {
    double r = 0.0;
    double p_value = 1.0;
};

/// Pearson correlation between continuous scores and 0/1 labels, with a
/// two-sided p-value from the Student-t distribution on n-2 d.o.f.
/// Requires n >= 3 and both label classes present.
PointBiserial point_biserial(const std::vector<double>& confidences,
                             const std::vector<int>& labels);

/// Permutation-test p-value for the same statistic, for cross-checking the
/// parametric result.
double point_biserial_permutation_p(const std::vector<double>& confidences,
                                    const std::vector<int>& labels, int trials,
                                    std::uint64_t seed);

/// Mean squared error between predicted probabilities and binary outcomes.
double brier(const std::vector<double>& confidences, const std::vector<int>& labels);

struct CalibrationModel {
    double slope = 0.0;
    double intercept = 0.0;
    bool fallback = false;  // set when Newton did not converge

    double apply(double p) const;
};

/// Platt scaling: fit sigma(a*p + b) to the labels by Newton iteration on
/// the L2-regularized negative log-likelihood (lambda = 1e-6, tolerance
/// 1e-8 on the gradient norm, at most 100 iterations).
CalibrationModel platt_fit(const std::vector<double>& confidences,
                           const std::vector<int>& labels);

/// K-fold cross-validated calibration: deterministic seeded shuffle, then
/// round-robin fold assignment; each score is calibrated by the model fit
/// on the other folds. A single-class training fold falls back to the
/// full-data fit (flagged via `fold_fallbacks`).
std::vector<double> platt_cv(const std::vector<double>& confidences,
                             const std::vector<int>& labels, int folds, std::uint64_t seed,
                             int* fold_fallbacks = nullptr);

/// Regularized incomplete beta function I_x(a, b); exposed because the
/// evaluation report's p-values flow through it and tests pin it down.
double regularized_incomplete_beta(double a, double b, double x);

struct EvalReport {
    std::map<int, AccAtK> acc_at;
    std::map<std::string, bool> per_crash_success;
    std::vector<BucketStat> bucket_ratios;
    std::optional<PointBiserial> correlation;
    double brier_raw = 0.0;
    std::optional<double> brier_calibrated;
    std::optional<std::array<double, 3>> alignment;  // overall, top1, top3
    std::uint64_t cv_seed = 0;
    int cv_folds = 0;
};

nlohmann::json eval_report_to_json(const EvalReport& report);

}  // namespace crashfl
