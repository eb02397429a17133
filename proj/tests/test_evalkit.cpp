// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "crashfl/evalkit.hpp"

using namespace crashfl;

namespace {

using Rankings = std::map<std::string, std::vector<std::string>>;
using Truth = std::map<std::string, GroundTruth>;

// Prefix-scan oracle: walk positions 1..k and look for any buggy file.
std::map<int, int> acc_oracle(const Rankings& rankings, const Truth& truth,
                              const std::vector<int>& ks) {
    std::map<int, int> counts;
    for (int k : ks) counts[k] = 0;
    for (const auto& [id, ranking] : rankings) {
        const auto& buggy = truth.at(id).buggy_files;
        for (int k : ks) {
            bool hit = false;
            for (int i = 0; i < k && i < static_cast<int>(ranking.size()); ++i) {
                if (std::find(buggy.begin(), buggy.end(), ranking[static_cast<std::size_t>(i)]) !=
                    buggy.end()) {
                    hit = true;
                    break;
                }
            }
            counts[k] += hit;
        }
    }
    return counts;
}

}  // namespace

TEST_CASE("acc_at_k basics") {
    Truth truth{{"c1", {"c1", {"b"}}}};
    CHECK(acc_at_k({{"c1", {"a", "b"}}}, truth, {1, 2}).at(1).count == 0);
    CHECK(acc_at_k({{"c1", {"a", "b"}}}, truth, {1, 2}).at(2).count == 1);
    CHECK(acc_at_k({{"c1", {"b", "a"}}}, truth, {1}).at(1).count == 1);
    CHECK(acc_at_k({{"c1", {}}}, truth, {1, 2, 3}).at(3).count == 0);  // empty ranking = miss
    CHECK_THROWS_AS(acc_at_k({{"c9", {"a"}}}, truth, {1}), MissingGroundTruth);
}

TEST_CASE("acc_at_k matches the prefix-scan oracle on a synthetic corpus") {
    std::mt19937_64 rng(112233);
    const std::vector<std::string> files = {"a", "b", "c", "d", "e", "f", "g", "h"};
    Rankings rankings;
    Truth truth;
    for (int i = 0; i < 50; ++i) {
        const std::string id = "crash_" + std::to_string(i);
        std::vector<std::string> shuffled = files;
        for (std::size_t j = shuffled.size(); j > 1; --j) {
            std::swap(shuffled[j - 1], shuffled[rng() % j]);
        }
        rankings[id].assign(shuffled.begin(), shuffled.begin() + rng() % shuffled.size());
        truth[id] = {id, {files[rng() % files.size()], files[rng() % files.size()]}};
    }
    const std::vector<int> ks = {1, 2, 3, 5, 10};
    const auto got = acc_at_k(rankings, truth, ks);
    const auto oracle = acc_oracle(rankings, truth, ks);
    int previous = 0;
    for (int k : ks) {
        CHECK(got.at(k).count == oracle.at(k));
        CHECK(got.at(k).count >= previous);  // monotone in k
        CHECK(got.at(k).ratio == doctest::Approx(oracle.at(k) / 50.0));
        previous = got.at(k).count;
    }
}

TEST_CASE("top1_overlap decomposes successes") {
    Truth truth{{"c1", {"c1", {"x"}}}, {"c2", {"c2", {"y"}}}};
    const Rankings a{{"c1", {"x"}}, {"c2", {"q"}}};
    const Rankings b{{"c1", {"q"}}, {"c2", {"y"}}};
    const OverlapCounts disjoint = top1_overlap(a, b, truth);
    CHECK(disjoint.only_a == 1);
    CHECK(disjoint.both == 0);
    CHECK(disjoint.only_b == 1);

    const OverlapCounts identical = top1_overlap(a, a, truth);
    CHECK(identical.only_a == 0);
    CHECK(identical.both == 1);
    CHECK(identical.only_b == 0);
}

TEST_CASE("top1_overlap matches set algebra on random data") {
    std::mt19937_64 rng(9090);
    Rankings a, b;
    Truth truth;
    for (int i = 0; i < 40; ++i) {
        const std::string id = "c" + std::to_string(i);
        truth[id] = {id, {"buggy"}};
        a[id] = {rng() % 2 ? "buggy" : "other"};
        b[id] = {rng() % 2 ? "buggy" : "other"};
    }
    int only_a = 0, both = 0, only_b = 0;
    for (const auto& [id, ra] : a) {
        const bool ha = ra[0] == "buggy";
        const bool hb = b[id][0] == "buggy";
        only_a += ha && !hb;
        both += ha && hb;
        only_b += !ha && hb;
    }
    const OverlapCounts got = top1_overlap(a, b, truth);
    CHECK(got.only_a == only_a);
    CHECK(got.both == both);
    CHECK(got.only_b == only_b);
}

TEST_CASE("in_trace_ratio over basenames") {
    CrashStack stack;
    stack.backtrace = {{"src/a.cpp", 1, CrashOrigin::Backtrace, 0, {}},
                       {"src/deep/b.cpp", 2, CrashOrigin::Backtrace, 1, {}}};
    stack.pending = {{"src/c.cpp", 3, CrashOrigin::PendingException, 0, {}}};

    CHECK(in_trace_ratio(stack, {"x", {"lib/a.cpp", "b.cpp", "c.cpp"}}) == doctest::Approx(1.0));
    CHECK(in_trace_ratio(stack, {"x", {"z.cpp"}}) == doctest::Approx(0.0));
    CHECK(in_trace_ratio(stack, {"x", {"a.cpp", "z.cpp", "w.cpp"}}) == doctest::Approx(1.0 / 3));
    CHECK_THROWS_AS(in_trace_ratio(stack, {"x", {}}), DegenerateInput);
}

TEST_CASE("bucket_success with the default three buckets") {
    const auto buckets = bucket_success({0.2, 0.5, 0.9}, {0, 1, 1});
    REQUIRE(buckets.size() == 3);
    CHECK(buckets[0].n == 1);
    CHECK(*buckets[0].success_ratio == doctest::Approx(0.0));
    CHECK(buckets[1].n == 1);
    CHECK(*buckets[1].success_ratio == doctest::Approx(1.0));
    CHECK(buckets[2].n == 1);
    CHECK(*buckets[2].success_ratio == doctest::Approx(1.0));
}

TEST_CASE("empty buckets report no ratio") {
    const auto buckets = bucket_success({0.9, 0.95}, {1, 0});
    CHECK(buckets[0].n == 0);
    CHECK(!buckets[0].success_ratio.has_value());
    CHECK(buckets[2].n == 2);
}

TEST_CASE("bucket boundaries are closed on the right") {
    const auto buckets = bucket_success({0.33, 0.66, 1.0}, {1, 1, 1});
    CHECK(buckets[0].n == 1);  // 0.33 belongs to (0, 0.33]
    CHECK(buckets[1].n == 1);  // 0.66 belongs to (0.33, 0.66]
    CHECK(buckets[2].n == 1);
    CHECK_THROWS_AS(bucket_success({0.5}, {1}, {0.6, 0.4}), DegenerateInput);
    CHECK_THROWS_AS(bucket_success({0.5, 0.6}, {1}), LengthMismatch);
}

TEST_CASE("point_biserial reproduces the hand-computed case") {
    // x = [0.9, 0.8, 0.1, 0.2], y = [1, 1, 0, 0]:
    // cov = 0.175, sd_x = sqrt(0.125), sd_y = 0.5 -> r = 0.175/0.176777 = 0.98995.
    const PointBiserial result = point_biserial({0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0});
    CHECK(result.r == doctest::Approx(0.9899).epsilon(0.001));
    CHECK(result.p_value > 0.0);
    CHECK(result.p_value < 0.05);
}

TEST_CASE("point_biserial degenerate inputs") {
    CHECK_THROWS_AS(point_biserial({0.1, 0.2, 0.3}, {1, 1, 1}), DegenerateInput);
    CHECK_THROWS_AS(point_biserial({0.1, 0.2}, {1, 0}), DegenerateInput);
}

TEST_CASE("anti-correlated scores give a negative r") {
    const PointBiserial result =
        point_biserial({0.1, 0.9, 0.1, 0.9, 0.1, 0.9}, {1, 0, 1, 0, 1, 0});
    CHECK(result.r < 0.0);
}

TEST_CASE("r is invariant under positive affine rescaling") {
    std::mt19937_64 rng(606);
    std::vector<double> conf;
    std::vector<int> labels;
    for (int i = 0; i < 100; ++i) {
        conf.push_back(static_cast<double>(rng() % 1000) / 1000.0);
        labels.push_back(static_cast<int>(rng() % 2));
    }
    const double r0 = point_biserial(conf, labels).r;
    std::vector<double> scaled;
    for (double c : conf) scaled.push_back(3.5 * c + 11.0);
    CHECK(std::fabs(point_biserial(scaled, labels).r - r0) < 1e-9);
    CHECK(r0 >= -1.0);
    CHECK(r0 <= 1.0);
}

namespace {

// Independent check of the Student-t tail: Simpson integration of the pdf.
double t_two_sided_p_numeric(double t, double nu) {
    const double norm =
        std::exp(std::lgamma((nu + 1) / 2) - std::lgamma(nu / 2)) / std::sqrt(nu * M_PI);
    auto pdf = [&](double x) { return norm * std::pow(1 + x * x / nu, -(nu + 1) / 2); };
    const int steps = 20000;
    const double h = t / steps;
    double integral = pdf(0.0) + pdf(t);
    for (int i = 1; i < steps; ++i) integral += 2.0 * (1 + i % 2) * pdf(i * h);
    integral *= h / 3.0;
    return 1.0 - 2.0 * integral;  // P(|T| > t)
}

}  // namespace

TEST_CASE("t-distribution p-values agree with numeric integration") {
    for (const auto& [t, nu] : std::vector<std::pair<double, double>>{
             {1.0, 10}, {2.0, 5}, {0.5, 30}, {3.2, 12}}) {
        const double via_beta = regularized_incomplete_beta(nu / 2, 0.5, nu / (nu + t * t));
        CHECK(via_beta == doctest::Approx(t_two_sided_p_numeric(t, nu)).epsilon(1e-6));
    }
    CHECK(regularized_incomplete_beta(1, 1, 0.37) == doctest::Approx(0.37));
    CHECK(regularized_incomplete_beta(2.5, 1.5, 0.6) ==
          doctest::Approx(1.0 - regularized_incomplete_beta(1.5, 2.5, 0.4)));
}

TEST_CASE("permutation p-value agrees with the parametric one in magnitude") {
    std::mt19937_64 rng(321);
    std::vector<double> conf;
    std::vector<int> labels;
    for (int i = 0; i < 60; ++i) {
        const int y = static_cast<int>(rng() % 2);
        conf.push_back(0.3 * y + 0.35 + static_cast<double>(rng() % 100) / 400.0);
        labels.push_back(y);
    }
    const PointBiserial parametric = point_biserial(conf, labels);
    const double permuted = point_biserial_permutation_p(conf, labels, 2000, 99);
    CHECK(parametric.p_value < 0.01);
    CHECK(permuted < 0.01);
}

TEST_CASE("brier score basics") {
    CHECK(brier({1.0, 0.0, 1.0}, {1, 0, 1}) == doctest::Approx(0.0));
    CHECK(brier({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0}) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(brier({1.0, 0.0}, {0, 1}) == doctest::Approx(1.0));
    CHECK_THROWS_AS(brier({}, {}), LengthMismatch);
    CHECK_THROWS_AS(brier({0.5}, {1, 0}), LengthMismatch);
}

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Independent oracle: backtracking gradient descent on the same objective
// platt_fit minimizes (NLL + lambda/2 * ||theta||^2).
struct PlattOracle {
    double a = 0.0;
    double b = 0.0;

    static double objective(double a, double b, const std::vector<double>& x,
                            const std::vector<int>& y) {
        constexpr double kLambda = 1e-6;
        double nll = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double z = a * x[i] + b;
            // log(1 + e^z) - y z, numerically stable form
            nll += (z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z))) - y[i] * z;
        }
        return nll + 0.5 * kLambda * (a * a + b * b);
    }

    void fit(const std::vector<double>& x, const std::vector<int>& y) {
        constexpr double kLambda = 1e-6;
        a = 0.0;
        b = 0.0;
        for (int iter = 0; iter < 50000; ++iter) {
            double ga = kLambda * a, gb = kLambda * b;
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double e = sigmoid(a * x[i] + b) - y[i];
                ga += e * x[i];
                gb += e;
            }
            const double norm = std::sqrt(ga * ga + gb * gb);
            if (norm < 1e-9) break;
            double step = 4.0;
            const double now = objective(a, b, x, y);
            while (step > 1e-12 &&
                   objective(a - step * ga, b - step * gb, x, y) > now - 0.25 * step * norm * norm) {
                step /= 2;
            }
            a -= step * ga;
            b -= step * gb;
        }
    }
};

}  // namespace

TEST_CASE("platt_fit agrees with the gradient-descent oracle on separable data") {
    const std::vector<double> conf = {0.9, 0.9, 0.1, 0.1};
    const std::vector<int> labels = {1, 1, 0, 0};

    PlattOracle oracle;
    oracle.fit(conf, labels);
    const CalibrationModel model = platt_fit(conf, labels);

    for (double p : conf) {
        const double expected = sigmoid(oracle.a * p + oracle.b);
        CHECK(model.apply(p) == doctest::Approx(expected).epsilon(1e-3));
    }
    std::vector<double> calibrated;
    for (double p : conf) calibrated.push_back(model.apply(p));
    for (std::size_t i = 0; i < conf.size(); ++i) {
        CHECK(std::fabs(calibrated[i] - labels[i]) < 0.05);
    }
    CHECK(brier(calibrated, labels) < 0.01);
}

TEST_CASE("platt_fit on label-independent confidences flattens to the base rate") {
    std::mt19937_64 rng(2024);
    std::vector<double> conf;
    std::vector<int> labels;
    for (int i = 0; i < 200; ++i) {
        conf.push_back(static_cast<double>(rng() % 1000) / 999.0);
        labels.push_back(i % 2);  // success rate 0.5, independent of conf
    }
    const CalibrationModel model = platt_fit(conf, labels);
    std::vector<double> calibrated;
    for (double p : conf) calibrated.push_back(model.apply(p));
    for (double c : calibrated) {
        CHECK(c == doctest::Approx(0.5).epsilon(0.2));  // 0.5 +- 0.1 absolute
        CHECK(std::fabs(c - 0.5) < 0.1);
    }
    CHECK(brier(calibrated, labels) <= 0.25 + 0.01);
}

TEST_CASE("platt_fit recovers near-identity on already-calibrated data") {
    // y ~ Bernoulli(sigmoid(p)): the generating map IS sigmoid(1*p + 0).
    std::mt19937_64 rng(515151);
    std::vector<double> conf;
    std::vector<int> labels;
    for (int i = 0; i < 4000; ++i) {
        const double p = static_cast<double>(rng() % 10000) / 9999.0;
        conf.push_back(p);
        const double u = static_cast<double>(rng() % 1000000) / 1000000.0;
        labels.push_back(u < sigmoid(p) ? 1 : 0);
    }
    const CalibrationModel model = platt_fit(conf, labels);
    PlattOracle oracle;
    oracle.fit(conf, labels);
    CHECK(model.slope == doctest::Approx(oracle.a).epsilon(1e-3));
    CHECK(model.intercept == doctest::Approx(oracle.b).epsilon(1e-3));
    CHECK(std::fabs(model.slope - 1.0) < 0.5);
    CHECK(std::fabs(model.intercept) < 0.3);

    std::vector<double> calibrated;
    for (double p : conf) calibrated.push_back(model.apply(p));
    CHECK(brier(calibrated, labels) <= brier(conf, labels) + 0.005);
}

TEST_CASE("platt_fit calibrated outputs are monotone in the input") {
    std::mt19937_64 rng(808);
    std::vector<double> conf;
    std::vector<int> labels;
    for (int i = 0; i < 300; ++i) {
        const double p = static_cast<double>(rng() % 1000) / 999.0;
        conf.push_back(p);
        labels.push_back(rng() % 1000 < 1000 * p * p ? 1 : 0);
    }
    const CalibrationModel model = platt_fit(conf, labels);
    std::vector<double> sorted = conf;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        if (model.slope > 0) {
            CHECK(model.apply(sorted[i]) >= model.apply(sorted[i - 1]));
        } else {
            CHECK(model.apply(sorted[i]) <= model.apply(sorted[i - 1]));
        }
    }
    CHECK_THROWS_AS(platt_fit({0.1, 0.2}, {1, 1}), DegenerateInput);
}

TEST_CASE("platt_cv reduces the Brier score on miscalibrated data") {
    // True success probability is conf^2, so raw confidences overstate.
    std::mt19937_64 rng(424242);
    std::vector<double> conf;
    std::vector<int> labels;
    for (int i = 0; i < 500; ++i) {
        const double p = static_cast<double>(rng() % 10000) / 9999.0;
        conf.push_back(p);
        const double u = static_cast<double>(rng() % 1000000) / 1000000.0;
        labels.push_back(u < p * p ? 1 : 0);
    }
    const std::vector<double> calibrated = platt_cv(conf, labels, 5, 17);
    CHECK(brier(calibrated, labels) < brier(conf, labels));

    // Fixed seed: bit-identical outputs.
    const std::vector<double> again = platt_cv(conf, labels, 5, 17);
    CHECK(calibrated == again);
    const std::vector<double> other_seed = platt_cv(conf, labels, 5, 18);
    CHECK(other_seed != calibrated);
}

TEST_CASE("platt_cv leave-one-out on a tiny set stays in (0,1)") {
    const std::vector<double> conf = {0.9, 0.8, 0.2, 0.1, 0.6, 0.4};
    const std::vector<int> labels = {1, 1, 0, 0, 1, 0};
    const auto calibrated = platt_cv(conf, labels, static_cast<int>(conf.size()), 5);
    REQUIRE(calibrated.size() == conf.size());
    for (double c : calibrated) {
        CHECK(c > 0.0);
        CHECK(c < 1.0);
    }
    CHECK_THROWS_AS(platt_cv(conf, labels, 1, 5), DegenerateInput);
    CHECK_THROWS_AS(platt_cv(conf, labels, 7, 5), DegenerateInput);
}

TEST_CASE("single-class training folds fall back to the full fit") {
    // One lonely positive: whichever fold holds it trains single-class.
    const std::vector<double> conf = {0.9, 0.1, 0.2, 0.3, 0.15, 0.25};
    const std::vector<int> labels = {1, 0, 0, 0, 0, 0};
    int fallbacks = 0;
    const auto calibrated = platt_cv(conf, labels, 2, 3, &fallbacks);
    CHECK(calibrated.size() == conf.size());
    CHECK(fallbacks >= 1);
}

TEST_CASE("eval report serializes cleanly") {
    EvalReport report;
    report.acc_at = {{1, {3, 0.3}}, {2, {5, 0.5}}};
    report.per_crash_success = {{"c1", true}, {"c2", false}};
    report.bucket_ratios = bucket_success({0.2, 0.9}, {0, 1});
    report.brier_raw = 0.25;
    const nlohmann::json doc = eval_report_to_json(report);
    CHECK(doc["acc_at"]["1"]["count"] == 3);
    CHECK(doc["brier_raw"] == 0.25);
    CHECK(doc["point_biserial"].is_null());
    CHECK(doc["brier_calibrated"].is_null());
    CHECK(doc["per_crash_success"]["c1"] == true);
}
