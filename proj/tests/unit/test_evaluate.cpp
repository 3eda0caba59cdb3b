#include "doctest.h"
#include "support.hpp"

#include "spectrabench/error.hpp"
#include "spectrabench/evaluate.hpp"

#include <cmath>
#include <map>
#include <set>

using namespace spectrabench;
using namespace sbtest;

namespace {

// Brute-force per-class scores straight from label vectors.
struct Oracle {
    double precision, recall, f1;
    int support;
};

Oracle oracle(const Labels& t, const Labels& p, int c) {
    int tp = 0, pred = 0, truth = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        tp += t[i] == c && p[i] == c;
        pred += p[i] == c;
        truth += t[i] == c;
    }
    const double prec = pred ? static_cast<double>(tp) / pred : 0.0;
    const double rec = truth ? static_cast<double>(tp) / truth : 0.0;
    return {prec, rec, prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0, truth};
}

}  // namespace

TEST_CASE("confusion hand cases") {
    const auto cm = confusion({0, 0, 1}, {0, 1, 1}, {0, 1});
    CHECK(cm.counts == std::vector<std::vector<std::int64_t>>{{1, 1}, {0, 1}});
    const auto diag = confusion({0, 1, 2, 1}, {0, 1, 2, 1}, {0, 1, 2});
    CHECK(diag.counts[1][1] == 2);
    CHECK(diag.counts[0][1] == 0);
    const auto empty = confusion({}, {}, {0, 1});
    CHECK(empty.total() == 0);
    CHECK_THROWS_AS(confusion({0}, {}, {0, 1}), ShapeError);
    CHECK_THROWS_AS(confusion({5}, {0}, {0, 1}), LabelError);
}

TEST_CASE("task metrics hand case") {
    const auto m = task_metrics(confusion({0, 0, 1}, {0, 1, 1}, {0, 1}));
    CHECK(m.per_class.at(0).precision == 1.0);
    CHECK(m.per_class.at(1).precision == 0.5);
    CHECK(m.per_class.at(0).recall == 0.5);
    CHECK(m.per_class.at(1).recall == 1.0);
    CHECK(m.per_class.at(0).f1 == doctest::Approx(2.0 / 3.0));
    CHECK(m.f1_macro == doctest::Approx(2.0 / 3.0));
    const auto perfect = task_metrics(confusion({0, 1, 2}, {0, 1, 2}, {0, 1, 2}));
    CHECK(perfect.accuracy == 1.0);
    CHECK(perfect.f1_macro == 1.0);
    CHECK(perfect.f1_weighted == 1.0);
    // Class 2 never true and never predicted: excluded from the macro mean.
    const auto absent = task_metrics(confusion({0, 1}, {0, 1}, {0, 1, 2}));
    CHECK(absent.f1_macro == 1.0);
}

TEST_CASE("metrics agree with brute force on 200 random label vectors") {
    Rng rng(42);
    for (int t = 0; t < 200; ++t) {
        const int K = 2 + static_cast<int>(rng.below(4));
        const std::size_t n = 1 + rng.below(80);
        Labels yt(n), yp(n), classes;
        for (int c = 0; c < K; ++c) classes.push_back(c);
        for (std::size_t i = 0; i < n; ++i) {
            yt[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(K)));
            yp[i] = rng.uniform() < 0.5 ? yt[i] : static_cast<int>(rng.below(static_cast<std::uint64_t>(K)));
        }
        const auto m = task_metrics(confusion(yt, yp, classes));
        double macro = 0.0, weighted = 0.0, lo = 1.0, hi = 0.0;
        int present = 0, hits = 0;
        for (std::size_t i = 0; i < n; ++i) hits += yt[i] == yp[i];
        for (int c = 0; c < K; ++c) {
            const auto o = oracle(yt, yp, c);
            CHECK(m.per_class.at(c).precision == doctest::Approx(o.precision).epsilon(1e-12));
            CHECK(m.per_class.at(c).recall == doctest::Approx(o.recall).epsilon(1e-12));
            CHECK(m.per_class.at(c).f1 == doctest::Approx(o.f1).epsilon(1e-12));
            if (o.support > 0) {
                ++present;
                macro += o.f1;
                weighted += o.f1 * o.support / static_cast<double>(n);
                lo = std::min(lo, o.f1);
                hi = std::max(hi, o.f1);
            }
        }
        CHECK(m.accuracy == doctest::Approx(static_cast<double>(hits) / n).epsilon(1e-12));
        CHECK(m.f1_macro == doctest::Approx(macro / present).epsilon(1e-12));
        CHECK(std::abs(m.f1_weighted - weighted) <= 1e-12);
        CHECK(m.f1_macro <= hi + 1e-12);
        CHECK(m.f1_macro >= lo - 1e-12);
    }
}

TEST_CASE("paired metrics") {
    // 63 of 100 ripeness right, 87 of 100 firmness right.
    Labels rt(100, 0), rp(100, 0), ft(100, 1), fp(100, 1);
    for (int i = 63; i < 100; ++i) rp[static_cast<std::size_t>(i)] = 1;
    for (int i = 87; i < 100; ++i) fp[static_cast<std::size_t>(i)] = 2;
    const auto m = score_tasks(rt, rp, ft, fp);
    CHECK(m.ripeness.accuracy == doctest::Approx(0.63));
    CHECK(m.firmness.accuracy == doctest::Approx(0.87));
    CHECK(m.overall_accuracy == (m.ripeness.accuracy + m.firmness.accuracy) / 2.0);
    CHECK(m.overall_accuracy == doctest::Approx(0.75));

    // Unknown true firmness rows do not count, whatever was predicted for them.
    const auto u = score_tasks({0, 1}, {0, 1}, {0, 3, 3}, {0, 1, 2});
    CHECK(u.firmness.n_scored == 1);
    CHECK(u.firmness.accuracy == 1.0);
    CHECK(u.overall_accuracy == 1.0);
    CHECK(u.mean_f1_macro == 1.0);
}

TEST_CASE("stratified folds keep class proportions") {
    Rng rng(3);
    for (int t = 0; t < 30; ++t) {
        Labels y;
        const int K = 2 + static_cast<int>(rng.below(3));
        for (int c = 0; c < K; ++c) {
            const int n = 10 + static_cast<int>(rng.below(40));
            for (int i = 0; i < n; ++i) y.push_back(c);
        }
        rng.shuffle(y);
        const int k = 2 + static_cast<int>(rng.below(9));
        const auto fold = stratified_folds(y, k, rng.next_u64());
        std::map<int, int> total;
        for (int c : y) ++total[c];
        for (int f = 0; f < k; ++f) {
            std::map<int, int> in;
            int size = 0;
            for (std::size_t i = 0; i < y.size(); ++i) {
                if (fold[i] == f) {
                    ++in[y[i]];
                    ++size;
                }
            }
            for (const auto& [c, n] : total) {
                CHECK(std::abs(in[c] - static_cast<double>(n) / k) <= 1.0);
            }
        }
    }
    CHECK_THROWS_AS(stratified_folds({0, 1}, 1, 0), DomainError);
}

TEST_CASE("cross-validation: disjoint folds, determinism, constant predictor") {
    Rng rng(4);
    LabeledFeatures data;
    Matrix X;
    Labels y;
    blobs(rng, 20, 3, 3, 3.0, X, y);
    data.X = X;
    data.ripeness = y;
    data.firmness = y;
    for (std::size_t i = 0; i < y.size(); ++i) data.ids.push_back("id" + std::to_string(i));
    PipelineConfig cfg;
    cfg.model = {"knn", {}, 0};
    const auto a = cross_validate(cfg, data, 5, 11);
    const auto b = cross_validate(cfg, data, 5, 11);
    CHECK(a.fold_of == b.fold_of);
    CHECK(a.summary.at("overall_accuracy").mean == b.summary.at("overall_accuracy").mean);
    CHECK(a.per_fold.size() == 5);
    for (int c : a.oof_ripeness) CHECK(c >= 0);
    std::size_t scored = 0;
    for (const auto& m : a.per_fold) scored += static_cast<std::size_t>(m.ripeness.n_scored);
    CHECK(scored == data.size());
    CHECK(a.summary.at("overall_accuracy").mean > 0.9);
    const auto& s = a.summary.at("acc_r");
    CHECK(s.ci_lo <= s.mean);
    CHECK(s.ci_hi >= s.mean);

    // A prior-only model always predicts the majority class (0 holds 40 of 60).
    LabeledFeatures skew = data;
    for (std::size_t i = 0; i < skew.size(); ++i) skew.ripeness[i] = skew.firmness[i] = i < 40 ? 0 : 1;
    PipelineConfig stump;
    stump.model = {"decision_tree", {{"max_depth", std::int64_t{1}}, {"min_samples_leaf", std::int64_t{60}}}, 0};
    const auto c = cross_validate(stump, skew, 5, 3);
    CHECK(c.summary.at("acc_r").mean == doctest::Approx(40.0 / 60.0).epsilon(1e-9));

    CHECK_THROWS_AS(cross_validate(cfg, data, 1, 0), DomainError);
    LabeledFeatures tiny = data.rows({0, 1, 2, 20, 21, 22, 40, 41, 42});
    const auto r = cross_validate(cfg, tiny, 10, 0);
    CHECK(r.k == 3);
    CHECK_FALSE(r.warning.empty());
}

TEST_CASE("summary uses the t quantile times the sample std") {
    const auto s = summarize({1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
    CHECK(s.mean == 5.5);
    CHECK(s.std == doctest::Approx(3.0276503540974917));
    CHECK(s.ci_hi - s.mean == doctest::Approx(2.2621571627409915 * 3.0276503540974917));
    CHECK(s.cv_coefficient == doctest::Approx(3.0276503540974917 / 5.5));
}

TEST_CASE("wilson interval") {
    const auto [lo, hi] = wilson_ci(104, 138, 0.95);
    CHECK(std::abs(lo - 0.676) <= 0.001);
    CHECK(std::abs(hi - 0.818) <= 0.001);
    const auto [l2, h2] = wilson_ci(50, 100, 0.95);
    CHECK(std::abs(l2 - 0.404) <= 0.001);
    CHECK(std::abs(h2 - 0.596) <= 0.001);
    CHECK(wilson_ci(0, 10, 0.95).first == 0.0);
    CHECK(wilson_ci(10, 10, 0.95).second == 1.0);
    CHECK(successes_from_rate(0.75, 138) == 104);
    Rng rng(5);
    for (int t = 0; t < 500; ++t) {
        const auto n = static_cast<std::int64_t>(1 + rng.below(500));
        const auto k = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(n) + 1));
        const auto [a, b] = wilson_ci(k, n, 0.95);
        const double p = static_cast<double>(k) / static_cast<double>(n);
        CHECK(a >= 0.0);
        CHECK(b <= 1.0);
        CHECK(a <= p + 1e-12);
        CHECK(b >= p - 1e-12);
    }
}

TEST_CASE("paired cohen's d") {
    CHECK(cohen_d_paired({1, 3, 1, 3}, {0, 4, 0, 4}) == doctest::Approx(0.0));
    CHECK_THROWS_AS(cohen_d_paired({2, 3, 4}, {1, 2, 3}), DegenerateError);
    Rng rng(6);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> a(10), b(10);
        for (int i = 0; i < 10; ++i) {
            a[static_cast<std::size_t>(i)] = rng.normal();
            b[static_cast<std::size_t>(i)] = rng.normal();
        }
        CHECK(cohen_d_paired(a, b) == doctest::Approx(-cohen_d_paired(b, a)));
    }
}

TEST_CASE("friedman") {
    Matrix strict(3, 2);
    strict << 0.9, 0.8, 0.7, 0.6, 0.5, 0.4;
    const auto r = friedman(strict);
    CHECK(r.chi2 == doctest::Approx(4.0));
    CHECK(r.dof == 2);
    CHECK(r.mean_ranks == std::vector<double>{1.0, 2.0, 3.0});
    CHECK(r.p == doctest::Approx(std::exp(-2.0)));

    CHECK(friedman(Matrix::Constant(4, 5, 0.7)).chi2 == 0.0);

    Rng rng(7);
    for (int t = 0; t < 30; ++t) {
        const Matrix S = random_matrix(rng, 5, 6, 0, 1);
        const double base = friedman(S).chi2;
        CHECK(base >= 0.0);
        Matrix shifted = S;
        for (Eigen::Index j = 0; j < S.cols(); ++j) shifted.col(j).array() += rng.uniform(-1, 1);
        CHECK(friedman(shifted).chi2 == doctest::Approx(base));
        Matrix permuted = S;
        permuted.row(0).swap(permuted.row(3));
        CHECK(friedman(permuted).chi2 == doctest::Approx(base));
    }
}

TEST_CASE("nemenyi") {
    CHECK(nemenyi_q(2) == doctest::Approx(1.959964));
    CHECK(nemenyi_q(10) == doctest::Approx(3.163684));
    CHECK_THROWS_AS(nemenyi_q(21), UnsupportedError);
    CHECK_THROWS_AS(nemenyi_q(5, 0.1), UnsupportedError);

    const auto same = nemenyi(Matrix::Constant(5, 10, 0.5));
    for (const auto& row : same.significant)
        for (bool s : row) CHECK_FALSE(s);

    const auto two = nemenyi(Matrix::Constant(2, 4, 0.5));
    CHECK(two.critical_difference == doctest::Approx(1.959964 * std::sqrt(1.0 / 4.0)));

    Matrix S(20, 10);
    for (int m = 0; m < 20; ++m) S.row(m).setConstant(1.0 - 0.01 * m);
    const auto r = nemenyi(S);
    CHECK(r.mean_ranks.front() == 1.0);
    CHECK(r.mean_ranks.back() == 20.0);
    CHECK(r.significant[0][19]);
    CHECK(r.critical_difference == doctest::Approx(3.543799 * std::sqrt(20.0 * 21.0 / 60.0)));
}

TEST_CASE("bootstrap median range difference") {
    const auto flat = bootstrap_median_range_diff(Matrix::Constant(4, 5, 0.8), 200, 1);
    CHECK(flat.lo == 0.0);
    CHECK(flat.hi == 0.0);

    // Every column spans 10 across models, every row spans 4 across configs.
    Matrix G(6, 5);
    for (int m = 0; m < 6; ++m)
        for (int c = 0; c < 5; ++c) G(m, c) = 2.0 * m + (c % 2 == 0 ? 0.0 : 4.0) * (m % 2 == 0 ? 1.0 : -1.0);
    std::vector<double> col_r, row_r;
    for (int c = 0; c < 5; ++c) col_r.push_back(G.col(c).maxCoeff() - G.col(c).minCoeff());
    for (int m = 0; m < 6; ++m) row_r.push_back(G.row(m).maxCoeff() - G.row(m).minCoeff());
    CHECK(row_r == std::vector<double>(6, 4.0));
    const auto r = bootstrap_median_range_diff(G, 2000, 9);
    const double expect_col = [&] {
        std::sort(col_r.begin(), col_r.end());
        return col_r[2];
    }();
    CHECK(r.statistic == doctest::Approx(expect_col - 4.0));
    CHECK(r.lo <= r.statistic);
    CHECK(r.hi >= r.statistic);
    const auto again = bootstrap_median_range_diff(G, 2000, 9);
    CHECK(again.lo == r.lo);
    CHECK(again.hi == r.hi);
}

TEST_CASE("bootstrap on a grid with uniform ranges") {
    // Columns span 10 and rows span 4: the statistic is exactly 6.
    Matrix G(2, 2);
    G << 0, 4, 10, 14;
    const auto r = bootstrap_median_range_diff(G, 500, 2);
    CHECK(r.statistic == doctest::Approx(6.0));
}

TEST_CASE("measure") {
    const auto noop = measure([] { return 1; });
    CHECK(noop.result == 1);
    CHECK(noop.wall_time_s < 1e-3);
    CHECK(noop.size_bytes == 0);
}
