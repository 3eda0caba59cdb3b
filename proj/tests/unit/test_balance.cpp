#include "doctest.h"
#include "support.hpp"

#include "spectrabench/balance.hpp"
#include "spectrabench/error.hpp"

#include <algorithm>
#include <map>

using namespace spectrabench;
using namespace sbtest;

namespace {

std::map<int, int> counts(const Labels& y) {
    std::map<int, int> c;
    for (int v : y) ++c[v];
    return c;
}

// True when p = x + u (q - x) for some u in [0, 1], coordinatewise within tol.
bool on_segment(const Eigen::RowVectorXd& p, const Eigen::RowVectorXd& x, const Eigen::RowVectorXd& q, double tol) {
    const Eigen::RowVectorXd d = q - x;
    const double dd = d.squaredNorm();
    double u = dd > 0.0 ? (p - x).dot(d) / dd : 0.0;
    if (u < -tol || u > 1.0 + tol) return false;
    u = std::clamp(u, 0.0, 1.0);
    return ((x + u * d) - p).cwiseAbs().maxCoeff() <= tol;
}

}  // namespace

TEST_CASE("smote leaves balanced data untouched") {
    Rng rng(1);
    Matrix X = random_matrix(rng, 20, 3);
    Labels y(20);
    for (int i = 0; i < 20; ++i) y[static_cast<std::size_t>(i)] = i % 2;
    const auto out = smote(X, y, 5, 7);
    CHECK(out.X == X);
    CHECK(out.y == y);
}

TEST_CASE("smote 1-D hand case") {
    Matrix X(6, 1);
    X << 5, 6, 7, 8, 0, 1;
    const Labels y{0, 0, 0, 0, 1, 1};
    const auto out = smote(X, y, 1, 3);
    REQUIRE(out.X.rows() == 8);
    for (int i = 6; i < 8; ++i) {
        CHECK(out.y[static_cast<std::size_t>(i)] == 1);
        CHECK(out.X(i, 0) >= 0.0);
        CHECK(out.X(i, 0) <= 1.0);
    }
}

TEST_CASE("smote singleton class is an error naming the class") {
    Matrix X(3, 1);
    X << 0, 1, 2;
    try {
        smote(X, {0, 0, 4}, 5, 1);
        FAIL("expected degenerate error");
    } catch (const DegenerateError& e) {
        CHECK(std::string(e.what()).find('4') != std::string::npos);
    }
}

TEST_CASE("smote property: equalized counts, originals first, synthetic rows on neighbor segments") {
    Rng gen(77);
    for (int trial = 0; trial < 100; ++trial) {
        const int K = 2 + static_cast<int>(gen.below(3));
        const int F = 1 + static_cast<int>(gen.below(5));
        const int k = 1 + static_cast<int>(gen.below(6));
        Labels y;
        for (int c = 0; c < K; ++c) {
            const int n = 2 + static_cast<int>(gen.below(15));
            for (int i = 0; i < n; ++i) y.push_back(c);
        }
        gen.shuffle(y);
        const Matrix X = random_matrix(gen, static_cast<Eigen::Index>(y.size()), F, -2, 2);
        const auto out = smote(X, y, k, gen.next_u64());

        const auto before = counts(y);
        int majority = 0;
        for (const auto& [c, n] : before) majority = std::max(majority, n);
        for (const auto& [c, n] : counts(out.y)) CHECK(n == majority);
        CHECK(out.X.topRows(X.rows()) == X);

        for (Eigen::Index s = X.rows(); s < out.X.rows(); ++s) {
            const int c = out.y[static_cast<std::size_t>(s)];
            std::vector<Eigen::Index> members;
            for (Eigen::Index i = 0; i < X.rows(); ++i) {
                if (y[static_cast<std::size_t>(i)] == c) members.push_back(i);
            }
            const int eff = std::min<int>(k, static_cast<int>(members.size()) - 1);
            bool found = false;
            for (auto x : members) {
                // x's eff nearest same-class neighbors; any distance tie counts.
                std::vector<double> dist;
                for (auto q : members) {
                    if (q != x) dist.push_back((X.row(q) - X.row(x)).norm());
                }
                std::sort(dist.begin(), dist.end());
                const double kth = dist[static_cast<std::size_t>(eff - 1)];
                for (auto q : members) {
                    if (q == x || (X.row(q) - X.row(x)).norm() > kth + 1e-12) continue;
                    if (on_segment(out.X.row(s), X.row(x), X.row(q), 1e-9)) found = true;
                }
            }
            CHECK(found);
        }
    }
}

TEST_CASE("smote treats unknown firmness as a fourth class") {
    Rng rng(5);
    const Matrix X = random_matrix(rng, 12, 2);
    const Labels y{0, 0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3};
    const auto out = smote(X, y, 5, 1);
    CHECK(counts(out.y) == std::map<int, int>{{0, 4}, {1, 4}, {2, 4}, {3, 4}});
}

TEST_CASE("random oversample") {
    Matrix X(4, 2);
    X << 1, 1, 2, 2, 3, 3, 9, 8;
    const Labels y{0, 0, 0, 1};
    const auto out = random_oversample(X, y, 4);
    CHECK(counts(out.y) == std::map<int, int>{{0, 3}, {1, 3}});
    for (Eigen::Index i = 4; i < out.X.rows(); ++i) CHECK(out.X.row(i) == X.row(3));

    Rng rng(2);
    const Matrix X2 = random_matrix(rng, 7, 2);
    const Labels y2{0, 0, 0, 0, 0, 1, 1};
    CHECK(random_oversample(X2, y2, 9).X == random_oversample(X2, y2, 9).X);
    CHECK(random_oversample(X2, {0, 1, 0, 1, 0, 1, 1}, 3).X.rows() == 8);
    CHECK_THROWS_AS(random_oversample(Matrix(0, 2), {}, 1), DomainError);
}

TEST_CASE("random undersample") {
    Rng rng(3);
    const Matrix X = random_matrix(rng, 7, 3);
    const Labels y{0, 0, 0, 0, 0, 1, 1};
    const auto out = random_undersample(X, y, 8);
    CHECK(counts(out.y) == std::map<int, int>{{0, 2}, {1, 2}});
    for (Eigen::Index i = 0; i < out.X.rows(); ++i) {
        bool present = false;
        for (Eigen::Index j = 0; j < X.rows(); ++j) present = present || out.X.row(i) == X.row(j);
        CHECK(present);
    }
    CHECK(random_undersample(X, y, 8).X == out.X);

    const auto same = random_undersample(X.topRows(6), {0, 1, 0, 1, 0, 1}, 2);
    CHECK(same.X.rows() == 6);
}

TEST_CASE("apply_balance dispatch") {
    Rng rng(6);
    const Matrix X = random_matrix(rng, 6, 2);
    const Labels y{0, 0, 0, 0, 1, 1};
    CHECK(apply_balance({BalanceKind::original, 5, 1}, X, y).X == X);
    CHECK(apply_balance({BalanceKind::stratified_resplit, 5, 1}, X, y).X == X);
    CHECK(apply_balance({BalanceKind::smote, 5, 1}, X, y).X.rows() == 8);
    CHECK(apply_balance({BalanceKind::oversample, 5, 1}, X, y).X.rows() == 8);
    CHECK(apply_balance({BalanceKind::undersample, 5, 1}, X, y).X.rows() == 4);
    CHECK(parse_balance_kind("smote") == BalanceKind::smote);
    CHECK_THROWS_AS(parse_balance_kind("adasyn"), ConfigError);
}
