#include "doctest.h"
#include "support.hpp"

#include "spectrabench/error.hpp"
#include "spectrabench/pipeline.hpp"

#include <cmath>

using namespace spectrabench;
using namespace sbtest;

TEST_CASE("scaler hand cases") {
    Matrix X(2, 2);
    X << 1, 5, 3, 5;
    const auto s = fit_scaler(X);
    CHECK(s.means[0] == 2.0);
    CHECK(s.stds[0] == 1.0);
    CHECK(s.stds[1] == 0.0);
    const Matrix Z = s.transform(X);
    CHECK(Z(0, 0) == -1.0);
    CHECK(Z(1, 0) == 1.0);
    CHECK(Z.col(1).isZero());
    CHECK_THROWS_AS(fit_scaler(Matrix(0, 3)), DomainError);
}

TEST_CASE("scaled training columns have mean 0 and population std 1") {
    Rng rng(1);
    for (int t = 0; t < 20; ++t) {
        const Matrix X = random_matrix(rng, 5 + static_cast<Eigen::Index>(rng.below(30)), 6, -10, 30);
        const Matrix Z = fit_scaler(X).transform(X);
        for (Eigen::Index j = 0; j < Z.cols(); ++j) {
            const double mean = Z.col(j).mean();
            const double sd = std::sqrt((Z.col(j).array() - mean).square().mean());
            CHECK(std::abs(mean) < 1e-9);
            CHECK(std::abs(sd - 1.0) < 1e-9);
        }
    }
}

TEST_CASE("PCA on collinear points keeps one component") {
    Matrix X(6, 3);
    for (int i = 0; i < 6; ++i) X.row(i) << i, 2.0 * i + 1.0, -0.5 * i;
    const auto p = fit_pca(X, 0.95);
    CHECK(p.k == 1);
    CHECK(p.explained_variance_ratio[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(fit_pca(Matrix::Ones(5, 3), 0.95), DegenerateError);
    CHECK_THROWS_AS(fit_pca(X, 0.0), DomainError);
    CHECK_THROWS_AS(fit_pca(X, 1.5), DomainError);
}

TEST_CASE("PCA on an isotropic 2-D sample needs both components for 95%") {
    Rng rng(2);
    Matrix X(2000, 2);
    for (Eigen::Index i = 0; i < X.rows(); ++i) X.row(i) << rng.normal(), rng.normal();
    CHECK(fit_pca(X, 0.95).k == 2);
}

TEST_CASE("PCA invariants and reconstruction bound") {
    Rng rng(3);
    for (int t = 0; t < 20; ++t) {
        const Eigen::Index n = 10 + static_cast<Eigen::Index>(rng.below(30));
        const Eigen::Index f = 3 + static_cast<Eigen::Index>(rng.below(40));
        Matrix X = random_matrix(rng, n, f);
        X.col(0) *= 5.0;
        const double target = rng.uniform(0.5, 1.0);
        const auto p = fit_pca(X, target);
        const Matrix G = p.components * p.components.transpose();
        CHECK((G - Matrix::Identity(p.k, p.k)).cwiseAbs().maxCoeff() < 1e-8);
        for (int c = 0; c < p.k; ++c) {
            CHECK(p.explained_variance_ratio[c] > 0.0);
            if (c > 0) CHECK(p.explained_variance_ratio[c] <= p.explained_variance_ratio[c - 1] + 1e-15);
            Eigen::Index at = 0;
            p.components.row(c).cwiseAbs().maxCoeff(&at);
            CHECK(p.components(c, at) > 0.0);
        }
        const double achieved = p.explained_variance_ratio.sum();
        CHECK(achieved <= 1.0 + 1e-9);
        CHECK(achieved >= target - 1e-12);
        const Matrix Xc = X.rowwise() - p.mean.transpose();
        const double total = Xc.squaredNorm();
        const double lost = (X - p.inverse_transform(p.transform(X))).squaredNorm();
        CHECK(lost <= (1.0 - achieved) * total * (1.0 + 1e-6) + 1e-12);
    }
}

TEST_CASE("pipeline stages") {
    Rng rng(4);
    Matrix X;
    Labels y;
    blobs(rng, 20, 3, 8, 2.0, X, y);
    PipelineConfig cfg;
    cfg.model = {"knn", {}, 0};
    const auto plain = fit_pipeline(cfg, X, y);
    CHECK_FALSE(plain.pca().has_value());
    CHECK(plain.model().n_features() == 8);

    cfg.use_pca = true;
    const auto with_pca = fit_pipeline(cfg, X, y);
    REQUIRE(with_pca.pca().has_value());
    CHECK(with_pca.model().n_features() == static_cast<std::size_t>(with_pca.pca()->k));

    const Matrix probe = random_matrix(rng, 40, 8, -2, 6);
    cfg.model = {"random_forest", {{"n_estimators", std::int64_t{10}}}, 0};
    cfg.balance.kind = BalanceKind::smote;
    CHECK(fit_pipeline(cfg, X, y).predict(probe) == fit_pipeline(cfg, X, y).predict(probe));
}

TEST_CASE("fitted transforms read training rows only") {
    Rng rng(5);
    Matrix X;
    Labels y;
    blobs(rng, 20, 2, 5, 1.0, X, y);
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < y.size(); ++i) (i % 4 == 0 ? test : train).push_back(i);
    PipelineConfig cfg;
    cfg.use_pca = true;
    cfg.model = {"gaussian_nb", {}, 0};
    const auto before = fit_pipeline(cfg, select_rows(X, train), select(y, train));
    Matrix mutated = X;
    for (auto i : test) mutated.row(static_cast<Eigen::Index>(i)).setConstant(1e6);
    const auto after = fit_pipeline(cfg, select_rows(mutated, train), select(y, train));
    CHECK(before.scaler().means == after.scaler().means);
    CHECK(before.scaler().stds == after.scaler().stds);
    CHECK(before.pca()->components == after.pca()->components);
}

TEST_CASE("PCA fitted on different folds differs") {
    Rng rng(6);
    Matrix X;
    Labels y;
    blobs(rng, 30, 2, 6, 1.0, X, y);
    std::vector<std::size_t> a, b;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (i % 5 != 0) a.push_back(i);
        if (i % 5 != 1) b.push_back(i);
    }
    PipelineConfig cfg;
    cfg.use_pca = true;
    cfg.model = {"gaussian_nb", {}, 0};
    const auto pa = fit_pipeline(cfg, select_rows(X, a), select(y, a));
    const auto pb = fit_pipeline(cfg, select_rows(X, b), select(y, b));
    CHECK((pa.pca()->mean - pb.pca()->mean).cwiseAbs().maxCoeff() > 0.0);
    CHECK((pa.scaler().means - pb.scaler().means).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("pipeline artifact round trip and aligned probabilities") {
    Rng rng(7);
    Matrix X;
    Labels y;
    blobs(rng, 15, 2, 4, 2.0, X, y);
    for (auto& v : y) v += 1;  // classes {1, 2}
    PipelineConfig cfg;
    cfg.use_pca = true;
    cfg.model = {"logistic_regression", {{"C", 3.0}}, 0};
    const auto p = fit_pipeline(cfg, X, y);
    ByteWriter w;
    p.save(w);
    ByteReader r(w.bytes());
    const auto back = FittedPipeline::load(r);
    const Matrix probe = random_matrix(rng, 10, 4);
    CHECK(back.predict_proba(probe) == p.predict_proba(probe));

    const Matrix A = p.predict_proba_aligned(probe, {0, 1, 2, 3});
    CHECK(A.col(0).isZero());
    CHECK(A.col(3).isZero());
    CHECK(A.col(1) == p.predict_proba(probe).col(0));
    CHECK_THROWS_AS(p.predict_proba_aligned(probe, {1}), ShapeError);
}
