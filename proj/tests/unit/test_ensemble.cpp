#include "doctest.h"
#include "support.hpp"

#include "spectrabench/ensemble.hpp"
#include "spectrabench/error.hpp"

#include <map>

using namespace spectrabench;
using namespace sbtest;

namespace {

PipelineConfig config(const std::string& model, ParamMap params = {}, std::uint64_t seed = 42) {
    PipelineConfig c;
    c.model = {model, std::move(params), 0};
    c.seed = seed;
    return c;
}

std::vector<PipelineConfig> mixed_bases() {
    return {config("knn", {{"n_neighbors", std::int64_t{3}}}), config("gaussian_nb"),
            config("decision_tree", {{"max_depth", std::int64_t{3}}}), config("logistic_regression"),
            config("knn", {{"n_neighbors", std::int64_t{15}}})};
}

}  // namespace

TEST_CASE("identical bases: every strategy reproduces the single model") {
    Rng rng(1);
    Matrix X;
    Labels y;
    blobs(rng, 25, 3, 4, 3.0, X, y);
    const Matrix probe = random_matrix(rng, 60, 4, -2, 8);
    const auto single = fit_pipeline(config("knn"), X, y).predict(probe);
    for (auto kind : {EnsembleKind::hard_vote, EnsembleKind::soft_vote}) {
        EnsembleSpec spec;
        spec.kind = kind;
        spec.base = {config("knn"), config("knn"), config("knn")};
        CHECK(fit_ensemble(spec, X, y).predict(probe) == single);
    }
    // Meta learners see three copies of well separated probabilities.
    Matrix Xs;
    Labels ys;
    blobs(rng, 25, 3, 4, 8.0, Xs, ys);
    const Matrix near = Xs + 0.1 * random_matrix(rng, Xs.rows(), Xs.cols());
    const auto single_s = fit_pipeline(config("knn"), Xs, ys).predict(near);
    for (auto kind : {EnsembleKind::stacking, EnsembleKind::blending}) {
        EnsembleSpec spec;
        spec.kind = kind;
        spec.base = {config("knn"), config("knn"), config("knn")};
        CHECK(fit_ensemble(spec, Xs, ys).predict(near) == single_s);
    }
}

TEST_CASE("hard vote is the plurality with ties to the lowest class") {
    Rng rng(2);
    Matrix X;
    Labels y;
    blobs(rng, 20, 3, 3, 1.0, X, y);
    EnsembleSpec spec;
    spec.kind = EnsembleKind::hard_vote;
    spec.base = mixed_bases();
    spec.base.pop_back();  // four voters, so ties happen
    const auto e = fit_ensemble(spec, X, y);
    const Matrix probe = random_matrix(rng, 300, 3, -3, 5);
    const auto got = e.predict(probe);
    std::vector<Labels> votes;
    for (const auto& b : e.base()) votes.push_back(b.predict(probe));
    for (std::size_t i = 0; i < got.size(); ++i) {
        std::map<int, int> count;
        for (const auto& v : votes) ++count[v[i]];
        int best = -1, best_n = 0;
        for (const auto& [c, n] : count) {
            if (n > best_n) {
                best = c;
                best_n = n;
            }
        }
        CHECK(got[i] == best);
        CHECK(count.count(got[i]) == 1);
    }
}

TEST_CASE("soft vote averages aligned base probabilities") {
    Rng rng(3);
    Matrix X;
    Labels y;
    blobs(rng, 20, 3, 3, 1.5, X, y);
    EnsembleSpec spec;
    spec.kind = EnsembleKind::soft_vote;
    spec.base = {config("gaussian_nb"), config("logistic_regression")};
    const auto e = fit_ensemble(spec, X, y);
    const Matrix probe = random_matrix(rng, 50, 3, -3, 5);
    const Matrix mean =
        (e.base()[0].predict_proba_aligned(probe, e.classes()) + e.base()[1].predict_proba_aligned(probe, e.classes())) / 2.0;
    CHECK((e.predict_proba(probe) - mean).cwiseAbs().maxCoeff() < 1e-15);
    const auto labels = e.predict(probe);
    for (Eigen::Index i = 0; i < probe.rows(); ++i) {
        Eigen::Index at = 0;
        mean.row(i).maxCoeff(&at);
        CHECK(labels[static_cast<std::size_t>(i)] == e.classes()[static_cast<std::size_t>(at)]);
    }
}

TEST_CASE("stacking meta-features come from models that never saw the row") {
    Rng rng(4);
    Matrix X;
    Labels y;
    blobs(rng, 20, 2, 2, 0.8, X, y);  // heavily overlapping
    EnsembleSpec spec;
    spec.kind = EnsembleKind::stacking;
    spec.base = {config("knn", {{"n_neighbors", std::int64_t{1}}}), config("gaussian_nb")};
    const auto e = fit_ensemble(spec, X, y);
    const Matrix& M = e.meta_features();
    REQUIRE(M.rows() == X.rows());
    REQUIRE(M.cols() == 4);
    const auto& fold = e.meta_fold_of();
    int misses = 0;
    for (int f = 0; f <= *std::max_element(fold.begin(), fold.end()); ++f) {
        std::vector<std::size_t> in, out;
        for (std::size_t i = 0; i < y.size(); ++i) (fold[i] == f ? out : in).push_back(i);
        // 1-NN is seed-free, so refitting on the other folds must reproduce the block exactly.
        const auto nn = fit_pipeline(spec.base[0], select_rows(X, in), select(y, in));
        const Matrix P = nn.predict_proba_aligned(select_rows(X, out), e.classes());
        for (std::size_t r = 0; r < out.size(); ++r) {
            const auto row = static_cast<Eigen::Index>(out[r]);
            CHECK(M.row(row).head(2) == P.row(static_cast<Eigen::Index>(r)));
            misses += M(row, y[out[r]]) < 0.5;
        }
    }
    // An in-sample 1-NN would score every row correctly.
    CHECK(misses > 0);
}

TEST_CASE("a single training class is predicted by every strategy") {
    Rng rng(5);
    const Matrix X = random_matrix(rng, 30, 3);
    const Labels y(30, 2);
    const Matrix probe = random_matrix(rng, 10, 3, -5, 5);
    for (auto kind : {EnsembleKind::hard_vote, EnsembleKind::soft_vote, EnsembleKind::stacking, EnsembleKind::blending}) {
        EnsembleSpec spec;
        spec.kind = kind;
        spec.base = mixed_bases();
        CHECK(fit_ensemble(spec, X, y).predict(probe) == Labels(10, 2));
    }
}

TEST_CASE("ensemble spec validation and flags") {
    EnsembleSpec spec;
    spec.base = {config("knn")};
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec.base.push_back(config("ridge"));
    spec.holdout_frac = 1.0;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec.holdout_frac = 0.2;
    CHECK_NOTHROW(spec.validate());
    CHECK(parse_ensemble_kind("blending") == EnsembleKind::blending);
    CHECK_THROWS_AS(parse_ensemble_kind("bagging"), ConfigError);

    Rng rng(6);
    Matrix X;
    Labels y;
    blobs(rng, 20, 3, 3, 3.0, X, y);
    spec.kind = EnsembleKind::blending;
    const auto e = fit_ensemble(spec, X, y);
    REQUIRE(e.flags().size() == 1);
    CHECK(e.flags()[0].find("ridge") != std::string::npos);
    CHECK(e.meta_features().rows() == 12);  // 20% of each class of 20
    const Matrix P = e.predict_proba(X);
    CHECK((P.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-9);
}
