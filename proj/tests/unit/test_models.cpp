#include "doctest.h"
#include "support.hpp"

#include "spectrabench/error.hpp"
#include "spectrabench/models/forest.hpp"
#include "spectrabench/models/linear.hpp"
#include "spectrabench/models/model.hpp"
#include "spectrabench/models/neighbors.hpp"

#include <cmath>
#include <numeric>

using namespace spectrabench;
using namespace sbtest;

namespace {

double accuracy(const Labels& a, const Labels& b) {
    int hits = 0;
    for (std::size_t i = 0; i < a.size(); ++i) hits += a[i] == b[i];
    return static_cast<double>(hits) / static_cast<double>(a.size());
}

ModelSpec small_spec(const std::string& name) {
    ModelSpec s{name, {}, 5};
    if (name == "random_forest" || name == "extra_trees") s.hyperparams["n_estimators"] = std::int64_t{25};
    if (name == "gradient_boosting") s.hyperparams["n_estimators"] = std::int64_t{30};
    return s;
}

}  // namespace

TEST_CASE("every built-in model separates two blobs") {
    Rng rng(10);
    Matrix X;
    Labels y;
    blobs(rng, 40, 2, 2, 8.0, X, y);
    for (const auto& name : builtin_model_names()) {
        CAPTURE(name);
        const auto m = fit_model(small_spec(name), X, y);
        CHECK(accuracy(m.predict(X), y) >= 0.95);
        CHECK(m.model_size_bytes() > 0);
        CHECK(m.train_time_s() >= 0.0);
    }
}

TEST_CASE("probability rows sum to one and argmax equals predict") {
    Rng rng(11);
    Matrix X;
    Labels y;
    blobs(rng, 20, 3, 4, 1.0, X, y);
    for (auto& v : y) v = v * 10 + 1;  // labels 1, 11, 21
    const Matrix probe = random_matrix(rng, 50, 4, -3, 5);
    for (const auto& name : builtin_model_names()) {
        CAPTURE(name);
        const auto m = fit_model(small_spec(name), X, y);
        CHECK(m.classes() == Labels{1, 11, 21});
        const Matrix P = m.predict_proba(probe);
        const Labels pred = m.predict(probe);
        for (Eigen::Index i = 0; i < P.rows(); ++i) {
            CHECK(std::abs(P.row(i).sum() - 1.0) < 1e-9);
            CHECK(P.row(i).minCoeff() >= 0.0);
            CHECK(pred[static_cast<std::size_t>(i)] == m.classes()[static_cast<std::size_t>(argmax_row(P, i))]);
        }
        const bool softmax_scores = name == "ridge" || name == "plsda";
        CHECK(m.calibrated() == !softmax_scores);
    }
}

TEST_CASE("argmax ties go to the lower index") {
    Matrix P(2, 3);
    P << 0.4, 0.4, 0.2, 0.2, 0.4, 0.4;
    CHECK(argmax_row(P, 0) == 0);
    CHECK(argmax_row(P, 1) == 1);
}

TEST_CASE("a depth-1 tree cannot fit XOR") {
    Matrix X(4, 2);
    X << 0, 0, 0, 1, 1, 0, 1, 1;
    const Labels y{0, 1, 1, 0};
    Matrix Xr(40, 2);
    Labels yr;
    for (int r = 0; r < 10; ++r) {
        Xr.middleRows(4 * r, 4) = X;
        yr.insert(yr.end(), y.begin(), y.end());
    }
    const auto m = fit_model({"decision_tree", {{"max_depth", std::int64_t{1}}}, 1}, Xr, yr);
    CHECK(accuracy(m.predict(Xr), yr) <= 0.75);
}

TEST_CASE("single-tree forests are deterministic per seed") {
    Rng rng(12);
    Matrix X;
    Labels y;
    blobs(rng, 30, 3, 5, 1.0, X, y);
    const Matrix probe = random_matrix(rng, 200, 5, -2, 4);
    for (const char* name : {"random_forest", "extra_trees"}) {
        ModelSpec s{name, {{"n_estimators", std::int64_t{1}}}, 99};
        CHECK(fit_model(s, X, y).predict_proba(probe) == fit_model(s, X, y).predict_proba(probe));
    }
}

TEST_CASE("1-NN recalls its own training labels") {
    Rng rng(13);
    const Matrix X = random_matrix(rng, 60, 3);
    Labels y(60);
    for (auto& v : y) v = static_cast<int>(rng.below(3));
    y[0] = 0;
    y[1] = 1;
    y[2] = 2;
    for (const char* w : {"uniform", "distance"}) {
        const auto m = fit_model({"knn", {{"n_neighbors", std::int64_t{1}}, {"weights", std::string(w)}}, 1}, X, y);
        CHECK(m.predict(X) == y);
    }
}

TEST_CASE("gaussian NB boundary between two symmetric classes sits at zero") {
    Matrix X(8, 1);
    X << -1.5, -0.5, -1.25, -0.75, 0.5, 1.5, 0.75, 1.25;
    const Labels y{0, 0, 0, 0, 1, 1, 1, 1};
    const auto m = fit_model({"gaussian_nb", {}, 1}, X, y);
    double lo = -0.9, hi = 0.9;
    for (int it = 0; it < 100; ++it) {
        const double mid = (lo + hi) / 2.0;
        Matrix q(1, 1);
        q << mid;
        const Matrix P = m.predict_proba(q);
        (P(0, 0) > P(0, 1) ? lo : hi) = mid;
    }
    CHECK(std::abs((lo + hi) / 2.0) < 1e-6);
}

TEST_CASE("gaussian NB variance floor follows the largest feature variance") {
    Matrix X(4, 2);
    X << 0, 0, 2, 0, 0, 10, 2, 10;
    GaussianNbModel nb;
    nb.configure({{"var_smoothing", 1e-3}}, 0);
    nb.fit(X, {0, 0, 1, 1}, 2);
    CHECK(nb.epsilon() == doctest::Approx(1e-3 * 25.0));
}

TEST_CASE("tree importances") {
    Rng rng(14);
    Matrix X = random_matrix(rng, 80, 6);
    Labels y(80);
    for (Eigen::Index i = 0; i < 80; ++i) y[static_cast<std::size_t>(i)] = X(i, 3) > 0.1 ? 1 : 0;
    const auto stump = fit_model({"decision_tree", {{"max_depth", std::int64_t{1}}}, 1}, X, y);
    const auto imp = stump.importance();
    REQUIRE(imp.has_value());
    Vector onehot = Vector::Zero(6);
    onehot[3] = 1.0;
    CHECK((*imp - onehot).cwiseAbs().maxCoeff() < 1e-12);

    Matrix Xc = X;
    Xc.col(5).setConstant(0.5);  // never split on
    for (const std::string name : {"decision_tree", "random_forest", "extra_trees", "gradient_boosting"}) {
        CAPTURE(name);
        const auto m = fit_model(small_spec(name), Xc, y);
        const auto v = m.importance();
        REQUIRE(v.has_value());
        CHECK(std::abs(v->sum() - 1.0) < 1e-9);
        CHECK(v->minCoeff() >= 0.0);
        CHECK((*v)[5] == 0.0);
    }
    for (const std::string name : {"knn", "gaussian_nb", "logistic_regression", "ridge", "plsda"}) {
        CHECK_FALSE(fit_model(small_spec(name), X, y).importance().has_value());
    }
}

TEST_CASE("fit errors") {
    Rng rng(15);
    Matrix X = random_matrix(rng, 10, 2);
    CHECK_THROWS_AS(fit_model({"knn", {}, 1}, X, Labels(10, 2)), DegenerateError);
    Labels y{0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
    Matrix bad = X;
    bad(3, 1) = std::nan("");
    CHECK_THROWS_AS(fit_model({"knn", {}, 1}, bad, y), DomainError);
    CHECK_THROWS_AS(fit_model({"knn", {}, 1}, X, Labels{0, 1}), ShapeError);
    CHECK_THROWS_AS(fit_model({"svm", {}, 1}, X, y), ConfigError);
    CHECK_THROWS_AS(fit_model({"knn", {{"leaf_size", std::int64_t{3}}}, 1}, X, y), ConfigError);
    CHECK_THROWS_AS(fit_model({"knn", {{"p", std::int64_t{3}}}, 1}, X, y), ConfigError);
    const auto m = fit_model({"knn", {}, 1}, X, y);
    CHECK_THROWS_AS(m.predict(random_matrix(rng, 3, 5)), ShapeError);
}

TEST_CASE("deterministic models are equivariant to training row order") {
    Rng rng(16);
    Matrix X;
    Labels y;
    blobs(rng, 25, 3, 4, 1.5, X, y);
    std::vector<std::size_t> perm(y.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(perm);
    const Matrix Xp = select_rows(X, perm);
    const Labels yp = select(y, perm);
    const Matrix probe = random_matrix(rng, 100, 4, -2, 5);
    for (const std::string name : {"decision_tree", "knn", "gaussian_nb", "ridge", "plsda"}) {
        CAPTURE(name);
        CHECK(fit_model(small_spec(name), X, y).predict(probe) == fit_model(small_spec(name), Xp, yp).predict(probe));
    }
}

TEST_CASE("tree predictions survive strictly monotone feature transforms") {
    Rng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        Matrix X;
        Labels y;
        blobs(rng, 15, 3, 3, 1.0, X, y);
        // Midpoint thresholds move under the warp, so a point strictly inside a node's
        // threshold gap may switch sides; training rows never are.
        const Matrix& probe = X;
        auto warp = [](const Matrix& M) { return Matrix(M.array().exp() * 3.0 + M.array().pow(3)); };
        for (const std::string name : {"decision_tree", "gradient_boosting"}) {
            CAPTURE(name);
            const auto a = fit_model(small_spec(name), X, y).predict(probe);
            const auto b = fit_model(small_spec(name), warp(X), y).predict(warp(probe));
            CHECK(a == b);
        }
    }
}

TEST_CASE("gradient boosting training deviance never increases") {
    Rng rng(18);
    Matrix X;
    Labels y;
    blobs(rng, 30, 3, 5, 0.8, X, y);
    GradientBoostingModel gb;
    gb.configure({{"n_estimators", std::int64_t{60}}, {"learning_rate", 0.2}}, 3);
    std::vector<int> idx(y.begin(), y.end());
    gb.fit(X, idx, 3);
    const auto& dev = gb.train_deviance();
    REQUIRE(dev.size() == 61);
    for (std::size_t r = 1; r < dev.size(); ++r) CHECK(dev[r] <= dev[r - 1] + 1e-12);
    CHECK(dev.back() < dev.front());
}

TEST_CASE("logistic objective gradient matches central differences") {
    Rng rng(19);
    for (bool l2 : {true, false}) {
        for (int trial = 0; trial < 10; ++trial) {
            const Matrix X = random_matrix(rng, 30, 4);
            std::vector<int> y(30);
            for (auto& v : y) v = static_cast<int>(rng.below(3));
            const std::vector<double> w(30, 1.0);
            const LogisticObjective obj{X, y, w, rng.uniform(0.1, 10.0), l2};
            const Matrix W = random_matrix(rng, 3, 4);
            const Vector b = random_matrix(rng, 3, 1);
            Matrix gW;
            Vector gb;
            obj.value_and_gradient(W, b, gW, gb);
            const double h = 1e-6;
            Matrix nW(3, 4);
            Vector nb(3);
            for (int k = 0; k < 3; ++k) {
                for (int f = 0; f < 4; ++f) {
                    Matrix Wp = W, Wm = W;
                    Wp(k, f) += h;
                    Wm(k, f) -= h;
                    nW(k, f) = (obj.value(Wp, b) - obj.value(Wm, b)) / (2 * h);
                }
                Vector bp = b, bm = b;
                bp[k] += h;
                bm[k] -= h;
                nb[k] = (obj.value(W, bp) - obj.value(W, bm)) / (2 * h);
            }
            const double scale = std::sqrt(gW.squaredNorm() + gb.squaredNorm());
            const double err = std::sqrt((nW - gW).squaredNorm() + (nb - gb).squaredNorm());
            CHECK(err / scale < 1e-5);
        }
    }
}

TEST_CASE("logistic regression converges on separable-ish data") {
    Rng rng(20);
    Matrix X;
    Labels y;
    blobs(rng, 30, 3, 3, 2.0, X, y);
    LogisticRegressionModel lr;
    lr.configure({{"C", 1.0}}, 0);
    lr.fit(X, std::vector<int>(y.begin(), y.end()), 3);
    CHECK(lr.converged());
    LogisticRegressionModel l1;
    l1.configure({{"C", 0.05}, {"penalty", std::string("l1")}}, 0);
    Matrix Xn(X.rows(), 5);
    Xn << X, random_matrix(rng, X.rows(), 2);
    l1.fit(Xn, std::vector<int>(y.begin(), y.end()), 3);
    CHECK(l1.converged());
    // Strong L1 drives pure-noise coefficients to exactly zero.
    CHECK(l1.coefficients().rightCols(2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("ridge solvers agree") {
    Rng rng(21);
    Matrix X;
    Labels y;
    blobs(rng, 10, 3, 40, 1.0, X, y);  // F > N uses the dual path
    const Matrix probe = random_matrix(rng, 20, 40);
    std::vector<int> idx(y.begin(), y.end());
    RidgeModel a, b;
    a.configure({{"alpha", 2.0}, {"solver", std::string("cholesky")}}, 0);
    b.configure({{"alpha", 2.0}, {"solver", std::string("svd")}}, 0);
    a.fit(X, idx, 3);
    b.fit(X, idx, 3);
    CHECK((a.decision_function(probe) - b.decision_function(probe)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("PLS-DA clamps the component count") {
    Rng rng(22);
    Matrix X;
    Labels y;
    blobs(rng, 20, 3, 10, 1.0, X, y);
    PlsDaModel pls;
    pls.configure({{"n_components", std::int64_t{30}}}, 0);
    pls.fit(X, std::vector<int>(y.begin(), y.end()), 3);
    CHECK(pls.n_components_used() <= 3);
    CHECK(pls.n_components_used() >= 1);
}

TEST_CASE("fitted models round-trip through the artifact container") {
    Rng rng(23);
    Matrix X;
    Labels y;
    blobs(rng, 15, 3, 4, 1.0, X, y);
    const Matrix probe = random_matrix(rng, 30, 4, -2, 4);
    for (const auto& name : builtin_model_names()) {
        CAPTURE(name);
        const auto m = fit_model(small_spec(name), X, y);
        ByteWriter w;
        m.save(w);
        CHECK(w.bytes().size() == m.model_size_bytes());
        ByteReader r(w.bytes());
        const auto back = FittedModel::load(r);
        CHECK(r.at_end());
        CHECK(back.predict_proba(probe) == m.predict_proba(probe));
        CHECK(back.classes() == m.classes());
    }
    ByteReader junk(std::string("XXXX"));
    CHECK_THROWS_AS(FittedModel::load(junk), ParseError);
}

namespace {

// Predicts the training class frequencies for every row.
class PriorModel : public Estimator {
public:
    void configure(const ParamMap&, std::uint64_t) override {}
    void fit(const Matrix&, const std::vector<int>& y, int k) override {
        prior_ = Vector::Zero(k);
        for (int c : y) prior_[c] += 1.0;
        prior_ /= static_cast<double>(y.size());
    }
    Matrix predict_proba(const Matrix& X) const override { return prior_.transpose().replicate(X.rows(), 1); }
    void save(ByteWriter& out) const override { out.vec(prior_); }
    void load(ByteReader& in) override { prior_ = in.vec(); }

private:
    Vector prior_;
};

}  // namespace

TEST_CASE("registry accepts external models") {
    auto& reg = ModelRegistry::global();
    if (!reg.contains("prior")) reg.add({"prior", [] { return std::make_unique<PriorModel>(); }, {}, {}, false});
    CHECK_THROWS_AS(reg.add({"prior", [] { return std::make_unique<PriorModel>(); }, {}, {}, false}), ConfigError);
    Matrix X(4, 1);
    X << 0, 1, 2, 3;
    const auto m = fit_model({"prior", {}, 1}, X, {5, 5, 5, 7});
    CHECK(m.predict(X) == Labels{5, 5, 5, 5});
}

TEST_CASE("registry search spaces follow the hyperparameter table") {
    auto& reg = ModelRegistry::global();
    for (const auto& name : builtin_model_names()) {
        const auto& info = reg.get(name);
        CAPTURE(name);
        info.space.validate();
        for (const auto& [p, d] : info.space.params) {
            CHECK(std::find(info.param_names.begin(), info.param_names.end(), p) != info.param_names.end());
        }
    }
    const auto& lr = reg.get("logistic_regression").space.params;
    CHECK(std::get<RealRange>(lr.at("C")).log);
    CHECK(std::get<RealRange>(lr.at("C")).lo == 0.01);
    CHECK(std::get<RealRange>(reg.get("gaussian_nb").space.params.at("var_smoothing")).hi == 1e-6);
    CHECK(std::get<IntRange>(reg.get("extra_trees").space.params.at("n_estimators")).hi == 500);
    CHECK(std::get<IntRange>(reg.get("plsda").space.params.at("n_components")).hi == 30);
    CHECK_FALSE(reg.get("gaussian_nb").space.contains({{"var_smoothing", 1e-3}}));
    CHECK(reg.get("gaussian_nb").space.contains({{"var_smoothing", 1e-8}}));
}
