#include "spectrabench/models/forest.hpp"

#include "spectrabench/error.hpp"
#include "spectrabench/rng.hpp"

#include <algorithm>
#include <cmath>

namespace spectrabench {

int resolve_max_features(const std::string& rule, std::size_t n_features) {
    const double f = static_cast<double>(n_features);
    if (rule == "sqrt") return std::max(1, static_cast<int>(std::floor(std::sqrt(f))));
    if (rule == "log2") return std::max(1, static_cast<int>(std::floor(std::log2(f))));
    if (rule == "all" || rule == "none") return 0;
    throw ConfigError("max_features must be sqrt, log2 or all, got '" + rule + "'");
}

std::vector<double> class_weights(const std::vector<int>& y, int n_classes, const std::string& mode) {
    std::vector<double> w(y.size(), 1.0);
    if (mode == "none") return w;
    if (mode != "balanced") throw ConfigError("class_weight must be none or balanced");
    std::vector<double> counts(static_cast<std::size_t>(n_classes), 0.0);
    for (int c : y) counts[static_cast<std::size_t>(c)] += 1.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        w[i] = static_cast<double>(y.size()) /
               (static_cast<double>(n_classes) * counts[static_cast<std::size_t>(y[i])]);
    }
    return w;
}

namespace {

TreeParams read_tree_params(const ParamMap& p) {
    TreeParams t;
    t.criterion = parse_criterion(param_str(p, "criterion", "gini"));
    if (t.criterion == Criterion::squared_error) throw ConfigError("classifier criterion must be gini or entropy");
    t.max_depth = static_cast<int>(param_int(p, "max_depth", 0));
    t.min_samples_split = static_cast<int>(param_int(p, "min_samples_split", 2));
    t.min_samples_leaf = static_cast<int>(param_int(p, "min_samples_leaf", 1));
    if (t.max_depth < 0) throw ConfigError("max_depth must be >= 0 (0 = unlimited)");
    if (t.min_samples_split < 2) throw ConfigError("min_samples_split must be >= 2");
    if (t.min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be >= 1");
    return t;
}

int read_n_estimators(const ParamMap& p) {
    const auto n = param_int(p, "n_estimators", 100);
    if (n < 1) throw ConfigError("n_estimators must be >= 1");
    return static_cast<int>(n);
}

}  // namespace

Matrix TreeVoteEstimator::predict_proba(const Matrix& X) const {
    Matrix P = Matrix::Zero(X.rows(), n_classes_);
    for (const auto& tree : trees_) {
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            const auto v = tree.value(tree.apply(X, i));
            for (int k = 0; k < n_classes_; ++k) P(i, k) += v[static_cast<std::size_t>(k)];
        }
    }
    P /= static_cast<double>(trees_.size());
    return P;
}

std::optional<Vector> TreeVoteEstimator::feature_importance() const {
    Vector total = Vector::Zero(static_cast<Eigen::Index>(n_features_));
    for (const auto& tree : trees_) total += normalized_importance(tree.impurity_decrease());
    const double s = total.sum();
    if (s > 0.0) total /= s;
    return total;
}

void TreeVoteEstimator::save(ByteWriter& out) const {
    out.i64(n_classes_);
    out.u64(n_features_);
    out.u64(trees_.size());
    for (const auto& t : trees_) t.save(out);
}

void TreeVoteEstimator::load(ByteReader& in) {
    n_classes_ = static_cast<int>(in.i64());
    n_features_ = in.u64();
    trees_.resize(in.u64());
    for (auto& t : trees_) t.load(in);
}

void DecisionTreeModel::configure(const ParamMap& params, std::uint64_t seed) {
    tree_params_ = read_tree_params(params);
    class_weight_ = param_str(params, "class_weight", "none");
    seed_ = seed;
}

void DecisionTreeModel::fit(const Matrix& X, const std::vector<int>& y, int n_classes) {
    n_classes_ = n_classes;
    n_features_ = static_cast<std::size_t>(X.cols());
    const auto w = class_weights(y, n_classes, class_weight_);
    Rng rng(derive_seed(seed_, {"decision_tree"}));
    TreeTargets targets{&y, n_classes, nullptr};
    trees_.clear();
    trees_.push_back(build_tree(X, targets, w, tree_params_, rng));
}

void RandomForestModel::configure(const ParamMap& params, std::uint64_t seed) {
    tree_params_ = read_tree_params(params);
    n_estimators_ = read_n_estimators(params);
    max_features_ = param_str(params, "max_features", "sqrt");
    resolve_max_features(max_features_, 1);
    class_weight_ = param_str(params, "class_weight", "none");
    seed_ = seed;
}

void RandomForestModel::fit(const Matrix& X, const std::vector<int>& y, int n_classes) {
    n_classes_ = n_classes;
    n_features_ = static_cast<std::size_t>(X.cols());
    TreeParams tp = tree_params_;
    tp.max_features = resolve_max_features(max_features_, n_features_);
    const auto cw = class_weights(y, n_classes, class_weight_);
    TreeTargets targets{&y, n_classes, nullptr};
    const std::size_t n = y.size();
    trees_.clear();
    trees_.reserve(static_cast<std::size_t>(n_estimators_));
    for (int t = 0; t < n_estimators_; ++t) {
        Rng rng(derive_seed(seed_, {"random_forest", t}));
        std::vector<double> w(n, 0.0);
        for (std::size_t d = 0; d < n; ++d) w[static_cast<std::size_t>(rng.below(n))] += 1.0;
        for (std::size_t i = 0; i < n; ++i) w[i] *= cw[i];
        trees_.push_back(build_tree(X, targets, w, tp, rng));
    }
}

void ExtraTreesModel::configure(const ParamMap& params, std::uint64_t seed) {
    tree_params_ = read_tree_params(params);
    tree_params_.splitter = Splitter::random;
    n_estimators_ = read_n_estimators(params);
    max_features_ = param_str(params, "max_features", "sqrt");
    resolve_max_features(max_features_, 1);
    class_weight_ = param_str(params, "class_weight", "none");
    seed_ = seed;
}

void ExtraTreesModel::fit(const Matrix& X, const std::vector<int>& y, int n_classes) {
    n_classes_ = n_classes;
    n_features_ = static_cast<std::size_t>(X.cols());
    TreeParams tp = tree_params_;
    tp.max_features = resolve_max_features(max_features_, n_features_);
    const auto w = class_weights(y, n_classes, class_weight_);
    TreeTargets targets{&y, n_classes, nullptr};
    trees_.clear();
    trees_.reserve(static_cast<std::size_t>(n_estimators_));
    for (int t = 0; t < n_estimators_; ++t) {
        Rng rng(derive_seed(seed_, {"extra_trees", t}));
        trees_.push_back(build_tree(X, targets, w, tp, rng));
    }
}

void GradientBoostingModel::configure(const ParamMap& params, std::uint64_t seed) {
    tree_params_ = TreeParams{};
    tree_params_.criterion = Criterion::squared_error;
    tree_params_.max_depth = static_cast<int>(param_int(params, "max_depth", 3));
    tree_params_.min_samples_split = static_cast<int>(param_int(params, "min_samples_split", 2));
    tree_params_.min_samples_leaf = static_cast<int>(param_int(params, "min_samples_leaf", 1));
    if (tree_params_.max_depth < 1) throw ConfigError("gradient boosting max_depth must be >= 1");
    if (tree_params_.min_samples_split < 2) throw ConfigError("min_samples_split must be >= 2");
    if (tree_params_.min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be >= 1");
    n_estimators_ = read_n_estimators(params);
    learning_rate_ = param_real(params, "learning_rate", 0.1);
    if (!(learning_rate_ > 0.0)) throw ConfigError("learning_rate must be > 0");
    seed_ = seed;
}

namespace {

double mean_deviance(const Matrix& F, const std::vector<int>& y) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < F.rows(); ++i) {
        const double m = F.row(i).maxCoeff();
        const double lse = m + std::log((F.row(i).array() - m).exp().sum());
        total += lse - F(i, y[static_cast<std::size_t>(i)]);
    }
    return total / static_cast<double>(F.rows());
}

}  // namespace

void GradientBoostingModel::fit(const Matrix& X, const std::vector<int>& y, int n_classes) {
    n_classes_ = n_classes;
    n_features_ = static_cast<std::size_t>(X.cols());
    const auto n = static_cast<Eigen::Index>(y.size());
    const auto K = static_cast<Eigen::Index>(n_classes);

    // Log class priors as the starting scores.
    init_scores_ = Vector::Zero(K);
    for (int c : y) init_scores_[c] += 1.0;
    for (Eigen::Index k = 0; k < K; ++k) {
        init_scores_[k] = std::log(std::max(init_scores_[k], 1e-12) / static_cast<double>(n));
    }
    Matrix F = init_scores_.transpose().replicate(n, 1);

    const Presort presort = presort_columns(X);
    const std::vector<double> ones(static_cast<std::size_t>(n), 1.0);
    std::vector<double> residual(static_cast<std::size_t>(n));
    trees_.clear();
    train_deviance_.assign(1, mean_deviance(F, y));

    for (int round = 0; round < n_estimators_; ++round) {
        const Matrix P = softmax_rows(F);
        for (Eigen::Index k = 0; k < K; ++k) {
            for (Eigen::Index i = 0; i < n; ++i) {
                residual[static_cast<std::size_t>(i)] = (y[static_cast<std::size_t>(i)] == k ? 1.0 : 0.0) - P(i, k);
            }
            Rng rng(derive_seed(seed_, {"gradient_boosting", round, k}));
            TreeTargets targets{nullptr, 0, &residual};
            Tree tree = build_tree(X, targets, ones, tree_params_, rng, &presort);

            // Newton step per leaf: (K-1)/K · Σr / Σ|r|(1-|r|).
            std::vector<double> num(tree.nodes().size(), 0.0);
            std::vector<double> den(tree.nodes().size(), 0.0);
            std::vector<int> leaf_of(static_cast<std::size_t>(n));
            for (Eigen::Index i = 0; i < n; ++i) {
                const int leaf = tree.apply(X, i);
                leaf_of[static_cast<std::size_t>(i)] = leaf;
                const double r = residual[static_cast<std::size_t>(i)];
                num[static_cast<std::size_t>(leaf)] += r;
                den[static_cast<std::size_t>(leaf)] += std::abs(r) * (1.0 - std::abs(r));
            }
            const double scale = static_cast<double>(K - 1) / static_cast<double>(K);
            for (std::size_t node = 0; node < tree.nodes().size(); ++node) {
                if (!tree.nodes()[node].is_leaf()) continue;
                const double v = den[node] > 1e-150 ? scale * num[node] / den[node] : 0.0;
                const double vv[1] = {v};
                tree.set_value(static_cast<int>(node), vv);
            }
            for (Eigen::Index i = 0; i < n; ++i) {
                F(i, k) += learning_rate_ * tree.value(leaf_of[static_cast<std::size_t>(i)])[0];
            }
            trees_.push_back(std::move(tree));
        }
        train_deviance_.push_back(mean_deviance(F, y));
    }
}

Matrix GradientBoostingModel::decision_function(const Matrix& X) const {
    const auto K = static_cast<std::size_t>(n_classes_);
    Matrix F = init_scores_.transpose().replicate(X.rows(), 1);
    for (std::size_t t = 0; t < trees_.size(); ++t) {
        const auto k = static_cast<Eigen::Index>(t % K);
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            F(i, k) += learning_rate_ * trees_[t].value(trees_[t].apply(X, i))[0];
        }
    }
    return F;
}

Matrix GradientBoostingModel::predict_proba(const Matrix& X) const {
    return softmax_rows(decision_function(X));
}

std::optional<Vector> GradientBoostingModel::feature_importance() const {
    std::vector<double> total(n_features_, 0.0);
    for (const auto& t : trees_) {
        const auto& d = t.impurity_decrease();
        for (std::size_t f = 0; f < n_features_; ++f) total[f] += d[f];
    }
    return normalized_importance(total);
}

void GradientBoostingModel::save(ByteWriter& out) const {
    out.i64(n_classes_);
    out.u64(n_features_);
    out.f64(learning_rate_);
    out.vec(init_scores_);
    out.u64(trees_.size());
    for (const auto& t : trees_) t.save(out);
    out.f64s(train_deviance_);
}

void GradientBoostingModel::load(ByteReader& in) {
    n_classes_ = static_cast<int>(in.i64());
    n_features_ = in.u64();
    learning_rate_ = in.f64();
    init_scores_ = in.vec();
    trees_.resize(in.u64());
    for (auto& t : trees_) t.load(in);
    train_deviance_ = in.f64s();
}

}  // namespace spectrabench
