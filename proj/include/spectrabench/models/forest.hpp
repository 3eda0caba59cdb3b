#pragma once

#include "spectrabench/models/model.hpp"
#include "spectrabench/models/tree.hpp"

#include <string>
#include <vector>

namespace spectrabench {

/// Candidate feature count for "sqrt", "log2" or "all" given F features.
int resolve_max_features(const std::string& rule, std::size_t n_features);

/// Per-row weights: 1, or n / (K · n_c) for class_weight = "balanced".
std::vector<double> class_weights(const std::vector<int>& y, int n_classes, const std::string& mode);

/// Shared storage for classifiers that average leaf distributions of trees.
class TreeVoteEstimator : public Estimator {
public:
    Matrix predict_proba(const Matrix& X) const override;
    std::optional<Vector> feature_importance() const override;
    void save(ByteWriter& out) const override;
    void load(ByteReader& in) override;

    const std::vector<Tree>& trees() const { return trees_; }

protected:
    std::vector<Tree> trees_;
    int n_classes_ = 0;
    std::size_t n_features_ = 0;
};

/// CART: exhaustive threshold scan, criteria gini/entropy.
/// Params: criterion, max_depth (0 = unlimited), min_samples_split, min_samples_leaf, class_weight.
class DecisionTreeModel : public TreeVoteEstimator {
public:
    void configure(const ParamMap& params, std::uint64_t seed) override;
    void fit(const Matrix& X, const std::vector<int>& y, int n_classes) override;

private:
    TreeParams tree_params_;
    std::string class_weight_ = "none";
    std::uint64_t seed_ = 0;
};

/// Bootstrap-sampled CART trees with per-node feature subsampling.
/// Params: n_estimators, max_features (sqrt|log2|all), plus the decision tree params.
class RandomForestModel : public TreeVoteEstimator {
public:
    void configure(const ParamMap& params, std::uint64_t seed) override;
    void fit(const Matrix& X, const std::vector<int>& y, int n_classes) override;

private:
    TreeParams tree_params_;
    int n_estimators_ = 100;
    std::string max_features_ = "sqrt";
    std::string class_weight_ = "none";
    std::uint64_t seed_ = 0;
};

/// Extremely randomized trees: no bootstrap, one uniform threshold per candidate feature.
class ExtraTreesModel : public TreeVoteEstimator {
public:
    void configure(const ParamMap& params, std::uint64_t seed) override;
    void fit(const Matrix& X, const std::vector<int>& y, int n_classes) override;

private:
    TreeParams tree_params_;
    int n_estimators_ = 100;
    std::string max_features_ = "sqrt";
    std::string class_weight_ = "none";
    std::uint64_t seed_ = 0;
};

/// Multiclass gradient boosting on the softmax deviance: each round fits one
/// regression tree per class to y_k − p_k and sets leaf values by a Newton step.
/// Params: n_estimators, learning_rate, max_depth, min_samples_split, min_samples_leaf.
class GradientBoostingModel : public Estimator {
public:
    void configure(const ParamMap& params, std::uint64_t seed) override;
    void fit(const Matrix& X, const std::vector<int>& y, int n_classes) override;
    Matrix predict_proba(const Matrix& X) const override;
    std::optional<Vector> feature_importance() const override;
    void save(ByteWriter& out) const override;
    void load(ByteReader& in) override;

    /// Raw class scores before the softmax.
    Matrix decision_function(const Matrix& X) const;
    /// Mean multinomial deviance on the training set: initial value, then one entry per round.
    const std::vector<double>& train_deviance() const { return train_deviance_; }

private:
    TreeParams tree_params_;
    int n_estimators_ = 100;
    double learning_rate_ = 0.1;
    std::uint64_t seed_ = 0;

    int n_classes_ = 0;
    std::size_t n_features_ = 0;
    Vector init_scores_;
    std::vector<Tree> trees_;  // round-major: trees_[round * K + k]
    std::vector<double> train_deviance_;
};

}  // namespace spectrabench
