#pragma once

#include "spectrabench/models/model.hpp"

#include <string>

namespace spectrabench {

/// Brute-force k-nearest neighbors under the Minkowski p-distance (p ∈ {1, 2}).
/// Neighbors are ordered by (distance, training index). With weights = "distance",
/// votes are 1/d; exact matches (d = 0) take all the weight when present.
class KnnModel : public Estimator {
public:
    void configure(const ParamMap& params, std::uint64_t seed) override;
    void fit(const Matrix& X, const std::vector<int>& y, int n_classes) override;
    Matrix predict_proba(const Matrix& X) const override;
    void save(ByteWriter& out) const override;
    void load(ByteReader& in) override;

private:
    int k_ = 5;
    bool distance_weighted_ = false;
    int p_ = 2;

    Matrix X_;
    std::vector<int> y_;
    int n_classes_ = 0;
};

/// Per-class Gaussian likelihoods with class-frequency priors. As in the common
/// reference implementation, the variance floor is var_smoothing times the
/// largest per-feature variance of the training data.
class GaussianNbModel : public Estimator {
public:
    void configure(const ParamMap& params, std::uint64_t seed) override;
    void fit(const Matrix& X, const std::vector<int>& y, int n_classes) override;
    Matrix predict_proba(const Matrix& X) const override;
    void save(ByteWriter& out) const override;
    void load(ByteReader& in) override;

    Matrix joint_log_likelihood(const Matrix& X) const;
    double epsilon() const { return epsilon_; }

private:
    double var_smoothing_ = 1e-9;

    Matrix means_;      // K×F
    Matrix variances_;  // K×F, smoothing included
    Vector log_prior_;
    double epsilon_ = 0.0;
};

/// PLS-DA: NIPALS PLS2 regression of autoscaled one-hot targets on autoscaled X.
/// The component count is clamped to min(N, F, K) at fit time; probabilities are
/// a softmax of the predicted target columns.
class PlsDaModel : public Estimator {
public:
    void configure(const ParamMap& params, std::uint64_t seed) override;
    void fit(const Matrix& X, const std::vector<int>& y, int n_classes) override;
    Matrix predict_proba(const Matrix& X) const override;
    bool calibrated() const override { return false; }
    void save(ByteWriter& out) const override;
    void load(ByteReader& in) override;

    Matrix decision_function(const Matrix& X) const;
    int n_components_used() const { return used_components_; }

private:
    int n_components_ = 2;
    int used_components_ = 0;

    Vector x_mean_, x_scale_, y_mean_, y_scale_;
    Matrix coef_;  // F×K in scaled units
};

}  // namespace spectrabench
