#pragma once

#include "spectrabench/models/model.hpp"

#include <string>

namespace spectrabench {

/// Smooth part of the multinomial logistic objective
///   J(W, b) = (1/N) Σ_i w_i · CE_i + ||W||² / (2·C·N)     (L2)
///   J(W, b) = (1/N) Σ_i w_i · CE_i                         (L1; ||W||₁/(C·N) handled by prox)
/// W is K×F, b is K. The intercept is never penalized.
struct LogisticObjective {
    const Matrix& X;
    const std::vector<int>& y;
    const std::vector<double>& sample_weight;
    double C = 1.0;
    bool l2 = true;

    double value(const Matrix& W, const Vector& b) const;
    /// Value plus gradients w.r.t. W and b.
    double value_and_gradient(const Matrix& W, const Vector& b, Matrix& gW, Vector& gb) const;
};

/// Multinomial logistic regression trained by full-batch gradient descent with
/// Armijo backtracking (proximal steps for L1). Stops when the gradient
/// (or prox-gradient mapping) ∞-norm drops below 1e-6 or after max_iter steps.
/// Params: C, penalty (l1|l2), max_iter, class_weight.
class LogisticRegressionModel : public Estimator {
public:
    void configure(const ParamMap& params, std::uint64_t seed) override;
    void fit(const Matrix& X, const std::vector<int>& y, int n_classes) override;
    Matrix predict_proba(const Matrix& X) const override;
    void save(ByteWriter& out) const override;
    void load(ByteReader& in) override;

    const Matrix& coefficients() const { return W_; }
    const Vector& intercepts() const { return b_; }
    int iterations() const { return iterations_; }
    bool converged() const { return converged_; }

private:
    double C_ = 1.0;
    bool l2_ = true;
    int max_iter_ = 5000;
    std::string class_weight_ = "none";

    Matrix W_;
    Vector b_;
    int iterations_ = 0;
    bool converged_ = false;
};

/// One-vs-all least squares on ±1 targets with Tikhonov penalty alpha, solved in
/// closed form (primal or dual normal equations, or SVD). Probabilities are a
/// softmax of the decision scores and are not calibrated.
/// Params: alpha, solver (auto|cholesky|svd), class_weight.
class RidgeModel : public Estimator {
public:
    void configure(const ParamMap& params, std::uint64_t seed) override;
    void fit(const Matrix& X, const std::vector<int>& y, int n_classes) override;
    Matrix predict_proba(const Matrix& X) const override;
    bool calibrated() const override { return false; }
    void save(ByteWriter& out) const override;
    void load(ByteReader& in) override;

    Matrix decision_function(const Matrix& X) const;

private:
    double alpha_ = 1.0;
    std::string solver_ = "auto";
    std::string class_weight_ = "none";
    Matrix W_;  // F×K
    Vector b_;
};

}  // namespace spectrabench
