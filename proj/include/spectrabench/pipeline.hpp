#pragma once

#include "spectrabench/balance.hpp"
#include "spectrabench/linalg.hpp"
#include "spectrabench/models/model.hpp"
#include "spectrabench/serialize.hpp"

#include <cstdint>
#include <optional>

namespace spectrabench {

struct ScalerModel {
    Vector means;
    Vector stds;  // population std; the divisor is 1 where std ≤ 1e-12

    Matrix transform(const Matrix& X) const;
};

/// Throws DomainError for an empty matrix.
ScalerModel fit_scaler(const Matrix& X);
inline Matrix transform_scaler(const ScalerModel& s, const Matrix& X) { return s.transform(X); }

struct PCAModel {
    Matrix components;  // k×F, orthonormal rows
    Vector explained_variance_ratio;
    Vector mean;
    int k = 0;

    /// Scores of the centered rows.
    Matrix transform(const Matrix& X) const;
    Matrix inverse_transform(const Matrix& scores) const;
};

/// SVD of the centered matrix. k is the smallest count whose cumulative ratio reaches
/// the target. Each component's largest-magnitude coordinate is positive.
/// Throws DegenerateError when all rows are identical, DomainError for a bad target.
PCAModel fit_pca(const Matrix& X, double variance_target);
inline Matrix transform_pca(const PCAModel& p, const Matrix& X) { return p.transform(X); }

struct PipelineConfig {
    BalanceStrategy balance;
    bool use_pca = false;
    double pca_variance_target = 0.95;
    ModelSpec model;
    /// Balance and model seeds are derived from this value at fit time.
    std::uint64_t seed = 42;
};

class FittedPipeline {
public:
    const PipelineConfig& config() const { return config_; }
    const ScalerModel& scaler() const { return scaler_; }
    const std::optional<PCAModel>& pca() const { return pca_; }
    const FittedModel& model() const { return model_; }
    const Labels& classes() const { return model_.classes(); }

    /// Applies the frozen scaler and PCA.
    Matrix transform(const Matrix& X) const;
    Labels predict(const Matrix& X) const;
    Matrix predict_proba(const Matrix& X) const;
    /// Probabilities with columns in `classes` order; classes unseen in training get 0.
    Matrix predict_proba_aligned(const Matrix& X, const Labels& classes) const;

    /// Magic "SBP1", u32 version, balance, PCA flag and target, seed, scaler, PCA, model.
    void save(ByteWriter& out) const;
    static FittedPipeline load(ByteReader& in);

private:
    friend FittedPipeline fit_pipeline(const PipelineConfig& cfg, const Matrix& X, const Labels& y);

    PipelineConfig config_;
    ScalerModel scaler_;
    std::optional<PCAModel> pca_;
    FittedModel model_;
};

/// balance → scaler → optional PCA → model, every stage fit on (X, y) only.
FittedPipeline fit_pipeline(const PipelineConfig& cfg, const Matrix& X, const Labels& y);

}  // namespace spectrabench
