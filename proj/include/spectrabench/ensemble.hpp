#pragma once

#include "spectrabench/pipeline.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace spectrabench {

enum class EnsembleKind { hard_vote, soft_vote, stacking, blending };

std::string to_string(EnsembleKind k);
EnsembleKind parse_ensemble_kind(const std::string& name);

struct EnsembleSpec {
    EnsembleKind kind = EnsembleKind::soft_vote;
    std::vector<PipelineConfig> base;
    ModelSpec meta{"logistic_regression", {}, 42};
    int oof_folds = 5;
    double holdout_frac = 0.2;
    std::uint64_t seed = 42;

    /// Throws ConfigError for fewer than 2 base learners or a bad holdout fraction.
    void validate() const;
};

class FittedEnsemble {
public:
    const EnsembleSpec& spec() const { return spec_; }
    const Labels& classes() const { return classes_; }
    const std::vector<FittedPipeline>& base() const { return base_; }

    Labels predict(const Matrix& X) const;
    /// Columns in classes() order: vote shares for hard voting, mean probabilities for soft
    /// voting, meta-model probabilities for stacking and blending.
    Matrix predict_proba(const Matrix& X) const;

    /// Stacking: out-of-fold meta-features (one row per training sample) and each row's fold.
    const Matrix& meta_features() const { return meta_features_; }
    const std::vector<int>& meta_fold_of() const { return meta_fold_of_; }
    /// Base learners whose probabilities are softmax scores rather than calibrated estimates.
    const std::vector<std::string>& flags() const { return flags_; }

private:
    friend FittedEnsemble fit_ensemble(const EnsembleSpec& spec, const Matrix& X, const Labels& y);

    Matrix stacked(const Matrix& X) const;

    EnsembleSpec spec_;
    Labels classes_;
    std::optional<int> constant_;  // set when train holds a single class
    std::vector<FittedPipeline> base_;
    std::optional<FittedModel> meta_;
    std::optional<int> meta_constant_;
    Matrix meta_features_;
    std::vector<int> meta_fold_of_;
    std::vector<std::string> flags_;
};

FittedEnsemble fit_ensemble(const EnsembleSpec& spec, const Matrix& X, const Labels& y);

}  // namespace spectrabench
